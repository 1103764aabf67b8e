#pragma once

// Label text format: one object per line, "<class_id> <cx> <cy> <w> <h>",
// normalized reals with 6 decimals, LF endings, no trailing whitespace.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "zoomdet/error.hpp"
#include "zoomdet/geometry.hpp"

namespace zoomdet {

struct LabeledBox {
  int class_id = 0;
  NormBox box;
  bool operator==(const LabeledBox&) const = default;
};

inline std::string format_label_line(const LabeledBox& l) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", l.class_id, l.box.cx, l.box.cy,
                l.box.w, l.box.h);
  return buf;
}

inline std::string format_labels(const std::vector<LabeledBox>& labels) {
  std::string out;
  for (const auto& l : labels) {
    out += format_label_line(l);
    out += '\n';
  }
  return out;
}

// Strict parser: exactly five fields per non-empty line, no trailing junk.
inline std::vector<LabeledBox> parse_labels(std::string_view text) {
  std::vector<LabeledBox> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    LabeledBox l;
    int consumed = 0;
    if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf%n", &l.class_id, &l.box.cx, &l.box.cy,
                    &l.box.w, &l.box.h, &consumed) != 5 ||
        consumed != static_cast<int>(line.size()) || l.class_id < 0)
      throw ConfigError("label line " + std::to_string(line_no) + " malformed: '" + line + "'");
    out.push_back(l);
  }
  return out;
}

// Round-trips a label through its text form so in-memory records equal what a
// reader of the file will see.
inline LabeledBox quantize_label(const LabeledBox& l) {
  return parse_labels(format_label_line(l)).front();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline std::vector<LabeledBox> read_label_file(const std::string& path) {
  return parse_labels(read_text_file(path));
}

inline void write_label_file(const std::string& path, const std::vector<LabeledBox>& labels) {
  write_text_file(path, format_labels(labels));
}

}  // namespace zoomdet
