#pragma once

// Ground-truth matching, average precision and mAP over IoU-threshold sweeps.
//
// AP uses all-point interpolation: the precision envelope
// p̂(k) = max_{j ≥ k} precision(j) integrated over recall steps,
// AP = Σ_k (recall(k) − recall(k−1)) · p̂(k). The 11-point variant averages
// the envelope at recall 0, 0.1, ..., 1.0.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <iomanip>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zoomdet/crop.hpp"
#include "zoomdet/detection.hpp"
#include "zoomdet/detector.hpp"
#include "zoomdet/error.hpp"
#include "zoomdet/labels.hpp"

namespace zoomdet {

enum class FrameTag { full_size, cropped };
enum class Interpolation { all_point, eleven_point };

inline const char* to_string(FrameTag t) { return t == FrameTag::full_size ? "full_size" : "cropped"; }

struct GroundTruthSet {
  std::map<std::uint64_t, GroundTruthFrame> frames;
};

struct DetectionSet {
  std::map<std::uint64_t, std::vector<Detection>> frames;
};

// Default reporting thresholds.
inline const std::vector<double>& default_iou_thresholds() {
  static const std::vector<double> t{0.01, 0.10, 0.20, 0.30, 0.40, 0.50};
  return t;
}

// Small-object band: box area between 0.08% and 0.58% of the image, inclusive.
inline bool is_small_object(const NormBox& box) {
  const double a = box.w * box.h;
  return a >= 0.0008 && a <= 0.0058;
}

struct MatchResult {
  struct Pair {
    std::size_t det = 0, gt = 0;
    double iou = 0, confidence = 0;
  };
  std::vector<Pair> true_positives;
  std::vector<std::size_t> false_positives;  // indices into the detection list
  std::vector<std::size_t> false_negatives;  // indices into the ground-truth list
  // Detection indices of `class_id` in processing order.
  std::vector<std::size_t> order;
};

// Detections of `class_id` are taken in descending confidence (ties: higher
// best-IoU first, then input order); each claims the unmatched ground-truth
// box with the highest IoU ≥ threshold.
inline MatchResult match_detections(const std::vector<LabeledBox>& gt,
                                    const std::vector<Detection>& dets, int class_id,
                                    double iou_threshold) {
  MatchResult r;
  std::vector<std::size_t> gt_idx;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (gt[i].class_id == class_id) gt_idx.push_back(i);

  std::vector<double> best_iou(dets.size(), 0.0);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (dets[d].class_id != class_id) continue;
    r.order.push_back(d);
    for (std::size_t g : gt_idx) best_iou[d] = std::max(best_iou[d], iou(dets[d].box, gt[g].box));
  }
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].confidence != dets[b].confidence) return dets[a].confidence > dets[b].confidence;
    return best_iou[a] > best_iou[b];
  });

  std::vector<bool> taken(gt.size(), false);
  for (std::size_t d : r.order) {
    std::optional<std::size_t> pick;
    double pick_iou = -1;
    for (std::size_t g : gt_idx) {
      if (taken[g]) continue;
      const double v = iou(dets[d].box, gt[g].box);
      if (v >= iou_threshold && v > pick_iou) {
        pick = g;
        pick_iou = v;
      }
    }
    if (pick) {
      taken[*pick] = true;
      r.true_positives.push_back({d, *pick, pick_iou, dets[d].confidence});
    } else {
      r.false_positives.push_back(d);
    }
  }
  for (std::size_t g : gt_idx)
    if (!taken[g]) r.false_negatives.push_back(g);
  return r;
}

// One ranked detection outcome. (frame_id, rank) makes the global order
// independent of accumulation order when confidences tie.
struct RankedOutcome {
  double confidence = 0;
  std::uint64_t frame_id = 0;
  std::size_t rank = 0;
  bool true_positive = false;
};

struct PRPoint {
  double recall = 0, precision = 0, confidence = 0;
};

inline void sort_outcomes(std::vector<RankedOutcome>& outcomes) {
  std::sort(outcomes.begin(), outcomes.end(), [](const RankedOutcome& a, const RankedOutcome& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
    return a.rank < b.rank;
  });
}

inline std::vector<PRPoint> pr_curve(std::vector<RankedOutcome> outcomes, std::size_t n_gt) {
  sort_outcomes(outcomes);
  std::vector<PRPoint> pts;
  pts.reserve(outcomes.size());
  std::size_t tp = 0, fp = 0;
  for (const auto& o : outcomes) {
    (o.true_positive ? tp : fp)++;
    pts.push_back({n_gt ? static_cast<double>(tp) / n_gt : 0.0,
                   static_cast<double>(tp) / (tp + fp), o.confidence});
  }
  return pts;
}

// Empty when there is no ground truth (AP undefined, not zero).
inline std::optional<double> average_precision(std::vector<RankedOutcome> outcomes,
                                               std::size_t n_gt,
                                               Interpolation mode = Interpolation::all_point) {
  if (n_gt == 0) return std::nullopt;
  const std::vector<PRPoint> pts = pr_curve(std::move(outcomes), n_gt);
  std::vector<double> envelope(pts.size());
  double running = 0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  if (mode == Interpolation::eleven_point) {
    double sum = 0;
    for (int k = 0; k <= 10; ++k) {
      const double r = k / 10.0;
      double best = 0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (pts[i].recall >= r - 1e-12) {
          best = envelope[i];
          break;
        }
      sum += best;
    }
    return sum / 11;
  }
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ap += (pts[i].recall - prev_recall) * envelope[i];
    prev_recall = pts[i].recall;
  }
  return std::clamp(ap, 0.0, 1.0);
}

struct ClassResult {
  int class_id = 0;
  std::optional<double> ap;
  std::size_t tp = 0, fp = 0, fn = 0, n_gt = 0;
  std::optional<double> small_ap;
  std::size_t n_small_gt = 0;
};

struct ThresholdResult {
  double iou_threshold = 0;
  std::vector<ClassResult> classes;
  std::optional<double> map;        // unweighted mean over classes with ground truth
  std::optional<double> small_map;  // same, over the small-object subsets
};

struct EvalDiagnostics {
  std::size_t unknown_frames = 0;             // detection frames absent from ground truth
  std::size_t unknown_frame_detections = 0;   // detections in those frames (all FP)
  std::size_t unlabeled_class_detections = 0; // detections of classes with no ground truth
};

struct EvalReport {
  FrameTag tag = FrameTag::full_size;
  Interpolation interpolation = Interpolation::all_point;
  std::vector<int> class_ids;
  std::vector<ThresholdResult> thresholds;
  EvalDiagnostics diagnostics;

  std::vector<double> threshold_values() const {
    std::vector<double> v;
    for (const auto& t : thresholds) v.push_back(t.iou_threshold);
    return v;
  }

  const ThresholdResult& at(double iou_threshold) const {
    for (const auto& t : thresholds)
      if (std::abs(t.iou_threshold - iou_threshold) < 1e-12) return t;
    throw ConfigError("threshold not present in report");
  }

  const ClassResult& at(double iou_threshold, int class_id) const {
    for (const auto& c : at(iou_threshold).classes)
      if (c.class_id == class_id) return c;
    throw ConfigError("class not present in report");
  }
};

struct EvalOptions {
  FrameTag tag = FrameTag::full_size;
  Interpolation interpolation = Interpolation::all_point;
  // When non-empty, only these classes are evaluated.
  std::vector<int> classes;
};

inline void validate_thresholds(const std::vector<double>& thresholds) {
  if (thresholds.empty()) throw ConfigError("no IoU thresholds given");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0 && thresholds[i] <= 1))
      throw ConfigError("IoU threshold out of range (0, 1]: " + std::to_string(thresholds[i]));
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw ConfigError("IoU thresholds must be strictly ascending");
  }
}

namespace detail {
inline std::optional<double> mean_of_present(const std::vector<std::optional<double>>& v) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / n;
}
}  // namespace detail

inline EvalReport evaluate(const GroundTruthSet& gt, const DetectionSet& det,
                           const std::vector<double>& iou_thresholds,
                           const EvalOptions& options = {}) {
  validate_thresholds(iou_thresholds);
  EvalReport report;
  report.tag = options.tag;
  report.interpolation = options.interpolation;

  std::set<int> classes;
  for (const auto& [id, frame] : gt.frames)
    for (const auto& o : frame.objects) classes.insert(o.class_id);
  if (!options.classes.empty()) {
    std::set<int> keep(options.classes.begin(), options.classes.end());
    std::erase_if(classes, [&](int c) { return !keep.contains(c); });
  }
  report.class_ids.assign(classes.begin(), classes.end());

  for (const auto& [id, dets] : det.frames) {
    if (!gt.frames.contains(id)) {
      ++report.diagnostics.unknown_frames;
      report.diagnostics.unknown_frame_detections += dets.size();
    }
    for (const auto& d : dets)
      if (!classes.contains(d.class_id) && options.classes.empty())
        ++report.diagnostics.unlabeled_class_detections;
  }

  static const std::vector<LabeledBox> kNoObjects;
  static const std::vector<Detection> kNoDetections;
  std::set<std::uint64_t> frame_ids;
  for (const auto& [id, f] : gt.frames) frame_ids.insert(id);
  for (const auto& [id, d] : det.frames) frame_ids.insert(id);

  for (double thr : iou_thresholds) {
    ThresholdResult tr;
    tr.iou_threshold = thr;
    std::vector<std::optional<double>> aps, small_aps;
    for (int cls : classes) {
      ClassResult cr;
      cr.class_id = cls;
      std::vector<RankedOutcome> all, small;
      for (std::uint64_t id : frame_ids) {
        const auto git = gt.frames.find(id);
        const auto& objects = git == gt.frames.end() ? kNoObjects : git->second.objects;
        const auto dit = det.frames.find(id);
        const auto& dets = dit == det.frames.end() ? kNoDetections : dit->second;

        const MatchResult m = match_detections(objects, dets, cls, thr);
        std::vector<std::optional<std::size_t>> matched_gt(dets.size());
        for (const auto& p : m.true_positives) matched_gt[p.det] = p.gt;
        for (std::size_t rank = 0; rank < m.order.size(); ++rank) {
          const std::size_t d = m.order[rank];
          const RankedOutcome o{dets[d].confidence, id, rank, matched_gt[d].has_value()};
          all.push_back(o);
          if (!matched_gt[d] || is_small_object(objects[*matched_gt[d]].box)) small.push_back(o);
        }
        for (const auto& o : objects)
          if (o.class_id == cls) {
            ++cr.n_gt;
            if (is_small_object(o.box)) ++cr.n_small_gt;
          }
        cr.tp += m.true_positives.size();
        cr.fp += m.false_positives.size();
        cr.fn += m.false_negatives.size();
      }
      cr.ap = average_precision(std::move(all), cr.n_gt, options.interpolation);
      cr.small_ap = average_precision(std::move(small), cr.n_small_gt, options.interpolation);
      aps.push_back(cr.ap);
      small_aps.push_back(cr.small_ap);
      tr.classes.push_back(cr);
    }
    tr.map = detail::mean_of_present(aps);
    tr.small_map = detail::mean_of_present(small_aps);
    report.thresholds.push_back(std::move(tr));
  }
  return report;
}

// Re-expresses a full-frame evaluation in crop coordinates. Ground truth is
// clipped to each frame's crop; boxes outside it stay as unmatchable ground
// truth so they count as misses. Frames without a crop keep full-frame
// coordinates (their detections, if any, were produced on the full frame).
using CropMap = std::map<std::uint64_t, std::optional<CropRegion>>;

inline GroundTruthSet to_crop_frame(const GroundTruthSet& gt, const CropMap& crops) {
  GroundTruthSet out;
  for (const auto& [id, frame] : gt.frames) {
    const auto it = crops.find(id);
    if (it == crops.end() || !it->second) {
      out.frames[id] = frame;
      continue;
    }
    const CropRegion& region = *it->second;
    GroundTruthFrame f{id, region.width(), region.height(), {}};
    for (const auto& o : frame.objects) {
      if (auto clipped = clip_to_crop(o.box, region))
        f.objects.push_back({o.class_id, *clipped});
      else
        f.objects.push_back({o.class_id, remap_box_to_crop(o.box, region)});
    }
    out.frames[id] = std::move(f);
  }
  return out;
}

inline DetectionSet to_crop_frame(const DetectionSet& det, const CropMap& crops) {
  DetectionSet out;
  for (const auto& [id, dets] : det.frames) {
    const auto it = crops.find(id);
    auto& dst = out.frames[id];
    for (const auto& d : dets)
      dst.push_back(it == crops.end() || !it->second ? d : remap_to_crop(d, *it->second));
  }
  return out;
}

struct ComparisonRow {
  double iou_threshold = 0;
  std::optional<double> map_a, map_b;
  std::optional<double> delta;  // map_b − map_a
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;
};

inline ComparisonTable compare_reports(const EvalReport& a, const EvalReport& b) {
  const auto ta = a.threshold_values(), tb = b.threshold_values();
  if (ta.size() != tb.size() || !std::equal(ta.begin(), ta.end(), tb.begin(), [](double x, double y) {
        return std::abs(x - y) < 1e-12;
      }))
    throw ConfigError("reports use different IoU thresholds");
  if (a.class_ids != b.class_ids) throw ConfigError("reports cover different classes");
  ComparisonTable t;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    ComparisonRow row{ta[i], a.thresholds[i].map, b.thresholds[i].map, std::nullopt};
    if (row.map_a && row.map_b) row.delta = *row.map_b - *row.map_a;
    t.rows.push_back(row);
  }
  return t;
}

namespace detail {
inline std::string pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", *v * 100);
  return buf;
}
inline std::string num(const std::optional<double>& v) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}
}  // namespace detail

// Human-readable aligned table: one row per (threshold, class) plus an mAP row.
inline std::string render_report(const EvalReport& r) {
  std::ostringstream os;
  os << "evaluation frame: " << to_string(r.tag) << "\n";
  os << std::left << std::setw(8) << "IoU" << std::setw(8) << "class" << std::right
     << std::setw(10) << "AP" << std::setw(8) << "TP" << std::setw(8) << "FP" << std::setw(8)
     << "FN" << std::setw(12) << "small AP" << "\n";
  for (const auto& t : r.thresholds) {
    char thr[16];
    std::snprintf(thr, sizeof thr, "%.2f", t.iou_threshold);
    for (const auto& c : t.classes)
      os << std::left << std::setw(8) << thr << std::setw(8) << c.class_id << std::right
         << std::setw(10) << detail::pct(c.ap) << std::setw(8) << c.tp << std::setw(8) << c.fp
         << std::setw(8) << c.fn << std::setw(12) << detail::pct(c.small_ap) << "\n";
    os << std::left << std::setw(8) << thr << std::setw(8) << "mAP" << std::right << std::setw(10)
       << detail::pct(t.map) << std::setw(24) << "" << std::setw(12) << detail::pct(t.small_map)
       << "\n";
  }
  if (r.diagnostics.unknown_frames)
    os << "warning: " << r.diagnostics.unknown_frames
       << " detection frame(s) had no ground truth; their detections counted as FP\n";
  return os.str();
}

// Structured records, one line per (class, threshold), whitespace separated:
//   tag class_id iou ap tp fp fn small_ap
// Absent values are written as NA.
inline std::string report_records(const EvalReport& r) {
  std::ostringstream os;
  os << "# tag class_id iou ap tp fp fn small_ap\n";
  for (const auto& t : r.thresholds)
    for (const auto& c : t.classes) {
      char thr[16];
      std::snprintf(thr, sizeof thr, "%.2f", t.iou_threshold);
      os << to_string(r.tag) << ' ' << c.class_id << ' ' << thr << ' ' << detail::num(c.ap) << ' '
         << c.tp << ' ' << c.fp << ' ' << c.fn << ' ' << detail::num(c.small_ap) << '\n';
    }
  return os.str();
}

inline std::string render_comparison(const ComparisonTable& t, const std::string& label_a,
                                     const std::string& label_b) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "IoU" << std::right << std::setw(16) << label_a
     << std::setw(16) << label_b << std::setw(12) << "delta" << "\n";
  for (const auto& row : t.rows) {
    char thr[16];
    std::snprintf(thr, sizeof thr, "%.2f", row.iou_threshold);
    std::string delta = "n/a";
    if (row.delta) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%+.2f", *row.delta * 100);
      delta = buf;
    }
    os << std::left << std::setw(8) << thr << std::right << std::setw(16) << detail::pct(row.map_a)
       << std::setw(16) << detail::pct(row.map_b) << std::setw(12) << delta << "\n";
  }
  return os.str();
}

}  // namespace zoomdet
