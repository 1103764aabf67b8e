#pragma once

#include <stdexcept>
#include <string>

namespace zoomdet {

// Root of every error the library throws. Subclasses name the failure kind so
// callers (the CLI in particular) can map them onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ZOOMDET_DEFINE_ERROR(Name)           \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  }

ZOOMDET_DEFINE_ERROR(RangeError);
ZOOMDET_DEFINE_ERROR(DegenerateFrame);
ZOOMDET_DEFINE_ERROR(BehindCamera);
ZOOMDET_DEFINE_ERROR(OutsideFrame);
ZOOMDET_DEFINE_ERROR(PlacementError);
ZOOMDET_DEFINE_ERROR(ConfigError);
ZOOMDET_DEFINE_ERROR(MissingGroundTruth);
ZOOMDET_DEFINE_ERROR(ProtocolError);
ZOOMDET_DEFINE_ERROR(DegenerateCrop);
ZOOMDET_DEFINE_ERROR(KindError);
ZOOMDET_DEFINE_ERROR(ImageError);

#undef ZOOMDET_DEFINE_ERROR

// A foreground or background file that could not be read or decoded.
class AssetError : public Error {
 public:
  AssetError(std::string path, const std::string& what)
      : Error("asset '" + path + "': " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// The remote detector could not produce a result; `cause()` keeps the
// underlying reason (connect failure, timeout, server-side error text).
class DetectorUnavailable : public Error {
 public:
  explicit DetectorUnavailable(std::string cause)
      : Error("detector unavailable: " + cause), cause_(std::move(cause)) {}
  const std::string& cause() const noexcept { return cause_; }

 private:
  std::string cause_;
};

}  // namespace zoomdet
