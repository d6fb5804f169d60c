#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "grazing/numerics/tensor.hpp"

namespace grazing {

/// Sentinel-2 L2A band order used for every 13-channel chip.
inline constexpr std::size_t kBandCount = 13;
inline constexpr const char* kBandNames[kBandCount] = {"B01", "B02", "B03", "B04", "B05", "B06", "B07",
                                                       "B08", "B8A", "B09", "B10", "B11", "B12"};

inline constexpr int kSeasonFirstDay = 91;   // April 1
inline constexpr int kSeasonLastDay = 304;   // October 31
inline constexpr std::size_t kMinPolygonPixels = 9;

enum class Label : int { no_activity = 0, grazing = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }
inline const char* label_name(Label l) { return l == Label::grazing ? "grazing" : "no_activity"; }

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  double x = 0.0;  // column axis
  double y = 0.0;  // row axis
  friend bool operator==(const Point&, const Point&) = default;
};

struct GeoLocation {
  double lat = 0.0;
  double lon = 0.0;
  friend bool operator==(const GeoLocation&, const GeoLocation&) = default;
};

/// Field boundary in pixel coordinates of the chip. Pixel (row i, col j)
/// covers [j, j+1) x [i, i+1), so its center is (j + 0.5, i + 0.5).
struct FieldPolygon {
  std::vector<Point> vertices;
  std::string site_id;
  std::optional<GeoLocation> location;
  friend bool operator==(const FieldPolygon&, const FieldPolygon&) = default;
};

/// Row-major binary raster.
struct Mask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), data(h * w, fill) {}

  std::uint8_t& at(std::size_t row, std::size_t col) { return data[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return data[row * width + col]; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : data) n += v != 0;
    return n;
  }

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// One acquisition. Reflectance is H x W x C row-major, held in single
/// precision because that is what the on-disk format carries.
struct ImageFrame {
  int day_of_year = kSeasonFirstDay;
  std::vector<float> reflectance;
  Mask cloud_mask;
  friend bool operator==(const ImageFrame&, const ImageFrame&) = default;
};

struct SampleTimeSeries {
  std::string site_id;
  std::size_t height = 45;
  std::size_t width = 45;
  std::size_t channels = kBandCount;
  std::vector<ImageFrame> frames;
  FieldPolygon polygon;
  Mask polygon_mask;
  Label label = Label::no_activity;
  int year = 2024;
  int cluster = 0;

  std::size_t frame_count() const { return frames.size(); }
  std::size_t pixel_count() const { return height * width; }

  float value(std::size_t t, std::size_t row, std::size_t col, std::size_t c) const {
    return frames[t].reflectance[(row * width + col) * channels + c];
  }

  friend bool operator==(const SampleTimeSeries&, const SampleTimeSeries&) = default;
};

/// Structural checks shared by loaders and generators.
inline void validate_sample(const SampleTimeSeries& s) {
  const std::string who = "sample '" + s.site_id + "': ";
  if (s.height == 0 || s.width == 0 || s.channels == 0) throw DataError(who + "empty chip geometry");
  if (s.polygon_mask.height != s.height || s.polygon_mask.width != s.width)
    throw DataError(who + "polygon mask dimensions do not match chip");
  int prev_day = -1;
  for (const auto& f : s.frames) {
    if (f.reflectance.size() != s.pixel_count() * s.channels)
      throw DataError(who + "frame reflectance size mismatch");
    if (f.cloud_mask.height != s.height || f.cloud_mask.width != s.width)
      throw DataError(who + "cloud mask dimensions do not match chip");
    if (f.day_of_year <= prev_day) throw DataError(who + "frames not strictly increasing in day of year");
    if (f.day_of_year < kSeasonFirstDay || f.day_of_year > kSeasonLastDay)
      throw DataError(who + "day of year " + std::to_string(f.day_of_year) + " outside April-October");
    prev_day = f.day_of_year;
  }
}

struct ChannelStats {
  Vector mean;
  Vector std;
  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

}  // namespace grazing
