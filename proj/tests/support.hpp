#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "grazing/dataset/types.hpp"
#include "grazing/numerics/random.hpp"

namespace grazing::test {

/// A sample with `frames` acquisitions 10 days apart, uniform random
/// reflectance and a centered square polygon of side `poly_side`.
inline SampleTimeSeries make_sample(std::size_t frames, std::uint64_t seed, std::size_t side = 45,
                                    std::size_t channels = kBandCount, std::size_t poly_side = 15) {
  SampleTimeSeries s;
  s.site_id = "t" + std::to_string(seed);
  s.height = s.width = side;
  s.channels = channels;
  s.polygon_mask = Mask(side, side);
  const std::size_t lo = (side - poly_side) / 2;
  for (std::size_t r = lo; r < lo + poly_side; ++r)
    for (std::size_t c = lo; c < lo + poly_side; ++c) s.polygon_mask.at(r, c) = 1;
  Rng rng = make_rng(seed, {0x7E57});
  for (std::size_t t = 0; t < frames; ++t) {
    ImageFrame f;
    f.day_of_year = kSeasonFirstDay + static_cast<int>(10 * t);
    f.reflectance.resize(side * side * channels);
    for (auto& v : f.reflectance) v = static_cast<float>(uniform(rng, 0.0, 0.5));
    f.cloud_mask = Mask(side, side);
    s.frames.push_back(std::move(f));
  }
  return s;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("grazing-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace grazing::test
