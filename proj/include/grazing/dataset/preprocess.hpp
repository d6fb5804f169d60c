#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "grazing/dataset/polygon.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/numerics/tensor.hpp"

namespace grazing {

inline constexpr double kCloudThreshold = 0.01;
inline constexpr double kStdFloor = 1e-6;

struct CloudFilterResult {
  SampleTimeSeries sample;
  std::size_t removed = 0;
  bool valid = true;  // false when every frame was removed
};

/// Fraction of in-polygon pixels flagged cloudy in one frame.
inline double cloudy_fraction(const ImageFrame& frame, const Mask& polygon_mask) {
  std::size_t inside = 0, cloudy = 0;
  for (std::size_t i = 0; i < polygon_mask.data.size(); ++i) {
    if (!polygon_mask.data[i]) continue;
    ++inside;
    cloudy += frame.cloud_mask.data[i] != 0;
  }
  return inside == 0 ? 0.0 : static_cast<double>(cloudy) / static_cast<double>(inside);
}

/// Drops every frame whose in-polygon cloud fraction is at least `threshold`.
inline CloudFilterResult filter_cloudy_frames(const SampleTimeSeries& sample, double threshold = kCloudThreshold) {
  CloudFilterResult r{sample, 0, true};
  r.sample.frames.clear();
  for (const auto& f : sample.frames) {
    if (cloudy_fraction(f, sample.polygon_mask) >= threshold)
      ++r.removed;
    else
      r.sample.frames.push_back(f);
  }
  r.valid = !r.sample.frames.empty();
  return r;
}

/// Area rule: fewer than 3x3 = 9 rasterized pixels is too small to assess.
inline bool reject_tiny_polygon(const Mask& mask) { return mask.count() < kMinPolygonPixels; }

/// Rasterize (when vertices are present), cloud-filter, then tiny-reject.
/// Returns nothing when the sample must be dropped.
inline std::optional<SampleTimeSeries> preprocess_sample(SampleTimeSeries sample,
                                                         double cloud_threshold = kCloudThreshold) {
  if (!sample.polygon.vertices.empty())
    sample.polygon_mask = rasterize_polygon(sample.polygon, sample.height, sample.width);
  auto filtered = filter_cloudy_frames(sample, cloud_threshold);
  if (!filtered.valid) return std::nullopt;
  if (reject_tiny_polygon(filtered.sample.polygon_mask)) return std::nullopt;
  return std::move(filtered.sample);
}

/// Per-channel population mean/std over every in-polygon pixel of every frame.
inline ChannelStats compute_channel_stats(std::span<const SampleTimeSeries> samples) {
  if (samples.empty()) throw DataError("compute_channel_stats: no samples");
  const std::size_t channels = samples.front().channels;
  Vector sum(channels, 0.0);
  std::size_t count = 0;
  for (const auto& s : samples) {
    if (s.channels != channels) throw DataError("compute_channel_stats: inconsistent channel counts");
    for (const auto& f : s.frames) {
      for (std::size_t p = 0; p < s.pixel_count(); ++p) {
        if (!s.polygon_mask.data[p]) continue;
        ++count;
        for (std::size_t c = 0; c < channels; ++c) sum[c] += f.reflectance[p * channels + c];
      }
    }
  }
  if (count == 0) throw DataError("compute_channel_stats: no in-polygon pixels");
  ChannelStats st{Vector(channels), Vector(channels, 0.0)};
  for (std::size_t c = 0; c < channels; ++c) st.mean[c] = sum[c] / static_cast<double>(count);
  for (const auto& s : samples) {
    for (const auto& f : s.frames) {
      for (std::size_t p = 0; p < s.pixel_count(); ++p) {
        if (!s.polygon_mask.data[p]) continue;
        for (std::size_t c = 0; c < channels; ++c) {
          const double d = f.reflectance[p * channels + c] - st.mean[c];
          st.std[c] += d * d;
        }
      }
    }
  }
  for (std::size_t c = 0; c < channels; ++c)
    st.std[c] = std::max(kStdFloor, std::sqrt(st.std[c] / static_cast<double>(count)));
  return st;
}

enum class MaskPolicy {
  zero_outside,          // out-of-polygon pixels set to 0 after normalization
  keep_all,              // full chip, no polygon information
  append_mask_channel,   // full chip plus the polygon mask as an extra channel
};

/// Normalizes the selected bands of every frame into H x W x C' tensors.
inline std::vector<Tensor> normalize_frames(const SampleTimeSeries& sample, const ChannelStats& stats,
                                            std::span<const std::size_t> bands, MaskPolicy policy) {
  if (stats.mean.size() != sample.channels || stats.std.size() != sample.channels)
    throw DataError("normalize: statistics cover " + std::to_string(stats.mean.size()) + " channels, sample has " +
                    std::to_string(sample.channels));
  for (auto b : bands)
    if (b >= sample.channels) throw DataError("normalize: band index " + std::to_string(b) + " out of range");
  const std::size_t out_c = bands.size() + (policy == MaskPolicy::append_mask_channel ? 1 : 0);
  std::vector<Tensor> out;
  out.reserve(sample.frames.size());
  for (const auto& f : sample.frames) {
    Tensor t({sample.height, sample.width, out_c});
    double* dst = t.data();
    for (std::size_t p = 0; p < sample.pixel_count(); ++p, dst += out_c) {
      const bool inside = sample.polygon_mask.data[p] != 0;
      if (policy == MaskPolicy::zero_outside && !inside) continue;
      const float* src = f.reflectance.data() + p * sample.channels;
      for (std::size_t k = 0; k < bands.size(); ++k) {
        const std::size_t b = bands[k];
        dst[k] = (static_cast<double>(src[b]) - stats.mean[b]) / stats.std[b];
      }
      if (policy == MaskPolicy::append_mask_channel) dst[bands.size()] = inside ? 1.0 : 0.0;
    }
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<std::size_t> all_bands(std::size_t channels = kBandCount) {
  std::vector<std::size_t> b(channels);
  for (std::size_t i = 0; i < channels; ++i) b[i] = i;
  return b;
}

/// In-polygon pixels become (v - mean) / std per channel; everything else is 0.
inline std::vector<Tensor> normalize_and_mask(const SampleTimeSeries& sample, const ChannelStats& stats) {
  const auto bands = all_bands(sample.channels);
  return normalize_frames(sample, stats, bands, MaskPolicy::zero_outside);
}

}  // namespace grazing
