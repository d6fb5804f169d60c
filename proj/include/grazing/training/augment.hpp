#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "grazing/dataset/types.hpp"
#include "grazing/numerics/random.hpp"

namespace grazing {

struct TemporalDropoutConfig {
  double series_prob = 0.5;
  double step_prob = 0.35;
  std::size_t min_keep = 4;
};

struct CropConfig {
  std::size_t min_side = 36;
  std::size_t max_side = 45;
  std::size_t max_tries = 10;
};

namespace detail {

// Applies a pixel permutation/relocation to every per-pixel array of the sample.
// `source(row, col)` returns the input pixel index for an output pixel, or -1 for padding.
template <class SourceFn>
SampleTimeSeries remap_pixels(const SampleTimeSeries& s, SourceFn source) {
  SampleTimeSeries out = s;
  const std::size_t h = s.height, w = s.width, c = s.channels;
  std::vector<long> src(h * w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t q = 0; q < w; ++q) src[r * w + q] = source(r, q);

  auto remap_mask = [&](const Mask& in, Mask& dst) {
    for (std::size_t p = 0; p < h * w; ++p) dst.data[p] = src[p] < 0 ? 0 : in.data[static_cast<std::size_t>(src[p])];
  };
  remap_mask(s.polygon_mask, out.polygon_mask);
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const auto& fi = s.frames[t];
    auto& fo = out.frames[t];
    remap_mask(fi.cloud_mask, fo.cloud_mask);
    for (std::size_t p = 0; p < h * w; ++p) {
      float* dst = fo.reflectance.data() + p * c;
      if (src[p] < 0) {
        std::fill(dst, dst + c, 0.0f);
      } else {
        const float* from = fi.reflectance.data() + static_cast<std::size_t>(src[p]) * c;
        std::copy(from, from + c, dst);
      }
    }
  }
  // Vertices no longer describe the raster; the mask is authoritative from here on.
  out.polygon.vertices.clear();
  return out;
}

}  // namespace detail

/// Mirrors the chip left-right and/or top-down; images and masks move together.
inline SampleTimeSeries flip_sample(const SampleTimeSeries& s, bool horizontal, bool vertical) {
  if (!horizontal && !vertical) return s;
  const std::size_t h = s.height, w = s.width;
  return detail::remap_pixels(s, [&](std::size_t r, std::size_t q) {
    const std::size_t sr = vertical ? h - 1 - r : r;
    const std::size_t sq = horizontal ? w - 1 - q : q;
    return static_cast<long>(sr * w + sq);
  });
}

inline SampleTimeSeries augment_flip(const SampleTimeSeries& s, Rng& rng, double prob = 0.5) {
  const bool horizontal = bernoulli(rng, prob);
  const bool vertical = bernoulli(rng, prob);
  return flip_sample(s, horizontal, vertical);
}

/// Cuts a side x side window at (top, left) and places it at the top-left
/// corner of a zero chip of the original size.
inline SampleTimeSeries crop_sample(const SampleTimeSeries& s, std::size_t side, std::size_t top, std::size_t left) {
  if (top + side > s.height || left + side > s.width) throw std::out_of_range("crop window exceeds chip");
  const std::size_t w = s.width;
  return detail::remap_pixels(s, [&](std::size_t r, std::size_t q) -> long {
    if (r >= side || q >= side) return -1;
    return static_cast<long>((r + top) * w + (q + left));
  });
}

inline std::size_t cropped_mask_count(const Mask& m, std::size_t side, std::size_t top, std::size_t left) {
  std::size_t n = 0;
  for (std::size_t r = top; r < top + side; ++r)
    for (std::size_t q = left; q < left + side; ++q) n += m.at(r, q) != 0;
  return n;
}

/// Random square crop, zero-padded back to full size. Windows keeping fewer
/// than the minimum polygon pixels are redrawn; after `max_tries` failures the
/// sample is returned uncropped.
inline SampleTimeSeries augment_crop(const SampleTimeSeries& s, Rng& rng, const CropConfig& cfg = {}) {
  const std::size_t limit = std::min({cfg.max_side, s.height, s.width});
  const std::size_t lo = std::min(cfg.min_side, limit);
  for (std::size_t attempt = 0; attempt < cfg.max_tries; ++attempt) {
    const std::size_t side = lo + uniform_index(rng, limit - lo + 1);
    const std::size_t top = uniform_index(rng, s.height - side + 1);
    const std::size_t left = uniform_index(rng, s.width - side + 1);
    if (cropped_mask_count(s.polygon_mask, side, top, left) >= kMinPolygonPixels)
      return crop_sample(s, side, top, left);
  }
  return s;
}

/// Indices of the frames that survive temporal dropout, in time order.
inline std::vector<std::size_t> temporal_dropout_keep(std::size_t frame_count, Rng& rng,
                                                      const TemporalDropoutConfig& cfg) {
  std::vector<std::size_t> keep;
  if (!bernoulli(rng, cfg.series_prob)) {
    keep.resize(frame_count);
    for (std::size_t t = 0; t < frame_count; ++t) keep[t] = t;
    return keep;
  }
  std::vector<std::uint8_t> alive(frame_count);
  std::size_t survivors = 0;
  for (std::size_t t = 0; t < frame_count; ++t) {
    alive[t] = !bernoulli(rng, cfg.step_prob);
    survivors += alive[t];
  }
  const std::size_t floor = std::min(cfg.min_keep, frame_count);
  for (std::size_t t = frame_count; t-- > 0 && survivors < floor;) {
    if (!alive[t]) {
      alive[t] = 1;
      ++survivors;
    }
  }
  for (std::size_t t = 0; t < frame_count; ++t)
    if (alive[t]) keep.push_back(t);
  return keep;
}

inline SampleTimeSeries temporal_dropout(const SampleTimeSeries& s, Rng& rng, const TemporalDropoutConfig& cfg = {}) {
  if (s.frames.empty()) throw std::invalid_argument("temporal_dropout: sample has no frames");
  const auto keep = temporal_dropout_keep(s.frames.size(), rng, cfg);
  if (keep.size() == s.frames.size()) return s;
  SampleTimeSeries out = s;
  out.frames.clear();
  out.frames.reserve(keep.size());
  for (auto t : keep) out.frames.push_back(s.frames[t]);
  return out;
}

}  // namespace grazing
