#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "grazing/dataset/polygon.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/numerics/random.hpp"

namespace grazing {

// Synthetic stand-in for labeled pasture time series. A single vegetation
// index drives all 13 bands through a linear spectral mix; grazing shows up
// as abrupt index drops followed by multi-week recovery.

struct SynthConfig {
  std::size_t samples = 407;
  double grazing_fraction = 253.0 / 407.0;
  std::size_t height = 45;
  std::size_t width = 45;
  int cadence_days = 5;
  int cadence_jitter = 2;
  double cloud_probability = 0.3;
  double noise = 0.02;
  double difficulty = 0.5;   // 0 = trivially separable, 1 = hardest
  double year_2022_fraction = 108.0 / 407.0;
  std::size_t sites_per_cluster = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw DataError("invalid synth config: " + m); };
    if (samples == 0) fail("sample count must be positive");
    if (!(grazing_fraction >= 0.0 && grazing_fraction <= 1.0)) fail("grazing fraction must lie in [0, 1]");
    if (height < 5 || width < 5) fail("chip must be at least 5x5");
    if (cadence_days < 1) fail("cadence must be at least one day");
    if (cadence_jitter < 0 || cadence_jitter >= cadence_days) fail("jitter must lie in [0, cadence)");
    if (!(cloud_probability >= 0.0 && cloud_probability <= 1.0)) fail("cloud probability must lie in [0, 1]");
    if (!(noise >= 0.0) || !std::isfinite(noise)) fail("noise must be non-negative");
    if (!(difficulty >= 0.0 && difficulty <= 1.0)) fail("difficulty must lie in [0, 1]");
    if (!(year_2022_fraction >= 0.0 && year_2022_fraction <= 1.0)) fail("year fraction must lie in [0, 1]");
    if (sites_per_cluster == 0) fail("sites per cluster must be positive");
  }

  std::size_t grazing_count() const {
    return static_cast<std::size_t>(std::llround(grazing_fraction * static_cast<double>(samples)));
  }
};

struct PhenologyParams {
  double base = 0.2;        // dormant-season index
  double amplitude = 0.55;  // green-up height above base
  double green_up_day = 130;
  double senescence_day = 265;
  double green_up_rate = 0.09;
  double senescence_rate = 0.06;
};

struct IndexDip {
  double day = 0;        // onset
  double trough = 0;     // index level reached (absolute) or fraction (relative)
  double hold_days = 0;  // days spent at the trough
  double recovery_days = 0;
  bool relative = false; // trough as a fraction of the undisturbed index
};

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double phenology_index(const PhenologyParams& p, double day) {
  const double rise = logistic(p.green_up_rate * (day - p.green_up_day));
  const double fall = logistic(p.senescence_rate * (day - p.senescence_day));
  return p.base + p.amplitude * std::max(0.0, rise - fall);
}

/// Undisturbed curve with every dip applied; overlapping dips take the minimum.
inline double disturbed_index(const PhenologyParams& p, std::span<const IndexDip> dips, double day) {
  const double clean = phenology_index(p, day);
  double v = clean;
  for (const auto& dip : dips) {
    const double trough = dip.relative ? clean * dip.trough : dip.trough;
    const double since = day - dip.day;
    if (since < 0) continue;
    double level = clean;
    if (since <= dip.hold_days) {
      level = trough;
    } else if (since <= dip.hold_days + dip.recovery_days) {
      level = trough + (clean - trough) * (since - dip.hold_days) / dip.recovery_days;
    }
    v = std::min(v, level);
  }
  return v;
}

struct BandLoading {
  double offset;
  double slope;
};

// NIR and red-edge load positively on the index, visible red negatively.
inline constexpr std::array<BandLoading, kBandCount> kBandLoadings{{
    {0.08, -0.02},  // B01 aerosol
    {0.10, -0.06},  // B02 blue
    {0.10, -0.02},  // B03 green
    {0.14, -0.12},  // B04 red
    {0.13, 0.05},   // B05 red edge 1
    {0.12, 0.25},   // B06 red edge 2
    {0.12, 0.32},   // B07 red edge 3
    {0.12, 0.38},   // B08 NIR
    {0.12, 0.36},   // B8A narrow NIR
    {0.05, 0.10},   // B09 water vapour
    {0.01, 0.00},   // B10 cirrus
    {0.30, -0.12},  // B11 SWIR 1
    {0.25, -0.15},  // B12 SWIR 2
}};

struct SiteTruth {
  PhenologyParams phenology;
  std::vector<IndexDip> dips;          // grazing events, or natural dips for ungrazed sites
  std::vector<double> mean_index;      // in-polygon mean index per generated frame
};

struct SyntheticSite {
  SampleTimeSeries sample;
  SiteTruth truth;
};

inline std::string synth_site_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return "site-" + digits;
}

/// Phenology is drawn from its own stream so grazed and ungrazed variants can
/// share a curve.
inline PhenologyParams draw_phenology(Rng& rng) {
  PhenologyParams p;
  p.base = uniform(rng, 0.15, 0.25);
  p.amplitude = uniform(rng, 0.45, 0.65);
  p.green_up_day = uniform(rng, 115, 145);
  p.senescence_day = uniform(rng, 245, 285);
  p.green_up_rate = uniform(rng, 0.06, 0.12);
  p.senescence_rate = uniform(rng, 0.04, 0.08);
  return p;
}

/// 1 + Poisson(2) abrupt drops to a low absolute level. The hold spans the
/// longest possible gap between acquisitions, so a cloud-free series always
/// observes the trough.
inline std::vector<IndexDip> draw_grazing_events(Rng& rng, const SynthConfig& cfg, const PhenologyParams& p) {
  std::poisson_distribution<int> extra(2.0);
  const int n = 1 + extra(rng);
  std::vector<IndexDip> dips;
  for (int k = 0; k < n; ++k) {
    IndexDip d;
    d.day = uniform(rng, p.green_up_day, p.senescence_day - 20.0);
    d.trough = uniform(rng, 0.02, 0.10) + 0.2 * cfg.difficulty;
    d.hold_days = cfg.cadence_days + cfg.cadence_jitter + 1;
    d.recovery_days = uniform(rng, 14.0, 42.0);
    dips.push_back(d);
  }
  return dips;
}

/// Ungrazed distractors: shallow relative dips whose depth grows with difficulty.
inline std::vector<IndexDip> draw_natural_dips(Rng& rng, const SynthConfig& cfg, const PhenologyParams& p) {
  std::vector<IndexDip> dips;
  if (cfg.difficulty <= 0.0) return dips;
  const int n = bernoulli(rng, 0.6) ? 1 : 0;
  for (int k = 0; k < n; ++k) {
    IndexDip d;
    d.relative = true;
    d.day = uniform(rng, p.green_up_day, p.senescence_day - 20.0);
    d.trough = 1.0 - 0.5 * cfg.difficulty * uniform(rng, 0.5, 1.0);
    d.hold_days = uniform(rng, 3.0, 10.0);
    d.recovery_days = uniform(rng, 14.0, 42.0);
    dips.push_back(d);
  }
  return dips;
}

/// Star-shaped ring around a random center; angles are sorted so the ring is simple.
inline FieldPolygon draw_polygon(Rng& rng, std::size_t height, std::size_t width, const std::string& site_id) {
  const double limit = static_cast<double>(std::min(height, width));
  for (int attempt = 0;; ++attempt) {
    const double radius = uniform(rng, 3.0, std::max(3.5, limit / 3.6)) + attempt * 0.5;
    const double cx = uniform(rng, radius, static_cast<double>(width) - radius);
    const double cy = uniform(rng, radius, static_cast<double>(height) - radius);
    const int n = std::uniform_int_distribution<int>(5, 10)(rng);
    std::vector<double> angles(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) angles[static_cast<std::size_t>(k)] = (k + uniform(rng, 0.1, 0.9)) * 2.0 * M_PI / n;
    FieldPolygon poly;
    poly.site_id = site_id;
    for (double a : angles) {
      const double r = radius * uniform(rng, 0.65, 1.0);
      poly.vertices.push_back({std::clamp(cx + r * std::cos(a), 0.0, static_cast<double>(width)),
                               std::clamp(cy + r * std::sin(a), 0.0, static_cast<double>(height))});
    }
    if (std::abs(signed_area(poly)) > 0.0 && is_simple(poly) &&
        rasterize_polygon(poly, height, width).count() >= kMinPolygonPixels)
      return poly;
  }
}

inline std::vector<int> draw_acquisition_days(Rng& rng, const SynthConfig& cfg) {
  std::uniform_int_distribution<int> jitter(-cfg.cadence_jitter, cfg.cadence_jitter);
  std::vector<int> days;
  int day = kSeasonFirstDay + std::uniform_int_distribution<int>(0, cfg.cadence_jitter)(rng);
  while (day <= kSeasonLastDay) {
    days.push_back(day);
    day += cfg.cadence_days + jitter(rng);
  }
  return days;
}

/// Labels are a seed-determined permutation with exactly round(n * fraction) grazing sites.
inline std::vector<Label> draw_labels(const SynthConfig& cfg, std::uint64_t seed) {
  std::vector<Label> labels(cfg.samples, Label::no_activity);
  std::fill_n(labels.begin(), cfg.grazing_count(), Label::grazing);
  Rng rng = make_rng(seed, {0xfeedULL});
  shuffle_in_place(labels, rng);
  return labels;
}

/// One site, derived purely from (config, seed, index).
inline SyntheticSite synth_site(const SynthConfig& cfg, std::uint64_t seed, std::size_t index, Label label) {
  const std::string id = synth_site_id(index);
  Rng geo = make_rng(seed, {index, 1});
  Rng pheno_rng = make_rng(seed, {index, 2});
  Rng event_rng = make_rng(seed, {index, 3});
  Rng pixel_rng = make_rng(seed, {index, 4});
  Rng cloud_rng = make_rng(seed, {index, 5});
  Rng bg_rng = make_rng(seed, {index, 6});

  SyntheticSite out;
  auto& s = out.sample;
  s.site_id = id;
  s.height = cfg.height;
  s.width = cfg.width;
  s.channels = kBandCount;
  s.label = label;
  s.year = bernoulli(geo, cfg.year_2022_fraction) ? 2022 : 2024;
  s.cluster = static_cast<int>(index / cfg.sites_per_cluster);
  s.polygon = draw_polygon(geo, cfg.height, cfg.width, id);
  s.polygon.location = GeoLocation{uniform(geo, 55.3, 68.0), uniform(geo, 11.1, 23.9)};
  s.polygon_mask = rasterize_polygon(s.polygon, cfg.height, cfg.width);

  out.truth.phenology = draw_phenology(pheno_rng);
  out.truth.dips = label == Label::grazing ? draw_grazing_events(event_rng, cfg, out.truth.phenology)
                                           : draw_natural_dips(event_rng, cfg, out.truth.phenology);

  // Surroundings: another field with its own curve, grazed half the time.
  const PhenologyParams bg_pheno = draw_phenology(bg_rng);
  const auto bg_dips = bernoulli(bg_rng, 0.5) ? draw_grazing_events(bg_rng, cfg, bg_pheno)
                                              : std::vector<IndexDip>{};
  const double brightness = uniform(bg_rng, 0.92, 1.08);

  const std::size_t pixels = s.pixel_count();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> pixel_offset(pixels);
  for (auto& o : pixel_offset) o = cfg.noise * gauss(pixel_rng);
  double inside_offset = 0.0;
  const std::size_t inside_count = s.polygon_mask.count();
  for (std::size_t p = 0; p < pixels; ++p)
    if (s.polygon_mask.data[p]) inside_offset += pixel_offset[p];
  inside_offset /= static_cast<double>(inside_count);

  const auto days = draw_acquisition_days(pheno_rng, cfg);
  for (int day : days) {
    ImageFrame f;
    f.day_of_year = day;
    f.reflectance.resize(pixels * kBandCount);
    f.cloud_mask = Mask(cfg.height, cfg.width);
    const double site_vi = disturbed_index(out.truth.phenology, out.truth.dips, day);
    const double bg_vi = disturbed_index(bg_pheno, bg_dips, day);
    out.truth.mean_index.push_back(site_vi + inside_offset);

    if (bernoulli(cloud_rng, cfg.cloud_probability)) {
      const int blobs = std::uniform_int_distribution<int>(1, 3)(cloud_rng);
      for (int b = 0; b < blobs; ++b) {
        const double cx = uniform(cloud_rng, 0.0, static_cast<double>(cfg.width));
        const double cy = uniform(cloud_rng, 0.0, static_cast<double>(cfg.height));
        const double r = uniform(cloud_rng, 2.0, 12.0);
        for (std::size_t row = 0; row < cfg.height; ++row)
          for (std::size_t col = 0; col < cfg.width; ++col) {
            const double dx = col + 0.5 - cx, dy = row + 0.5 - cy;
            if (dx * dx + dy * dy <= r * r) f.cloud_mask.at(row, col) = 1;
          }
      }
    }

    for (std::size_t p = 0; p < pixels; ++p) {
      const double vi = (s.polygon_mask.data[p] ? site_vi : bg_vi) + pixel_offset[p];
      float* px = f.reflectance.data() + p * kBandCount;
      if (f.cloud_mask.data[p]) {
        for (std::size_t b = 0; b < kBandCount; ++b) px[b] = static_cast<float>(uniform(cloud_rng, 0.6, 0.9));
        continue;
      }
      for (std::size_t b = 0; b < kBandCount; ++b) {
        double v = brightness * (kBandLoadings[b].offset + kBandLoadings[b].slope * vi);
        if (cfg.noise > 0.0) v += cfg.noise * gauss(pixel_rng);
        px[b] = static_cast<float>(std::clamp(v, 0.0, 1.5));
      }
    }
    s.frames.push_back(std::move(f));
  }
  return out;
}

struct SyntheticDataset {
  SynthConfig config;
  std::uint64_t seed = 0;
  std::vector<SyntheticSite> sites;
};

inline SyntheticDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SyntheticDataset ds{cfg, seed, {}};
  const auto labels = draw_labels(cfg, seed);
  ds.sites.reserve(cfg.samples);
  for (std::size_t i = 0; i < cfg.samples; ++i) ds.sites.push_back(synth_site(cfg, seed, i, labels[i]));
  return ds;
}

}  // namespace grazing
