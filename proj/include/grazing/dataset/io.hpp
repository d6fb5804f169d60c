#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/synth.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/io/binary.hpp"

namespace grazing {

inline constexpr char kSampleMagic[] = "GRZ1";
inline constexpr std::uint16_t kSampleFormatVersion = 1;
inline constexpr int kManifestVersion = 1;
inline constexpr char kManifestFile[] = "manifest.json";

// ---------------------------------------------------------------------------
// Per-sample binary file
//   "GRZ1" | u16 version | u32 T, H, W, C | T*H*W*C f32 | H*W u8 polygon mask
//   | T u16 day-of-year | T*H*W u8 cloud mask | u32 CRC32 of all preceding bytes
// ---------------------------------------------------------------------------

inline std::vector<std::uint8_t> encode_sample(const SampleTimeSeries& s) {
  validate_sample(s);
  const std::size_t t = s.frames.size(), hw = s.pixel_count();
  ByteWriter w;
  w.reserve(22 + t * hw * s.channels * 4 + hw + t * 2 + t * hw + 4);
  w.bytes(std::string_view(kSampleMagic, 4));
  w.u16(kSampleFormatVersion);
  w.u32(static_cast<std::uint32_t>(t));
  w.u32(static_cast<std::uint32_t>(s.height));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.channels));
  for (const auto& f : s.frames)
    for (float v : f.reflectance) w.f32(v);
  for (auto m : s.polygon_mask.data) w.le<std::uint8_t>(m ? 1 : 0);
  for (const auto& f : s.frames) w.u16(static_cast<std::uint16_t>(f.day_of_year));
  for (const auto& f : s.frames)
    for (auto c : f.cloud_mask.data) w.le<std::uint8_t>(c ? 1 : 0);
  w.seal();
  return w.buffer();
}

/// Decodes geometry, reflectance and masks. Identity fields (label, year,
/// polygon vertices) live in the manifest and are filled in by the caller.
inline SampleTimeSeries decode_sample(std::span<const std::uint8_t> bytes, const std::string& what) {
  ByteReader r(bytes, what);
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSampleMagic, 4) != 0)
    throw FormatError(what + ": bad magic (expected GRZ1)");
  r.verify_seal();
  r.take(4);
  const auto version = r.u16();
  if (version != kSampleFormatVersion)
    throw FormatError(what + ": unsupported format version " + std::to_string(version));
  SampleTimeSeries s;
  const std::size_t t = r.u32();
  s.height = r.u32();
  s.width = r.u32();
  s.channels = r.u32();
  const std::size_t hw = s.height * s.width;
  const std::size_t expected = t * hw * s.channels * 4 + hw + 2 * t + t * hw;
  if (r.remaining() != expected)
    throw FormatError(what + ": payload is " + std::to_string(r.remaining()) + " bytes, header implies " +
                      std::to_string(expected));
  s.frames.resize(t);
  for (auto& f : s.frames) {
    f.reflectance.resize(hw * s.channels);
    for (auto& v : f.reflectance) v = r.f32();
  }
  s.polygon_mask = Mask(s.height, s.width);
  auto mask = r.take(hw);
  for (std::size_t i = 0; i < hw; ++i) s.polygon_mask.data[i] = mask[i] ? 1 : 0;
  for (auto& f : s.frames) f.day_of_year = r.u16();
  for (auto& f : s.frames) {
    f.cloud_mask = Mask(s.height, s.width);
    auto cm = r.take(hw);
    for (std::size_t i = 0; i < hw; ++i) f.cloud_mask.data[i] = cm[i] ? 1 : 0;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string site_id;
  Label label = Label::no_activity;
  int year = 2024;
  std::string path;
  std::size_t frames = 0;
  int cluster = 0;
  std::optional<GeoLocation> location;
  std::vector<Point> polygon;
  std::uint32_t crc32 = 0;
};

struct DatasetManifest {
  int version = kManifestVersion;
  nlohmann::json generator_config;  // null for non-synthetic data
  std::optional<std::uint64_t> seed;
  std::vector<ManifestEntry> samples;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SampleTimeSeries> samples;  // same order as manifest.samples
};

inline nlohmann::json to_json(const SynthConfig& c) {
  return {{"samples", c.samples},
          {"grazing_fraction", c.grazing_fraction},
          {"height", c.height},
          {"width", c.width},
          {"cadence_days", c.cadence_days},
          {"cadence_jitter", c.cadence_jitter},
          {"cloud_probability", c.cloud_probability},
          {"noise", c.noise},
          {"difficulty", c.difficulty},
          {"year_2022_fraction", c.year_2022_fraction},
          {"sites_per_cluster", c.sites_per_cluster}};
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.samples = j.value("samples", c.samples);
  c.grazing_fraction = j.value("grazing_fraction", c.grazing_fraction);
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.cadence_days = j.value("cadence_days", c.cadence_days);
  c.cadence_jitter = j.value("cadence_jitter", c.cadence_jitter);
  c.cloud_probability = j.value("cloud_probability", c.cloud_probability);
  c.noise = j.value("noise", c.noise);
  c.difficulty = j.value("difficulty", c.difficulty);
  c.year_2022_fraction = j.value("year_2022_fraction", c.year_2022_fraction);
  c.sites_per_cluster = j.value("sites_per_cluster", c.sites_per_cluster);
  return c;
}

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& e : m.samples) {
    nlohmann::json j{{"site_id", e.site_id}, {"label", to_int(e.label)}, {"year", e.year},
                     {"path", e.path},       {"frames", e.frames},        {"cluster", e.cluster},
                     {"crc32", e.crc32}};
    if (e.location) j["location"] = {e.location->lat, e.location->lon};
    if (!e.polygon.empty()) {
      nlohmann::json verts = nlohmann::json::array();
      for (const auto& p : e.polygon) verts.push_back({p.x, p.y});
      j["polygon"] = std::move(verts);
    }
    samples.push_back(std::move(j));
  }
  nlohmann::json out{{"version", m.version}, {"generator_config", m.generator_config}, {"samples", samples}};
  out["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  return out;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      throw FormatError("manifest: unsupported version " + std::to_string(m.version));
    m.generator_config = j.value("generator_config", nlohmann::json(nullptr));
    if (j.contains("seed") && !j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
    std::set<std::string> seen;
    for (const auto& s : j.at("samples")) {
      ManifestEntry e;
      e.site_id = s.at("site_id").get<std::string>();
      if (!seen.insert(e.site_id).second) throw FormatError("manifest: duplicate site_id '" + e.site_id + "'");
      const int label = s.at("label").get<int>();
      if (label != 0 && label != 1) throw FormatError("manifest: label must be 0 or 1");
      e.label = static_cast<Label>(label);
      e.year = s.at("year").get<int>();
      e.path = s.at("path").get<std::string>();
      e.frames = s.at("frames").get<std::size_t>();
      e.cluster = s.value("cluster", static_cast<int>(m.samples.size()));
      e.crc32 = s.value("crc32", std::uint32_t{0});
      if (s.contains("location")) e.location = GeoLocation{s["location"][0].get<double>(), s["location"][1].get<double>()};
      if (s.contains("polygon"))
        for (const auto& v : s["polygon"]) e.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
      m.samples.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
  return m;
}

inline ManifestEntry manifest_entry_for(const SampleTimeSeries& s) {
  ManifestEntry e;
  e.site_id = s.site_id;
  e.label = s.label;
  e.year = s.year;
  e.path = s.site_id + ".grz";
  e.frames = s.frames.size();
  e.cluster = s.cluster;
  e.location = s.polygon.location;
  e.polygon = s.polygon.vertices;
  return e;
}

/// Writes one sample file and returns its manifest entry.
inline ManifestEntry save_sample(const SampleTimeSeries& s, const std::filesystem::path& dir) {
  ManifestEntry e = manifest_entry_for(s);
  const auto bytes = encode_sample(s);
  write_file_bytes(dir / e.path, bytes);
  e.crc32 = crc32_of(std::span<const std::uint8_t>(bytes).first(bytes.size() - 4));
  return e;
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& dir) {
  std::ofstream out(dir / kManifestFile, std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / kManifestFile).string());
  out << to_json(m).dump(2) << '\n';
}

inline void save_dataset(DatasetManifest manifest, std::span<const SampleTimeSeries> samples,
                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  manifest.samples.clear();
  for (const auto& s : samples) manifest.samples.push_back(save_sample(s, dir));
  save_manifest(manifest, dir);
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw IoError("cannot open " + (dir / kManifestFile).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
  return manifest_from_json(j);
}

inline SampleTimeSeries load_sample(const std::filesystem::path& dir, const ManifestEntry& e) {
  const auto path = dir / e.path;
  auto s = decode_sample(read_file_bytes(path), path.string());
  if (s.frames.size() != e.frames)
    throw FormatError(path.string() + ": header has " + std::to_string(s.frames.size()) +
                      " frames, manifest says " + std::to_string(e.frames));
  s.site_id = e.site_id;
  s.label = e.label;
  s.year = e.year;
  s.cluster = e.cluster;
  s.polygon.site_id = e.site_id;
  s.polygon.vertices = e.polygon;
  s.polygon.location = e.location;
  validate_sample(s);
  return s;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d{load_manifest(dir), {}};
  d.samples.reserve(d.manifest.samples.size());
  for (const auto& e : d.manifest.samples) d.samples.push_back(load_sample(dir, e));
  return d;
}

}  // namespace grazing
