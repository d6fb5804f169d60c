#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "grazing/dataset/types.hpp"
#include "grazing/io/binary.hpp"
#include "grazing/model/config.hpp"
#include "grazing/model/network.hpp"
#include "grazing/model/params.hpp"

namespace grazing {

inline constexpr char kCheckpointMagic[] = "GRZM";
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// A trained ensemble plus the normalization statistics it was trained with.
struct Checkpoint {
  EnsembleParams ensemble;
  ChannelStats stats;
  nlohmann::json metadata = nlohmann::json::object();
};

// Layout: "GRZM" | u16 version | u32 header length | JSON header |
//         per member: u64 seed, tensors in declaration order as f64 | u32 CRC32.
inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  const auto& ens = ckpt.ensemble;
  ens.config.validate();
  nlohmann::json header{{"config", to_json(ens.config)},
                        {"members", ens.members.size()},
                        {"stats", {{"mean", ckpt.stats.mean}, {"std", ckpt.stats.std}}},
                        {"metadata", ckpt.metadata}};
  nlohmann::json layout = nlohmann::json::array();
  const auto reference = zero_params(ens.config);
  for (auto& [name, t] : reference.tensors()) layout.push_back({{"name", name}, {"shape", t->shape()}});
  header["tensors"] = std::move(layout);
  const std::string text = header.dump();

  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  for (const auto& m : ens.members) {
    check_params(m, ens.config);
    w.u64(m.seed);
    for (auto& [name, t] : m.tensors())
      for (double v : t->values()) w.f64(v);
  }
  w.seal();
  return w.buffer();
}

inline Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    throw FormatError(what + ": bad magic (expected GRZM)");
  ByteReader r(bytes, what);
  r.verify_seal();
  r.take(4);
  const auto version = r.u16();
  if (version != kCheckpointVersion) throw FormatError(what + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = r.u32();
  const auto text = r.take(len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(what + ": unreadable header: " + ex.what());
  }

  Checkpoint ckpt;
  ckpt.ensemble.config = model_config_from_json(header.at("config"));
  ckpt.stats.mean = header.at("stats").at("mean").get<Vector>();
  ckpt.stats.std = header.at("stats").at("std").get<Vector>();
  ckpt.metadata = header.value("metadata", nlohmann::json::object());

  // Shapes recorded in the header must match what the config implies.
  const auto reference = zero_params(ckpt.ensemble.config);
  const auto ref_tensors = reference.tensors();
  const auto& layout = header.at("tensors");
  if (layout.size() != ref_tensors.size()) throw FormatError(what + ": tensor layout does not match config");
  for (std::size_t i = 0; i < ref_tensors.size(); ++i) {
    if (layout[i].at("name").get<std::string>() != ref_tensors[i].first ||
        layout[i].at("shape").get<Shape>() != ref_tensors[i].second->shape())
      throw FormatError(what + ": tensor '" + std::string(ref_tensors[i].first) + "' shape does not match config");
  }

  const auto members = header.at("members").get<std::size_t>();
  for (std::size_t k = 0; k < members; ++k) {
    ModelParams p = zero_params(ckpt.ensemble.config);
    p.seed = r.u64();
    for (auto& [name, t] : p.tensors())
      for (double& v : t->values()) v = r.f64();
    ckpt.ensemble.members.push_back(std::move(p));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after last member");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path), path.string());
}

/// Rejects a checkpoint whose input layout cannot consume the given sample.
inline void check_compatible(const Checkpoint& ckpt, const SampleTimeSeries& sample) {
  const auto& c = ckpt.ensemble.config;
  if (sample.channels != ckpt.stats.mean.size())
    throw ConfigError("checkpoint statistics cover " + std::to_string(ckpt.stats.mean.size()) +
                      " bands but the dataset has " + std::to_string(sample.channels));
  if (sample.height != c.chip_height || sample.width != c.chip_width)
    throw ConfigError("checkpoint expects " + std::to_string(c.chip_height) + "x" + std::to_string(c.chip_width) +
                      " chips");
  for (auto b : c.band_subset)
    if (b >= sample.channels) throw ConfigError("checkpoint band " + std::to_string(b) + " missing from dataset");
}

}  // namespace grazing
