#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "grazing/dataset/io.hpp"
#include "grazing/numerics/random.hpp"

namespace grazing {

struct TrainValSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
};

/// Random train/val partition over location clusters. Target sizes follow the
/// floor rule: train gets floor(fraction * n). Whole clusters go to one side;
/// with singleton clusters the sizes are exact.
inline TrainValSplit split_train_val(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
  const std::size_t n = manifest.samples.size();
  if (n < 2) throw DataError("split_train_val: need at least two sites");
  if (!(fraction > 0.0 && fraction < 1.0)) throw DataError("split_train_val: fraction must lie in (0, 1)");

  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[manifest.samples[i].cluster].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [id, members] : clusters) order.push_back(&members);
  if (order.size() < 2) throw DataError("split_train_val: all sites share one location cluster");
  Rng rng = make_rng(seed, {0x5917ULL});
  shuffle_in_place(order, rng);

  const auto train_target = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
  const std::size_t val_target = n - train_target;
  std::vector<std::uint8_t> in_val(n, 0);
  std::size_t val_count = 0;
  for (const auto* members : order) {
    if (val_count + members->size() > val_target) continue;
    for (auto i : *members) in_val[i] = 1;
    val_count += members->size();
  }
  if (val_count == 0 || val_count == n) {
    // Clusters too coarse for the target; give validation the first cluster.
    std::fill(in_val.begin(), in_val.end(), 0);
    for (auto i : *order.front()) in_val[i] = 1;
  }

  TrainValSplit s;
  for (std::size_t i = 0; i < n; ++i)
    (in_val[i] ? s.val : s.train).push_back(manifest.samples[i].site_id);
  return s;
}

}  // namespace grazing
