#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/io.hpp"
#include "grazing/dataset/preprocess.hpp"
#include "grazing/dataset/split.hpp"
#include "grazing/evaluation/evaluate.hpp"
#include "grazing/evaluation/metrics.hpp"
#include "grazing/training/trainer.hpp"

namespace grazing {

/// Samples after cloud filtering and tiny-polygon rejection.
struct PreparedDataset {
  DatasetManifest manifest;
  std::vector<SampleTimeSeries> samples;
  std::vector<std::string> rejected;  // site ids that did not survive preprocessing
};

/// Loads each sample and preprocesses it immediately, so raw frames are never
/// all resident at once.
inline PreparedDataset load_prepared(const std::filesystem::path& dir, double cloud_threshold = kCloudThreshold) {
  PreparedDataset d{load_manifest(dir), {}, {}};
  for (const auto& e : d.manifest.samples) {
    auto s = preprocess_sample(load_sample(dir, e), cloud_threshold);
    if (s) d.samples.push_back(std::move(*s));
    else d.rejected.push_back(e.site_id);
  }
  return d;
}

inline PreparedDataset prepare_in_memory(DatasetManifest manifest, std::span<const SampleTimeSeries> raw,
                                         double cloud_threshold = kCloudThreshold) {
  PreparedDataset d{std::move(manifest), {}, {}};
  for (const auto& r : raw) {
    auto s = preprocess_sample(r, cloud_threshold);
    if (s) d.samples.push_back(std::move(*s));
    else d.rejected.push_back(r.site_id);
  }
  return d;
}

/// The prepared samples whose ids are listed, in list order; unknown or rejected ids are skipped.
inline std::vector<SampleTimeSeries> select_samples(const PreparedDataset& d, std::span<const std::string> ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < d.samples.size(); ++i) index[d.samples[i].site_id] = i;
  std::vector<SampleTimeSeries> out;
  for (const auto& id : ids)
    if (auto it = index.find(id); it != index.end()) out.push_back(d.samples[it->second]);
  return out;
}

struct SplitOutcome {
  TrainValSplit split;
  ChannelStats stats;
  EnsembleParams ensemble;
  EvaluationResult evaluation;
  std::vector<TrainLog> logs;
};

/// Trains on the split's train ids and evaluates on its val ids.
inline SplitOutcome run_split(const PreparedDataset& data, const TrainValSplit& split, const ModelConfig& model,
                              const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  const auto train = select_samples(data, split.train);
  const auto val = select_samples(data, split.val);
  if (train.empty()) throw DataError("split has no usable training samples");
  if (val.empty()) throw DataError("split has no usable validation samples");
  SplitOutcome out{split, compute_channel_stats(train), {}, {}, {}};
  auto trained = train_ensemble(train, out.stats, model, cfg, on_epoch);
  out.ensemble = std::move(trained.ensemble);
  out.logs = std::move(trained.logs);
  out.evaluation = evaluate_ensemble(val, out.stats, out.ensemble, cfg.threads);
  return out;
}

struct CrossValidationResult {
  std::vector<MetricsReport> splits;
  std::vector<double> mean_member_f1;
  AggregateReport aggregate;
};

inline std::uint64_t fold_split_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, {0xF01DULL, fold}); }

/// Independent random train/val splits; each trains a fresh ensemble.
inline CrossValidationResult cross_validate(const PreparedDataset& data, const ModelConfig& model,
                                            const TrainConfig& cfg, std::size_t folds = 5,
                                            double train_fraction = 0.8, const EpochCallback& on_epoch = {}) {
  if (folds < 1) throw ConfigError("cross_validate: need at least one fold");
  CrossValidationResult r;
  for (std::size_t k = 0; k < folds; ++k) {
    const auto split = split_train_val(data.manifest, train_fraction, fold_split_seed(cfg.base_seed, k));
    TrainConfig fold_cfg = cfg;
    fold_cfg.base_seed = derive_seed(cfg.base_seed, {0xF01DULL, k, 1});
    const auto outcome = run_split(data, split, model, fold_cfg, on_epoch);
    r.splits.push_back(outcome.evaluation.report);
    r.mean_member_f1.push_back(mean_member_f1(outcome.evaluation));
  }
  r.aggregate = aggregate(r.splits);
  return r;
}

}  // namespace grazing
