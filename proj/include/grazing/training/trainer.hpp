#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/preprocess.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/model/config.hpp"
#include "grazing/model/network.hpp"
#include "grazing/model/params.hpp"
#include "grazing/numerics/adam.hpp"
#include "grazing/numerics/parallel.hpp"
#include "grazing/numerics/random.hpp"
#include "grazing/training/augment.hpp"

namespace grazing {

struct TrainConfig {
  std::size_t epochs = 300;
  std::size_t batch_size = 10;
  double learning_rate = 3e-4;
  bool flip_enabled = true;
  double flip_prob = 0.5;
  bool crop_enabled = true;
  CropConfig crop;
  bool temporal_dropout_enabled = true;
  TemporalDropoutConfig temporal_dropout;
  std::size_t member_count = 10;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid train config: " + m); };
    if (epochs < 1) fail("epochs must be at least 1");
    if (batch_size < 1) fail("batch size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning rate must be positive");
    auto prob = [&](double p, const char* what) {
      if (!(p >= 0.0 && p <= 1.0)) fail(std::string(what) + " must lie in [0, 1]");
    };
    prob(flip_prob, "flip probability");
    prob(temporal_dropout.series_prob, "temporal dropout series probability");
    prob(temporal_dropout.step_prob, "temporal dropout step probability");
    if (temporal_dropout.min_keep < 1) fail("min_keep must be at least 1");
    if (crop.min_side < 1 || crop.min_side > crop.max_side) fail("crop side range is empty");
    if (member_count < 1) fail("member count must be at least 1");
    if (threads < 1) fail("threads must be at least 1");
  }

  /// Turns every augmentation off.
  TrainConfig without_augmentation() const {
    TrainConfig c = *this;
    c.flip_enabled = c.crop_enabled = c.temporal_dropout_enabled = false;
    return c;
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"flip_enabled", c.flip_enabled},
          {"flip_prob", c.flip_prob},
          {"crop_enabled", c.crop_enabled},
          {"crop", {{"min_side", c.crop.min_side}, {"max_side", c.crop.max_side}, {"max_tries", c.crop.max_tries}}},
          {"temporal_dropout_enabled", c.temporal_dropout_enabled},
          {"temporal_dropout",
           {{"series_prob", c.temporal_dropout.series_prob},
            {"step_prob", c.temporal_dropout.step_prob},
            {"min_keep", c.temporal_dropout.min_keep}}},
          {"member_count", c.member_count},
          {"base_seed", c.base_seed},
          {"threads", c.threads}};
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double accuracy = 0.0;  // final-step prediction on the augmented training samples
  double seconds = 0.0;
};

struct TrainLog {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  nlohmann::json final_metrics = nlohmann::json::object();
};

inline nlohmann::json to_json(const TrainLog& log) {
  nlohmann::json e = nlohmann::json::array();
  for (const auto& r : log.epochs)
    e.push_back({{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"accuracy", r.accuracy}, {"seconds", r.seconds}});
  return {{"seed", log.seed}, {"epochs", e}, {"final_metrics", log.final_metrics}};
}

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Called after each epoch; used for progress output.
using EpochCallback = std::function<void(std::uint64_t seed, const EpochRecord&)>;

/// Augmentation pipeline for one draw; the stream is keyed by (seed, epoch, sample).
inline SampleTimeSeries augment_sample(const SampleTimeSeries& s, const TrainConfig& cfg, std::uint64_t seed,
                                       std::size_t epoch, std::size_t index) {
  if (!cfg.flip_enabled && !cfg.crop_enabled && !cfg.temporal_dropout_enabled) return s;
  Rng rng = make_rng(seed, {0xA11CULL, epoch, index});
  SampleTimeSeries out = cfg.flip_enabled ? augment_flip(s, rng, cfg.flip_prob) : s;
  if (cfg.crop_enabled) out = augment_crop(out, rng, cfg.crop);
  if (cfg.temporal_dropout_enabled) out = temporal_dropout(out, rng, cfg.temporal_dropout);
  return out;
}

namespace detail {

inline void accumulate(ModelParams& into, const ModelParams& g) {
  auto a = into.tensors();
  auto b = g.tensors();
  for (std::size_t k = 0; k < a.size(); ++k) {
    double* dst = a[k].second->data();
    const double* src = b[k].second->data();
    for (std::size_t i = 0; i < a[k].second->size(); ++i) dst[i] += src[i];
  }
}

inline void scale(ModelParams& p, double s) {
  for (auto& [name, t] : p.tensors())
    for (double& v : t->values()) v *= s;
}

}  // namespace detail

struct MemberResult {
  ModelParams params;
  TrainLog log;
};

/// Trains one model from `init_params(model, seed)` with mini-batch Adam on
/// the final-step cross-entropy. Samples in a batch are processed one at a
/// time and their gradients averaged.
inline MemberResult train_member(std::span<const SampleTimeSeries> samples, const ChannelStats& stats,
                                 const ModelConfig& model, const TrainConfig& cfg, std::uint64_t seed,
                                 const EpochCallback& on_epoch = {}) {
  if (samples.empty()) throw TrainingError("train_member: no training samples");
  cfg.validate();
  model.validate();
  MemberResult res{init_params(model, seed), {seed, {}, nlohmann::json::object()}};
  ModelParams& params = res.params;
  ModelParams grad_sum = zeros_like(params);
  auto slots = param_slots(params, grad_sum);
  AdamState adam = make_adam_state(slots, AdamConfig{cfg.learning_rate});

  std::vector<std::size_t> order(samples.size());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(seed, {0x5AFFULL, epoch});
    shuffle_in_place(order, shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
      for (auto& [name, t] : grad_sum.tensors()) t->fill(0.0);
      for (std::size_t k = b0; k < b1; ++k) {
        const std::size_t idx = order[k];
        const auto& src = samples[idx];
        const auto aug = augment_sample(src, cfg, seed, epoch, idx);
        const auto input = make_model_input(aug, stats, model);
        const int y = to_int(src.label);
        auto lg = loss_and_grad(input, y, params, model);
        if (!std::isfinite(lg.loss))
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + " on sample '" + src.site_id +
                              "' (member seed " + std::to_string(seed) + ", " +
                              std::to_string(input.frame_count()) + " frames)");
        loss_sum += lg.loss;
        correct += (lg.probability >= 0.5 ? 1 : 0) == y;
        detail::accumulate(grad_sum, lg.grads);
      }
      detail::scale(grad_sum, 1.0 / static_cast<double>(b1 - b0));
      try {
        adam_step(slots, adam);
      } catch (const NonFiniteGradient& ex) {
        throw TrainingError(std::string(ex.what()) + " at epoch " + std::to_string(epoch) + " (member seed " +
                            std::to_string(seed) + ")");
      }
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(samples.size()),
                    static_cast<double>(correct) / static_cast<double>(samples.size()),
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    res.log.epochs.push_back(rec);
    if (on_epoch) on_epoch(seed, rec);
  }
  return res;
}

struct EnsembleResult {
  EnsembleParams ensemble;
  std::vector<TrainLog> logs;
};

/// Member i is trained with seed base_seed + i.
inline EnsembleResult train_ensemble(std::span<const SampleTimeSeries> samples, const ChannelStats& stats,
                                     const ModelConfig& model, const TrainConfig& cfg,
                                     const EpochCallback& on_epoch = {}) {
  cfg.validate();
  EnsembleResult out{{model, std::vector<ModelParams>(cfg.member_count)}, std::vector<TrainLog>(cfg.member_count)};
  std::mutex callback_mutex;
  EpochCallback guarded;
  if (on_epoch)
    guarded = [&](std::uint64_t s, const EpochRecord& r) {
      std::lock_guard lock(callback_mutex);
      on_epoch(s, r);
    };
  parallel_for(cfg.member_count, cfg.threads, [&](std::size_t i) {
    auto r = train_member(samples, stats, model, cfg, cfg.base_seed + i, guarded);
    out.ensemble.members[i] = std::move(r.params);
    out.logs[i] = std::move(r.log);
  });
  return out;
}

/// Ablations that change training rather than the architecture.
inline const std::vector<std::string>& training_ablation_names() {
  static const std::vector<std::string> names{"no_temp_aug", "single_model"};
  return names;
}

struct RunSetup {
  ModelConfig model;
  TrainConfig train;
};

/// Resolves any ablation name (architectural or training-level) against a base train config.
inline RunSetup configure_run(std::string_view ablation, TrainConfig train) {
  if (ablation == "no_temp_aug" || ablation == "single_model") {
    ModelConfig model = configure_ablation("main");
    model.ablation = std::string(ablation);
    if (ablation == "no_temp_aug") train.temporal_dropout_enabled = false;
    else train.member_count = 1;
    return {model, train};
  }
  return {configure_ablation(ablation), train};
}

}  // namespace grazing
