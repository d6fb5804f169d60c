#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "grazing/dataset/preprocess.hpp"
#include "grazing/dataset/types.hpp"
#include "grazing/model/config.hpp"
#include "grazing/model/params.hpp"
#include "grazing/numerics/layers.hpp"
#include "grazing/numerics/lstm.hpp"

namespace grazing {

/// Model-ready series: T normalized H x W x C frames.
struct ModelInput {
  std::vector<Tensor> frames;
  std::size_t frame_count() const { return frames.size(); }
};

/// Band selection, normalization and polygon handling per `config.input_mode`.
inline ModelInput make_model_input(const SampleTimeSeries& sample, const ChannelStats& stats,
                                   const ModelConfig& config) {
  if (sample.height != config.chip_height || sample.width != config.chip_width)
    throw ShapeError("sample chip is " + std::to_string(sample.height) + "x" + std::to_string(sample.width) +
                     " but the model expects " + std::to_string(config.chip_height) + "x" +
                     std::to_string(config.chip_width));
  return {normalize_frames(sample, stats, config.band_subset, mask_policy(config.input_mode))};
}

// ---------------------------------------------------------------------------
// Forward pass with the activations needed for backpropagation.
// ---------------------------------------------------------------------------

struct FrameActivations {
  Tensor conv_out;                  // pre-ReLU
  std::vector<std::size_t> argmax;  // pooled element -> conv_out index
  Shape pooled_shape;
};

struct ForwardTrace {
  std::vector<FrameActivations> frames;
  std::vector<Vector> features;  // flattened pooled maps, T x feature_size
  BiLstmRun recurrent;
  std::vector<double> logits;    // per step
};

inline void check_input(const ModelInput& input, const ModelConfig& config) {
  if (input.frames.empty()) throw std::invalid_argument("model input has no frames");
  for (const auto& f : input.frames) {
    if (f.rank() != 3 || f.dim(2) != config.input_channels)
      throw ShapeError("model input frame " + shape_string(f.shape()) + " does not have the configured " +
                       std::to_string(config.input_channels) + " channels");
    if (f.dim(0) != config.chip_height || f.dim(1) != config.chip_width)
      throw ShapeError("model input frame " + shape_string(f.shape()) + " does not match configured chip size");
  }
}

inline ForwardTrace forward_trace(const ModelInput& input, const ModelParams& params, const ModelConfig& config) {
  check_input(input, config);
  ForwardTrace tr;
  tr.frames.reserve(input.frames.size());
  tr.features.reserve(input.frames.size());
  for (const auto& frame : input.frames) {
    FrameActivations a;
    a.conv_out = conv2d_forward(frame, params.conv_kernels, params.conv_bias);
    auto pooled = maxpool2d_forward(relu_forward(a.conv_out), config.pool_window, config.pool_stride);
    a.argmax = std::move(pooled.argmax);
    a.pooled_shape = pooled.output.shape();
    tr.features.push_back(pooled.output.vector());
    tr.frames.push_back(std::move(a));
  }
  tr.recurrent = bilstm_forward(tr.features, params.lstm_forward, params.lstm_backward);
  tr.logits.reserve(input.frames.size());
  for (const auto& h : tr.recurrent.outputs) tr.logits.push_back(linear_forward(h, params.head_weights, params.head_bias)[0]);
  return tr;
}

/// Per-step grazing probabilities p_1..p_T.
inline std::vector<double> forward(const ModelInput& input, const ModelParams& params, const ModelConfig& config) {
  const auto tr = forward_trace(input, params, config);
  std::vector<double> p;
  p.reserve(tr.logits.size());
  for (double z : tr.logits) p.push_back(sigmoid(z));
  return p;
}

struct LossAndGrad {
  double loss = 0.0;
  double probability = 0.0;  // final-step probability
  ModelParams grads;
};

/// Cross-entropy on the final-step probability and its gradient with respect
/// to every parameter.
inline LossAndGrad loss_and_grad(const ModelInput& input, int label, const ModelParams& params,
                                 const ModelConfig& config) {
  const auto tr = forward_trace(input, params, config);
  const std::size_t t_len = input.frames.size(), d = config.lstm_hidden;
  const auto bce = bce_with_logit(tr.logits.back(), label);

  LossAndGrad out{bce.loss, bce.probability, zeros_like(params)};
  ModelParams& g = out.grads;

  const Vector& h_last = tr.recurrent.outputs.back();
  const double dz = bce.grad_logit;
  auto head = linear_backward(h_last, params.head_weights, std::span<const double>(&dz, 1));
  g.head_weights = std::move(head.weights);
  g.head_bias = std::move(head.bias);

  std::vector<Vector> d_hidden(t_len, Vector(2 * d, 0.0));
  d_hidden.back() = std::move(head.input);
  auto rec = bilstm_backward(tr.features, params.lstm_forward, params.lstm_backward, tr.recurrent, d_hidden,
                             InputGrad::nonzero_inputs);
  g.lstm_forward.input_weights = std::move(rec.forward.input_weights);
  g.lstm_forward.recurrent_weights = std::move(rec.forward.recurrent_weights);
  g.lstm_forward.bias = std::move(rec.forward.bias);
  g.lstm_backward.input_weights = std::move(rec.backward.input_weights);
  g.lstm_backward.recurrent_weights = std::move(rec.backward.recurrent_weights);
  g.lstm_backward.bias = std::move(rec.backward.bias);

  for (std::size_t t = 0; t < t_len; ++t) {
    const auto& a = tr.frames[t];
    // Pool and ReLU backward fused: route each pooled gradient to its argmax
    // when that pre-activation is positive.
    Tensor d_conv = Tensor::zeros_like(a.conv_out);
    const Vector& d_pooled = rec.inputs[t];
    for (std::size_t i = 0; i < a.argmax.size(); ++i) {
      if (d_pooled[i] != 0.0 && a.conv_out[a.argmax[i]] > 0.0) d_conv[a.argmax[i]] += d_pooled[i];
    }
    auto cg = conv2d_backward(input.frames[t], params.conv_kernels, d_conv, false);
    for (std::size_t i = 0; i < cg.kernels.size(); ++i) g.conv_kernels[i] += cg.kernels[i];
    for (std::size_t i = 0; i < cg.bias.size(); ++i) g.conv_bias[i] += cg.bias[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decision rules
// ---------------------------------------------------------------------------

/// Median of the last min(window, T) probabilities; even counts average the middle pair.
inline double median_of_last(std::span<const double> probs, std::size_t window) {
  if (probs.empty()) throw std::invalid_argument("median_of_last: no probabilities");
  const std::size_t k = std::min(window, probs.size());
  std::vector<double> tail(probs.end() - static_cast<std::ptrdiff_t>(k), probs.end());
  std::sort(tail.begin(), tail.end());
  return k % 2 == 1 ? tail[k / 2] : 0.5 * (tail[k / 2 - 1] + tail[k / 2]);
}

inline Label decide(std::span<const double> probs, const ModelConfig& config) {
  const double score = config.classifier_mode == ClassifierMode::only_last ? probs.back()
                                                                           : median_of_last(probs, config.vote_window);
  return score >= 0.5 ? Label::grazing : Label::no_activity;
}

inline Label predict_single(const ModelInput& input, const ModelParams& params, const ModelConfig& config) {
  return decide(forward(input, params, config), config);
}

struct EnsembleParams {
  ModelConfig config;
  std::vector<ModelParams> members;
};

/// Majority vote; a tie resolves to grazing, so "no activity" needs a strict majority.
inline Label majority_vote(std::span<const Label> votes) {
  if (votes.empty()) throw std::invalid_argument("majority_vote: no votes");
  const auto grazing = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), Label::grazing));
  return 2 * grazing >= votes.size() ? Label::grazing : Label::no_activity;
}

struct EnsembleDecision {
  Label label;
  std::vector<Label> member_votes;
};

inline EnsembleDecision predict_ensemble_detailed(const ModelInput& input, const EnsembleParams& ensemble) {
  EnsembleDecision out{Label::grazing, {}};
  out.member_votes.reserve(ensemble.members.size());
  for (const auto& m : ensemble.members) out.member_votes.push_back(predict_single(input, m, ensemble.config));
  out.label = majority_vote(out.member_votes);
  return out;
}

inline Label predict_ensemble(const ModelInput& input, const EnsembleParams& ensemble) {
  return predict_ensemble_detailed(input, ensemble).label;
}

}  // namespace grazing
