#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "grazing/model/config.hpp"
#include "grazing/numerics/adam.hpp"
#include "grazing/numerics/lstm.hpp"
#include "grazing/numerics/random.hpp"
#include "grazing/numerics/tensor.hpp"

namespace grazing {

/// Every learnable weight of one conv / biLSTM / sigmoid-head model.
struct ModelParams {
  Tensor conv_kernels;  // K x K x Cin x F
  Tensor conv_bias;     // F
  LstmParams lstm_forward;
  LstmParams lstm_backward;
  Tensor head_weights;  // 2d x 1
  Tensor head_bias;     // 1
  std::uint64_t seed = 0;

  /// Fixed declaration order; checkpoints and optimizers depend on it.
  std::vector<std::pair<std::string_view, Tensor*>> tensors() {
    return {{"conv.kernels", &conv_kernels},
            {"conv.bias", &conv_bias},
            {"lstm_fwd.input_weights", &lstm_forward.input_weights},
            {"lstm_fwd.recurrent_weights", &lstm_forward.recurrent_weights},
            {"lstm_fwd.bias", &lstm_forward.bias},
            {"lstm_bwd.input_weights", &lstm_backward.input_weights},
            {"lstm_bwd.recurrent_weights", &lstm_backward.recurrent_weights},
            {"lstm_bwd.bias", &lstm_backward.bias},
            {"head.weights", &head_weights},
            {"head.bias", &head_bias}};
  }

  std::vector<std::pair<std::string_view, const Tensor*>> tensors() const {
    auto mut = const_cast<ModelParams*>(this)->tensors();
    std::vector<std::pair<std::string_view, const Tensor*>> out;
    out.reserve(mut.size());
    for (auto& [n, t] : mut) out.emplace_back(n, t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto& [name, t] : tensors()) n += t->size();
    return n;
  }

  bool all_finite() const {
    for (auto& [name, t] : tensors())
      if (!t->all_finite()) return false;
    return true;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.seed != b.seed) return false;
    auto ta = a.tensors(), tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (!(*ta[i].second == *tb[i].second)) return false;
    return true;
  }
};

/// All-zero parameters with the shapes implied by `config`.
inline ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  const std::size_t k = config.conv_kernel, f = config.conv_filters, d = config.lstm_hidden;
  ModelParams p;
  p.conv_kernels = Tensor({k, k, config.input_channels, f});
  p.conv_bias = Tensor({f});
  p.lstm_forward = LstmParams(config.feature_size(), d);
  p.lstm_backward = LstmParams(config.feature_size(), d);
  p.head_weights = Tensor({2 * d, 1});
  p.head_bias = Tensor({1});
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams g;
  g.conv_kernels = Tensor::zeros_like(p.conv_kernels);
  g.conv_bias = Tensor::zeros_like(p.conv_bias);
  g.lstm_forward = LstmParams(p.lstm_forward.input_size(), p.lstm_forward.hidden());
  g.lstm_backward = LstmParams(p.lstm_backward.input_size(), p.lstm_backward.hidden());
  g.head_weights = Tensor::zeros_like(p.head_weights);
  g.head_bias = Tensor::zeros_like(p.head_bias);
  g.seed = p.seed;
  return g;
}

inline void check_params(const ModelParams& p, const ModelConfig& config) {
  const auto ref = zero_params(config);
  auto a = p.tensors(), b = ref.tensors();
  for (std::size_t i = 0; i < a.size(); ++i)
    require_shape(*a[i].second, b[i].second->shape(), std::string(a[i].first).c_str());
}

namespace detail {

inline void glorot_uniform(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.values()) v = dist(rng);
}

}  // namespace detail

/// Glorot-uniform weights, zero biases except the LSTM forget gates (+1).
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zero_params(config);
  p.seed = seed;
  Rng rng = make_rng(seed, {0x1417ULL});
  const std::size_t k2 = config.conv_kernel * config.conv_kernel, d = config.lstm_hidden;
  detail::glorot_uniform(p.conv_kernels, k2 * config.input_channels, k2 * config.conv_filters, rng);
  for (LstmParams* l : {&p.lstm_forward, &p.lstm_backward}) {
    detail::glorot_uniform(l->input_weights, l->input_size(), 4 * d, rng);
    detail::glorot_uniform(l->recurrent_weights, d, 4 * d, rng);
    for (std::size_t j = d; j < 2 * d; ++j) l->bias[j] = 1.0;
  }
  detail::glorot_uniform(p.head_weights, 2 * d, 1, rng);
  return p;
}

/// Pairs parameters with their gradients for the optimizer.
inline std::vector<ParamSlot> param_slots(ModelParams& params, const ModelParams& grads) {
  auto pv = params.tensors();
  auto gv = grads.tensors();
  std::vector<ParamSlot> slots;
  slots.reserve(pv.size());
  for (std::size_t i = 0; i < pv.size(); ++i) slots.push_back({pv[i].first, pv[i].second, gv[i].second});
  return slots;
}

}  // namespace grazing
