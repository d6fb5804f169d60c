#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "grazing/numerics/tensor.hpp"

namespace grazing {

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One parameter tensor paired with its gradient.
struct ParamSlot {
  std::string_view name;
  Tensor* value;
  const Tensor* grad;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline AdamState make_adam_state(std::span<const ParamSlot> slots, AdamConfig config = {}) {
  AdamState s{config, {}, {}, 0};
  for (const auto& slot : slots) {
    s.first_moment.push_back(Tensor::zeros_like(*slot.value));
    s.second_moment.push_back(Tensor::zeros_like(*slot.value));
  }
  return s;
}

/// Bias-corrected Adam update. Nothing is modified if any gradient is non-finite.
inline void adam_step(std::span<const ParamSlot> slots, AdamState& state) {
  if (slots.size() != state.first_moment.size())
    throw ShapeError("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                     " moments for " + std::to_string(slots.size()) + " parameters");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& s = slots[k];
    require_shape(*s.grad, s.value->shape(), "adam_step gradient");
    require_shape(state.first_moment[k], s.value->shape(), "adam_step moment");
    if (!s.grad->all_finite())
      throw NonFiniteGradient("non-finite gradient for parameter '" + std::string(s.name) + "'");
  }

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < slots.size(); ++k) {
    Tensor& p = *slots[k].value;
    const Tensor& g = *slots[k].grad;
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace grazing
