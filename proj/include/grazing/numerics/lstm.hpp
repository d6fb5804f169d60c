#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "grazing/numerics/layers.hpp"
#include "grazing/numerics/tensor.hpp"

namespace grazing {

/// Gate parameters of one LSTM direction. Gate blocks are laid out as
/// [input | forget | candidate | output], each of width `hidden`.
struct LstmParams {
  Tensor input_weights;      // n x 4d
  Tensor recurrent_weights;  // d x 4d
  Tensor bias;               // 4d

  LstmParams() = default;
  LstmParams(std::size_t input_size, std::size_t hidden)
      : input_weights({input_size, 4 * hidden}),
        recurrent_weights({hidden, 4 * hidden}),
        bias({4 * hidden}) {}

  std::size_t input_size() const { return input_weights.dim(0); }
  std::size_t hidden() const { return recurrent_weights.dim(0); }

  void validate() const {
    const std::size_t d = recurrent_weights.dim(0);
    require_shape(recurrent_weights, {d, 4 * d}, "lstm recurrent_weights");
    if (input_weights.rank() != 2 || input_weights.dim(1) != 4 * d)
      throw ShapeError("lstm input_weights must be n x 4d, got " + shape_string(input_weights.shape()));
    require_shape(bias, {4 * d}, "lstm bias");
  }
};

struct LstmCellCache {
  Vector h_prev, c_prev;
  Vector i, f, g, o;  // post-activation gates
  Vector c, tanh_c;
};

struct LstmCellOutput {
  Vector h, c;
  LstmCellCache cache;
};

inline LstmCellOutput lstm_cell_forward(std::span<const double> x, std::span<const double> h_prev,
                                        std::span<const double> c_prev, const LstmParams& p) {
  const std::size_t d = p.hidden();
  if (x.size() != p.input_size())
    throw ShapeError("lstm_cell: input length " + std::to_string(x.size()) + " but weights expect " +
                     std::to_string(p.input_size()));
  if (h_prev.size() != d || c_prev.size() != d)
    throw ShapeError("lstm_cell: state length must equal hidden size " + std::to_string(d));

  Vector z = linear_forward(x, p.input_weights, p.bias);
  const double* wh = p.recurrent_weights.data();
  for (std::size_t k = 0; k < d; ++k) {
    const double v = h_prev[k];
    if (v == 0.0) continue;
    for (std::size_t j = 0; j < 4 * d; ++j) z[j] += v * wh[k * 4 * d + j];
  }

  LstmCellOutput out;
  auto& cc = out.cache;
  cc.h_prev.assign(h_prev.begin(), h_prev.end());
  cc.c_prev.assign(c_prev.begin(), c_prev.end());
  cc.i.resize(d), cc.f.resize(d), cc.g.resize(d), cc.o.resize(d), cc.c.resize(d), cc.tanh_c.resize(d);
  out.h.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    cc.i[k] = sigmoid(z[k]);
    cc.f[k] = sigmoid(z[d + k]);
    cc.g[k] = std::tanh(z[2 * d + k]);
    cc.o[k] = sigmoid(z[3 * d + k]);
    cc.c[k] = cc.f[k] * c_prev[k] + cc.i[k] * cc.g[k];
    cc.tanh_c[k] = std::tanh(cc.c[k]);
    out.h[k] = cc.o[k] * cc.tanh_c[k];
  }
  out.c = cc.c;
  return out;
}

struct LstmGrads {
  Tensor input_weights, recurrent_weights, bias;

  LstmGrads() = default;
  explicit LstmGrads(const LstmParams& p)
      : input_weights(Tensor::zeros_like(p.input_weights)),
        recurrent_weights(Tensor::zeros_like(p.recurrent_weights)),
        bias(Tensor::zeros_like(p.bias)) {}
};

struct LstmCellBackward {
  Vector dx, dh_prev, dc_prev;
};

/// Which entries of dL/dx to compute. `nonzero_inputs` leaves dx at 0 where
/// x is exactly 0; callers use it when such inputs come from an inactive ReLU
/// and the gradient would be discarded anyway.
enum class InputGrad { none, all, nonzero_inputs };

/// Backward through one cell. Parameter gradients accumulate into `grads`.
inline LstmCellBackward lstm_cell_backward(std::span<const double> x, const LstmCellCache& cc,
                                           std::span<const double> dh, std::span<const double> dc,
                                           const LstmParams& p, LstmGrads& grads, InputGrad input_grad) {
  const std::size_t d = p.hidden(), n = p.input_size(), g4 = 4 * d;
  Vector dz(g4);
  LstmCellBackward out{Vector{}, Vector(d, 0.0), Vector(d, 0.0)};
  for (std::size_t k = 0; k < d; ++k) {
    const double do_ = dh[k] * cc.tanh_c[k];
    const double dct = dc[k] + dh[k] * cc.o[k] * (1.0 - cc.tanh_c[k] * cc.tanh_c[k]);
    const double di = dct * cc.g[k];
    const double df = dct * cc.c_prev[k];
    const double dg = dct * cc.i[k];
    out.dc_prev[k] = dct * cc.f[k];
    dz[k] = di * cc.i[k] * (1.0 - cc.i[k]);
    dz[d + k] = df * cc.f[k] * (1.0 - cc.f[k]);
    dz[2 * d + k] = dg * (1.0 - cc.g[k] * cc.g[k]);
    dz[3 * d + k] = do_ * cc.o[k] * (1.0 - cc.o[k]);
  }
  for (std::size_t j = 0; j < g4; ++j) grads.bias[j] += dz[j];

  double* gwx = grads.input_weights.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double v = x[r];
    if (v == 0.0) continue;
    double* row = gwx + r * g4;
    for (std::size_t j = 0; j < g4; ++j) row[j] += v * dz[j];
  }
  if (input_grad != InputGrad::none) {
    out.dx.assign(n, 0.0);
    const double* wx = p.input_weights.data();
    for (std::size_t r = 0; r < n; ++r) {
      if (input_grad == InputGrad::nonzero_inputs && x[r] == 0.0) continue;
      const double* row = wx + r * g4;
      double acc = 0.0;
      for (std::size_t j = 0; j < g4; ++j) acc += row[j] * dz[j];
      out.dx[r] = acc;
    }
  }
  const double* wh = p.recurrent_weights.data();
  double* gwh = grads.recurrent_weights.data();
  for (std::size_t r = 0; r < d; ++r) {
    const double hv = cc.h_prev[r];
    const double* row = wh + r * g4;
    double* grow = gwh + r * g4;
    double acc = 0.0;
    for (std::size_t j = 0; j < g4; ++j) {
      grow[j] += hv * dz[j];
      acc += row[j] * dz[j];
    }
    out.dh_prev[r] = acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequences. A reversed run consumes the inputs from the last step to the
// first; its outputs are still indexed by time step.
// ---------------------------------------------------------------------------

struct LstmRun {
  bool reversed = false;
  std::vector<Vector> hidden;          // indexed by time step
  std::vector<LstmCellCache> caches;   // indexed by time step
};

inline LstmRun lstm_forward(std::span<const Vector> xs, const LstmParams& p, bool reversed) {
  if (xs.empty()) throw std::invalid_argument("lstm: empty sequence");
  const std::size_t t_len = xs.size(), d = p.hidden();
  LstmRun run{reversed, std::vector<Vector>(t_len), std::vector<LstmCellCache>(t_len)};
  Vector h(d, 0.0), c(d, 0.0);
  for (std::size_t s = 0; s < t_len; ++s) {
    const std::size_t t = reversed ? t_len - 1 - s : s;
    auto step = lstm_cell_forward(xs[t], h, c, p);
    h = step.h;
    c = step.c;
    run.hidden[t] = std::move(step.h);
    run.caches[t] = std::move(step.cache);
  }
  return run;
}

struct LstmSequenceGrads {
  LstmGrads params;
  std::vector<Vector> inputs;  // empty unless requested
};

/// Backpropagation through time. `dh[t]` is dL/dh_t from outside the recurrence.
inline LstmSequenceGrads lstm_backward(std::span<const Vector> xs, const LstmParams& p, const LstmRun& run,
                                       std::span<const Vector> dh, InputGrad input_grad) {
  const std::size_t t_len = xs.size(), d = p.hidden();
  if (dh.size() != t_len || run.caches.size() != t_len) throw ShapeError("lstm_backward: sequence length mismatch");
  LstmSequenceGrads g{LstmGrads(p), {}};
  const bool need_input_grad = input_grad != InputGrad::none;
  if (need_input_grad) g.inputs.resize(t_len);
  Vector dh_next(d, 0.0), dc_next(d, 0.0);
  for (std::size_t s = 0; s < t_len; ++s) {
    // Walk the processing order backwards.
    const std::size_t t = run.reversed ? s : t_len - 1 - s;
    Vector dh_total(d);
    for (std::size_t k = 0; k < d; ++k) dh_total[k] = dh[t][k] + dh_next[k];
    auto b = lstm_cell_backward(xs[t], run.caches[t], dh_total, dc_next, p, g.params, input_grad);
    dh_next = std::move(b.dh_prev);
    dc_next = std::move(b.dc_prev);
    if (need_input_grad) g.inputs[t] = std::move(b.dx);
  }
  return g;
}

struct BiLstmRun {
  LstmRun forward, backward;
  std::vector<Vector> outputs;  // T x 2d, [forward_t | backward_t]
};

inline BiLstmRun bilstm_forward(std::span<const Vector> xs, const LstmParams& fwd, const LstmParams& bwd) {
  if (xs.empty()) throw std::invalid_argument("bilstm: empty sequence");
  BiLstmRun r{lstm_forward(xs, fwd, false), lstm_forward(xs, bwd, true), {}};
  const std::size_t d = fwd.hidden();
  r.outputs.resize(xs.size());
  for (std::size_t t = 0; t < xs.size(); ++t) {
    Vector& o = r.outputs[t];
    o.reserve(2 * d);
    o.insert(o.end(), r.forward.hidden[t].begin(), r.forward.hidden[t].end());
    o.insert(o.end(), r.backward.hidden[t].begin(), r.backward.hidden[t].end());
  }
  return r;
}

struct BiLstmGrads {
  LstmGrads forward, backward;
  std::vector<Vector> inputs;
};

inline BiLstmGrads bilstm_backward(std::span<const Vector> xs, const LstmParams& fwd, const LstmParams& bwd,
                                   const BiLstmRun& run, std::span<const Vector> d_outputs, InputGrad input_grad) {
  const std::size_t t_len = xs.size(), d = fwd.hidden();
  std::vector<Vector> dh_f(t_len), dh_b(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    if (d_outputs[t].size() != 2 * d) throw ShapeError("bilstm_backward: output gradient must be 2d wide");
    dh_f[t].assign(d_outputs[t].begin(), d_outputs[t].begin() + static_cast<std::ptrdiff_t>(d));
    dh_b[t].assign(d_outputs[t].begin() + static_cast<std::ptrdiff_t>(d), d_outputs[t].end());
  }
  auto gf = lstm_backward(xs, fwd, run.forward, dh_f, input_grad);
  auto gb = lstm_backward(xs, bwd, run.backward, dh_b, input_grad);
  BiLstmGrads g{std::move(gf.params), std::move(gb.params), {}};
  if (input_grad != InputGrad::none) {
    g.inputs = std::move(gf.inputs);
    for (std::size_t t = 0; t < t_len; ++t)
      for (std::size_t k = 0; k < g.inputs[t].size(); ++k) g.inputs[t][k] += gb.inputs[t][k];
  }
  return g;
}

}  // namespace grazing
