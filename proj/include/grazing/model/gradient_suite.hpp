#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/model/config.hpp"
#include "grazing/model/network.hpp"
#include "grazing/model/params.hpp"
#include "grazing/numerics/gradcheck.hpp"
#include "grazing/numerics/layers.hpp"
#include "grazing/numerics/lstm.hpp"
#include "grazing/numerics/random.hpp"

namespace grazing {

// Finite-difference oracle suite: every differentiable operation on its own,
// then the composed model on a shrunk configuration.

struct OracleCheck {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckResult result;
  bool passed = false;
};

inline nlohmann::json to_json(const OracleCheck& c) {
  return {{"name", c.name},
          {"seed", c.seed},
          {"max_relative_error", c.result.max_relative_error},
          {"checked", c.result.checked},
          {"skipped", c.result.skipped},
          {"passed", c.passed}};
}

namespace detail {

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = uniform(rng, lo, hi);
  return t;
}

inline double weighted_sum(const Tensor& t, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * w[i];
  return s;
}

inline double weighted_sum(std::span<const double> v, std::span<const double> w) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * w[i];
  return s;
}

/// Values spaced at least `gap` apart in random order, so small probes never reorder them.
inline Tensor spaced_tensor(const Shape& shape, Rng& rng, double gap) {
  Tensor t(shape);
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_in_place(order, rng);
  const double offset = -gap * static_cast<double>(t.size()) / 2.0 + gap / 2.0;
  for (std::size_t i = 0; i < t.size(); ++i) t[order[i]] = offset + gap * static_cast<double>(i);
  return t;
}

struct SuiteContext {
  double tolerance;
  double step;
  std::uint64_t seed;
  std::vector<OracleCheck>* out;

  void record(std::string name, const GradCheckResult& r) {
    out->push_back({std::move(name), seed, r, r.passed(tolerance) && r.checked > 0});
  }
};

inline void check_conv(SuiteContext& ctx, Rng& rng) {
  const Shape in_shape{6, 7, 3};
  Tensor input = random_tensor(in_shape, rng);
  for (std::size_t p = 0; p < 6 * 7; p += 4)  // exercise the zero-pixel path
    for (std::size_t c = 0; c < 3; ++c) input[p * 3 + c] = 0.0;
  Tensor kernels = random_tensor({5, 5, 3, 4}, rng, -0.5, 0.5);
  Tensor bias = random_tensor({4}, rng);
  const Tensor w = random_tensor({6, 7, 4}, rng);
  const auto g = conv2d_backward(input, kernels, w, true);
  ctx.record("conv2d.input", grad_check([&](const Tensor& x) { return weighted_sum(conv2d_forward(x, kernels, bias), w); },
                                        input, g.input, ctx.step));
  ctx.record("conv2d.kernels",
             grad_check([&](const Tensor& k) { return weighted_sum(conv2d_forward(input, k, bias), w); }, kernels,
                        g.kernels, ctx.step));
  ctx.record("conv2d.bias", grad_check([&](const Tensor& b) { return weighted_sum(conv2d_forward(input, kernels, b), w); },
                                       bias, g.bias, ctx.step));
}

inline void check_relu(SuiteContext& ctx, Rng& rng) {
  Tensor x = random_tensor({40}, rng);
  for (double& v : x.values())
    if (std::abs(v) < 10 * ctx.step) v += v < 0 ? -0.1 : 0.1;
  const Tensor w = random_tensor({40}, rng);
  ctx.record("relu", grad_check([&](const Tensor& t) { return weighted_sum(relu_forward(t), w); }, x,
                                relu_backward(x, w), ctx.step));
}

inline void check_maxpool(SuiteContext& ctx, Rng& rng) {
  const Tensor x = spaced_tensor({7, 8, 2}, rng, 10 * ctx.step);
  const auto fwd = maxpool2d_forward(x, 3, 3);
  const Tensor w = random_tensor(fwd.output.shape(), rng);
  const auto g = maxpool2d_backward(x.shape(), fwd.argmax, w);
  ctx.record("maxpool2d", grad_check([&](const Tensor& t) { return weighted_sum(maxpool2d_forward(t, 3, 3).output, w); },
                                     x, g, ctx.step));
}

inline void check_linear_layer(SuiteContext& ctx, Rng& rng) {
  const Tensor x = random_tensor({9}, rng);
  const Tensor wts = random_tensor({9, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor w = random_tensor({3}, rng);
  const auto g = linear_backward(x.values(), wts, w.values());
  auto f = [&](const Tensor& xx, const Tensor& ww, const Tensor& bb) {
    return weighted_sum(linear_forward(xx.values(), ww, bb), w.values());
  };
  ctx.record("linear.input", grad_check([&](const Tensor& t) { return f(t, wts, b); }, x, Tensor({9}, g.input), ctx.step));
  ctx.record("linear.weights", grad_check([&](const Tensor& t) { return f(x, t, b); }, wts, g.weights, ctx.step));
  ctx.record("linear.bias", grad_check([&](const Tensor& t) { return f(x, wts, t); }, b, g.bias, ctx.step));
}

inline void check_sigmoid_bce(SuiteContext& ctx, Rng& rng) {
  const Tensor z = random_tensor({16}, rng, -4.0, 4.0);
  Tensor gs(z.shape()), gl(z.shape());
  const int y = bernoulli(rng, 0.5) ? 1 : 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    gs[i] = sigmoid_grad(z[i]);
    gl[i] = bce_with_logit(z[i], y).grad_logit;
  }
  ctx.record("sigmoid", grad_check([&](const Tensor& t) {
               double s = 0.0;
               for (double v : t.values()) s += sigmoid(v);
               return s;
             }, z, gs, ctx.step));
  ctx.record("bce_with_logit", grad_check([&](const Tensor& t) {
               double s = 0.0;
               for (double v : t.values()) s += bce_with_logit(v, y).loss;
               return s;
             }, z, gl, ctx.step));
}

inline LstmParams random_lstm(std::size_t n, std::size_t d, Rng& rng) {
  LstmParams p(n, d);
  p.input_weights = random_tensor(p.input_weights.shape(), rng, -0.5, 0.5);
  p.recurrent_weights = random_tensor(p.recurrent_weights.shape(), rng, -0.5, 0.5);
  p.bias = random_tensor(p.bias.shape(), rng, -0.5, 0.5);
  return p;
}

inline void check_lstm_cell(SuiteContext& ctx, Rng& rng) {
  const std::size_t n = 5, d = 3;
  const LstmParams p = random_lstm(n, d, rng);
  const Tensor x = random_tensor({n}, rng), h0 = random_tensor({d}, rng), c0 = random_tensor({d}, rng);
  const Tensor wh = random_tensor({d}, rng), wc = random_tensor({d}, rng);
  auto f = [&](const Tensor& xx, const Tensor& hh, const Tensor& cc, const LstmParams& pp) {
    const auto o = lstm_cell_forward(xx.values(), hh.values(), cc.values(), pp);
    return weighted_sum(o.h, wh.values()) + weighted_sum(o.c, wc.values());
  };
  const auto fwd = lstm_cell_forward(x.values(), h0.values(), c0.values(), p);
  LstmGrads g(p);
  const auto b = lstm_cell_backward(x.values(), fwd.cache, wh.values(), wc.values(), p, g, InputGrad::all);
  ctx.record("lstm_cell.input", grad_check([&](const Tensor& t) { return f(t, h0, c0, p); }, x, Tensor({n}, b.dx), ctx.step));
  ctx.record("lstm_cell.h_prev", grad_check([&](const Tensor& t) { return f(x, t, c0, p); }, h0, Tensor({d}, b.dh_prev), ctx.step));
  ctx.record("lstm_cell.c_prev", grad_check([&](const Tensor& t) { return f(x, h0, t, p); }, c0, Tensor({d}, b.dc_prev), ctx.step));
  auto with = [&](Tensor LstmParams::*member, const Tensor& grad, const char* name) {
    ctx.record(name, grad_check([&](const Tensor& t) {
                 LstmParams q = p;
                 q.*member = t;
                 return f(x, h0, c0, q);
               }, p.*member, grad, ctx.step));
  };
  with(&LstmParams::input_weights, g.input_weights, "lstm_cell.input_weights");
  with(&LstmParams::recurrent_weights, g.recurrent_weights, "lstm_cell.recurrent_weights");
  with(&LstmParams::bias, g.bias, "lstm_cell.bias");
}

inline void check_bilstm(SuiteContext& ctx, Rng& rng) {
  const std::size_t n = 4, d = 3, t_len = 4;
  const LstmParams pf = random_lstm(n, d, rng), pb = random_lstm(n, d, rng);
  std::vector<Vector> xs(t_len), ws(t_len);
  for (auto& x : xs) x = random_tensor({n}, rng).vector();
  for (auto& w : ws) w = random_tensor({2 * d}, rng).vector();
  xs[1][2] = 0.0;  // exercise the zero-input path
  auto f = [&](const std::vector<Vector>& in, const LstmParams& a, const LstmParams& b) {
    const auto run = bilstm_forward(in, a, b);
    double s = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) s += weighted_sum(run.outputs[t], ws[t]);
    return s;
  };
  const auto run = bilstm_forward(xs, pf, pb);
  const auto g = bilstm_backward(xs, pf, pb, run, ws, InputGrad::all);
  Tensor flat({t_len, n}), gflat({t_len, n});
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t k = 0; k < n; ++k) flat[t * n + k] = xs[t][k], gflat[t * n + k] = g.inputs[t][k];
  ctx.record("bilstm.inputs", grad_check([&](const Tensor& tt) {
               std::vector<Vector> in(t_len, Vector(n));
               for (std::size_t t = 0; t < t_len; ++t)
                 for (std::size_t k = 0; k < n; ++k) in[t][k] = tt[t * n + k];
               return f(in, pf, pb);
             }, flat, gflat, ctx.step));
  struct Group {
    const char* name;
    Tensor LstmParams::*member;
    bool forward;
    const Tensor* grad;
  };
  const Group groups[] = {
      {"bilstm.fwd.input_weights", &LstmParams::input_weights, true, &g.forward.input_weights},
      {"bilstm.fwd.recurrent_weights", &LstmParams::recurrent_weights, true, &g.forward.recurrent_weights},
      {"bilstm.fwd.bias", &LstmParams::bias, true, &g.forward.bias},
      {"bilstm.bwd.input_weights", &LstmParams::input_weights, false, &g.backward.input_weights},
      {"bilstm.bwd.recurrent_weights", &LstmParams::recurrent_weights, false, &g.backward.recurrent_weights},
      {"bilstm.bwd.bias", &LstmParams::bias, false, &g.backward.bias},
  };
  for (const auto& gr : groups) {
    const LstmParams& base = gr.forward ? pf : pb;
    ctx.record(gr.name, grad_check([&](const Tensor& t) {
                 LstmParams q = base;
                 q.*gr.member = t;
                 return gr.forward ? f(xs, q, pb) : f(xs, pf, q);
               }, base.*gr.member, *gr.grad, ctx.step));
  }
}

}  // namespace detail

/// The shrunk model used by the composed check: 9 x 9 chips with 4 bands.
inline ModelConfig shrunk_model_config() {
  ModelConfig c;
  c.ablation = "gradcheck";
  c.chip_height = c.chip_width = 9;
  c.band_subset = {0, 1, 2, 3};
  c.input_channels = 4;
  c.lstm_hidden = 4;
  c.validate();
  return c;
}

/// Random model input: `frames` frames with a few all-zero (masked) pixels.
inline ModelInput random_model_input(const ModelConfig& c, std::size_t frames, Rng& rng) {
  ModelInput in;
  for (std::size_t t = 0; t < frames; ++t) {
    Tensor f = detail::random_tensor({c.chip_height, c.chip_width, c.input_channels}, rng);
    for (std::size_t p = 0; p < c.chip_height * c.chip_width; ++p)
      if (bernoulli(rng, 0.3))
        for (std::size_t k = 0; k < c.input_channels; ++k) f[p * c.input_channels + k] = 0.0;
    in.frames.push_back(std::move(f));
  }
  return in;
}

/// Piece identifier of the model's non-smooth parts: ReLU signs and pooling winners.
inline std::vector<std::size_t> model_piece(const ForwardTrace& tr) {
  std::vector<std::size_t> piece;
  for (const auto& a : tr.frames) {
    for (double v : a.conv_out.values()) piece.push_back(v > 0.0);
    piece.insert(piece.end(), a.argmax.begin(), a.argmax.end());
  }
  return piece;
}

/// Mean final-step cross-entropy of a batch and its piece identifier.
inline PiecewiseValue batch_loss(std::span<const ModelInput> inputs, std::span<const int> labels,
                                 const ModelParams& params, const ModelConfig& config) {
  PiecewiseValue out;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto tr = forward_trace(inputs[i], params, config);
    out.value += bce_with_logit(tr.logits.back(), labels[i]).loss / static_cast<double>(inputs.size());
    const auto piece = model_piece(tr);
    out.piece.insert(out.piece.end(), piece.begin(), piece.end());
  }
  return out;
}

/// Coordinates per parameter group are capped at `max_coords` (a random subset) to bound runtime.
inline void check_full_model(detail::SuiteContext& ctx, Rng& rng, std::size_t max_coords) {
  const ModelConfig config = shrunk_model_config();
  ModelParams params = init_params(config, derive_seed(ctx.seed, {0x6C0DULL}));
  // Non-zero biases so every gate and the head see generic inputs.
  for (auto& [name, t] : params.tensors())
    if (t->rank() == 1)
      for (double& v : t->values()) v += uniform(rng, -0.3, 0.3);
  const std::vector<ModelInput> inputs{random_model_input(config, 3, rng), random_model_input(config, 3, rng)};
  const std::vector<int> labels{1, 0};

  ModelParams grad = zeros_like(params);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const auto lg = loss_and_grad(inputs[i], labels[i], params, config);
    auto dst = grad.tensors();
    auto src = lg.grads.tensors();
    for (std::size_t k = 0; k < dst.size(); ++k)
      for (std::size_t j = 0; j < dst[k].second->size(); ++j)
        (*dst[k].second)[j] += (*src[k].second)[j] / static_cast<double>(inputs.size());
  }

  const auto names = params.tensors();
  const auto grads = grad.tensors();
  for (std::size_t k = 0; k < names.size(); ++k) {
    auto f = [&](const Tensor& t) {
      ModelParams q = params;
      *q.tensors()[k].second = t;
      return batch_loss(inputs, labels, q, config);
    };
    std::vector<std::size_t> coords(names[k].second->size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      shuffle_in_place(coords, rng);
      coords.resize(max_coords);
    }
    ctx.record("model." + std::string(names[k].first),
               grad_check_piecewise(f, *names[k].second, *grads[k].second, ctx.step, coords));
  }
}

inline constexpr std::size_t kModelCoordsPerGroup = 150;

/// Runs every check for seeds base_seed .. base_seed + seeds - 1.
inline std::vector<OracleCheck> run_gradient_suite(std::size_t seeds, std::uint64_t base_seed = 0,
                                                   double tolerance = 1e-4, double step = 1e-4,
                                                   std::size_t model_coords = kModelCoordsPerGroup) {
  std::vector<OracleCheck> out;
  for (std::size_t s = 0; s < seeds; ++s) {
    detail::SuiteContext ctx{tolerance, step, base_seed + s, &out};
    Rng rng = make_rng(ctx.seed, {0x6AADULL});
    detail::check_conv(ctx, rng);
    detail::check_relu(ctx, rng);
    detail::check_maxpool(ctx, rng);
    detail::check_linear_layer(ctx, rng);
    detail::check_sigmoid_bce(ctx, rng);
    detail::check_lstm_cell(ctx, rng);
    detail::check_bilstm(ctx, rng);
    check_full_model(ctx, rng, model_coords);
  }
  return out;
}

}  // namespace grazing
