#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "grazing/numerics/tensor.hpp"

namespace grazing {

// ---------------------------------------------------------------------------
// conv2d: H x W x Cin input, K x K x Cin x Cout kernels (odd K), same padding,
// stride 1. Cross-correlation convention.
//
// The model feeds masked chips where most pixels are exactly zero, so both
// passes iterate over non-zero input pixels only. Skipping a zero pixel drops
// terms that are exactly 0 * w, which does not change the result.
// ---------------------------------------------------------------------------

struct Conv2dGrads {
  Tensor input;    // empty unless requested
  Tensor kernels;
  Tensor bias;
};

namespace detail {

inline void check_conv_shapes(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  if (input.rank() != 3) throw ShapeError("conv2d: input must be HxWxC, got " + shape_string(input.shape()));
  if (kernels.rank() != 4 || kernels.dim(0) != kernels.dim(1) || kernels.dim(0) % 2 == 0) {
    throw ShapeError("conv2d: kernels must be KxKxCinxCout with odd K, got " +
                     shape_string(kernels.shape()));
  }
  if (kernels.dim(2) != input.dim(2)) {
    throw ShapeError("conv2d: input has " + std::to_string(input.dim(2)) +
                     " channels but kernels expect " + std::to_string(kernels.dim(2)) +
                     " (input " + shape_string(input.shape()) + ", kernels " +
                     shape_string(kernels.shape()) + ")");
  }
  require_shape(bias, {kernels.dim(3)}, "conv2d bias");
}

inline std::vector<std::uint8_t> nonzero_pixels(const Tensor& input) {
  const std::size_t pixels = input.dim(0) * input.dim(1);
  const std::size_t channels = input.dim(2);
  std::vector<std::uint8_t> flags(pixels, 0);
  const double* p = input.data();
  for (std::size_t i = 0; i < pixels; ++i, p += channels) {
    for (std::size_t c = 0; c < channels; ++c) {
      if (p[c] != 0.0) {
        flags[i] = 1;
        break;
      }
    }
  }
  return flags;
}

}  // namespace detail

/// Kernel copy laid out [c][ky][k-1-kx][f]. With the column taps reversed,
/// the taps of one kernel row touch a contiguous run of output pixels, and
/// one input pixel's contribution to every tap is a single dense row.
inline Vector reorder_kernels(const Tensor& kernels) {
  const std::size_t k = kernels.dim(0), cin = kernels.dim(2), cout = kernels.dim(3);
  Vector km(kernels.size());
  for (std::size_t ky = 0; ky < k; ++ky)
    for (std::size_t kx = 0; kx < k; ++kx)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t f = 0; f < cout; ++f)
          km[((c * k + ky) * k + (k - 1 - kx)) * cout + f] = kernels[((ky * k + kx) * cin + c) * cout + f];
  return km;
}

namespace detail {

// out[j] = sum_c px[c] * rows[c * len + j], blocked so partial sums stay in registers.
inline void project_pixel(const double* __restrict px, std::size_t cin, const double* __restrict rows,
                          std::size_t len, double* __restrict out) {
  constexpr std::size_t B = 8;
  std::size_t j = 0;
  for (; j + B <= len; j += B) {
    double acc[B] = {};
    for (std::size_t c = 0; c < cin; ++c) {
      const double v = px[c];
      const double* r = rows + c * len + j;
      for (std::size_t u = 0; u < B; ++u) acc[u] += v * r[u];
    }
    for (std::size_t u = 0; u < B; ++u) out[j + u] = acc[u];
  }
  for (; j < len; ++j) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cin; ++c) acc += px[c] * rows[c * len + j];
    out[j] = acc;
  }
}

struct TapWindow {
  std::size_t first, last;  // reversed-column tap range [first, last) that stays in bounds
  std::ptrdiff_t out_col;   // output column of tap `first`
};

inline TapWindow column_window(std::size_t x, std::size_t w, std::size_t k) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(x) - pad;  // output column of reversed tap 0
  const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -start);
  const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k),
                                                     static_cast<std::ptrdiff_t>(w) - start);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(std::max(lo, hi)), start + lo};
}

}  // namespace detail

inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  detail::check_conv_shapes(input, kernels, bias);
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernels.dim(0), cout = kernels.dim(3), row = k * k * cout, krow = k * cout;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  Tensor out({h, w, cout});
  double* o = out.data();
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t c = 0; c < cout; ++c) o[i * cout + c] = bias[c];

  const auto nz = detail::nonzero_pixels(input);
  const Vector km = reorder_kernels(kernels);
  Vector proj(row);
  const double* in = input.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (!nz[y * w + x]) continue;
      detail::project_pixel(in + (y * w + x) * cin, cin, km.data(), row, proj.data());
      const auto win = detail::column_window(x, w, k);
      const std::size_t span = (win.last - win.first) * cout;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(ky) + pad;
        if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(h)) continue;
        double* __restrict dst = o + (static_cast<std::size_t>(oy) * w + static_cast<std::size_t>(win.out_col)) * cout;
        const double* __restrict src = proj.data() + ky * krow + win.first * cout;
        for (std::size_t j = 0; j < span; ++j) dst[j] += src[j];
      }
    }
  }
  return out;
}

/// Gradients of a conv2d given dL/d(output). The input gradient is only
/// materialized when `need_input_grad` is set (the first layer does not need it).
inline Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out,
                                   bool need_input_grad) {
  detail::check_conv_shapes(input, kernels, Tensor({kernels.dim(3)}));
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernels.dim(0), cout = kernels.dim(3), row = k * k * cout, krow = k * cout;
  require_shape(grad_out, {h, w, cout}, "conv2d grad_out");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

  Conv2dGrads g{need_input_grad ? Tensor::zeros_like(input) : Tensor{}, Tensor::zeros_like(kernels),
                Tensor({cout})};
  const double* go = grad_out.data();
  for (std::size_t i = 0; i < h * w; ++i)
    for (std::size_t f = 0; f < cout; ++f) g.bias[f] += go[i * cout + f];

  // Gather, for each input pixel, the output gradients its taps feed; kernel
  // and input gradients are then dense products with that gathered row.
  const auto nz = detail::nonzero_pixels(input);
  const Vector km = need_input_grad ? reorder_kernels(kernels) : Vector{};
  Vector dkm(cin * row, 0.0);
  Vector gathered(row);
  const double* in = input.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t pix = y * w + x;
      if (!nz[pix] && !need_input_grad) continue;
      std::fill(gathered.begin(), gathered.end(), 0.0);
      const auto win = detail::column_window(x, w, k);
      const std::size_t span = (win.last - win.first) * cout;
      bool any = false;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(y) - static_cast<std::ptrdiff_t>(ky) + pad;
        if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(h)) continue;
        const double* src = go + (static_cast<std::size_t>(oy) * w + static_cast<std::size_t>(win.out_col)) * cout;
        double* dst = gathered.data() + ky * krow + win.first * cout;
        for (std::size_t j = 0; j < span; ++j) {
          dst[j] = src[j];
          any = any || src[j] != 0.0;
        }
      }
      if (!any) continue;
      const double* px = in + pix * cin;
      for (std::size_t c = 0; c < cin; ++c) {
        if (need_input_grad) {
          const double* kr = km.data() + c * row;
          double acc = 0.0;
          for (std::size_t j = 0; j < row; ++j) acc += kr[j] * gathered[j];
          g.input[pix * cin + c] = acc;
        }
        const double v = px[c];
        if (v == 0.0) continue;
        double* __restrict dr = dkm.data() + c * row;
        const double* __restrict gr = gathered.data();
        for (std::size_t j = 0; j < row; ++j) dr[j] += v * gr[j];
      }
    }
  }
  for (std::size_t ky = 0; ky < k; ++ky)
    for (std::size_t kx = 0; kx < k; ++kx)
      for (std::size_t c = 0; c < cin; ++c)
        for (std::size_t f = 0; f < cout; ++f)
          g.kernels[((ky * k + kx) * cin + c) * cout + f] = dkm[((c * k + ky) * k + (k - 1 - kx)) * cout + f];
  return g;
}

// ---------------------------------------------------------------------------
// relu
// ---------------------------------------------------------------------------

inline Tensor relu_forward(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
  return out;
}

/// Subgradient at exactly 0 is 0.
inline Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
  require_shape(grad_out, input.shape(), "relu grad_out");
  Tensor g(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_out[i] : 0.0;
  return g;
}

// ---------------------------------------------------------------------------
// maxpool2d over H x W x F with partial edge windows.
// ---------------------------------------------------------------------------

struct PoolResult {
  Tensor output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

inline std::size_t pooled_extent(std::size_t n, std::size_t stride) { return (n + stride - 1) / stride; }

inline PoolResult maxpool2d_forward(const Tensor& input, std::size_t window, std::size_t stride) {
  if (input.rank() != 3) throw ShapeError("maxpool2d: input must be HxWxF, got " + shape_string(input.shape()));
  if (window == 0 || stride == 0) throw ShapeError("maxpool2d: window and stride must be positive");
  const std::size_t h = input.dim(0), w = input.dim(1), f = input.dim(2);
  const std::size_t oh = pooled_extent(h, stride), ow = pooled_extent(w, stride);
  PoolResult r{Tensor({oh, ow, f}), std::vector<std::size_t>(oh * ow * f)};
  for (std::size_t py = 0; py < oh; ++py) {
    const std::size_t y0 = py * stride, y1 = std::min(y0 + window, h);
    for (std::size_t px = 0; px < ow; ++px) {
      const std::size_t x0 = px * stride, x1 = std::min(x0 + window, w);
      for (std::size_t c = 0; c < f; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = (y0 * w + x0) * f + c;
        // Row-major scan with strict '>' keeps the first maximum on ties.
        for (std::size_t y = y0; y < y1; ++y) {
          for (std::size_t x = x0; x < x1; ++x) {
            const std::size_t idx = (y * w + x) * f + c;
            if (input[idx] > best) {
              best = input[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (py * ow + px) * f + c;
        r.output[o] = best;
        r.argmax[o] = best_idx;
      }
    }
  }
  return r;
}

inline Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                                 const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2d: argmax/grad_out size mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

// ---------------------------------------------------------------------------
// linear: y = x W + b with W stored n x m row-major.
// ---------------------------------------------------------------------------

struct LinearGrads {
  Vector input;
  Tensor weights;
  Tensor bias;
};

inline void check_linear(std::size_t n, const Tensor& weights, const Tensor& bias) {
  if (weights.rank() != 2 || weights.dim(0) != n) {
    throw ShapeError("linear: input length " + std::to_string(n) + " incompatible with weights " +
                     shape_string(weights.shape()));
  }
  require_shape(bias, {weights.dim(1)}, "linear bias");
}

inline Vector linear_forward(std::span<const double> x, const Tensor& weights, const Tensor& bias) {
  check_linear(x.size(), weights, bias);
  const std::size_t m = weights.dim(1);
  Vector y(bias.vector());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v == 0.0) continue;
    const double* row = weights.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) y[j] += v * row[j];
  }
  return y;
}

inline LinearGrads linear_backward(std::span<const double> x, const Tensor& weights,
                                   std::span<const double> grad_out) {
  const std::size_t n = x.size(), m = weights.dim(1);
  if (grad_out.size() != m) throw ShapeError("linear: grad_out length mismatch");
  LinearGrads g{Vector(n, 0.0), Tensor::zeros_like(weights), Tensor({m})};
  for (std::size_t j = 0; j < m; ++j) g.bias[j] = grad_out[j];
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = weights.data() + i * m;
    double* grow = g.weights.data() + i * m;
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      grow[j] = x[i] * grad_out[j];
      acc += row[j] * grad_out[j];
    }
    g.input[i] = acc;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Scalar activations and the logistic loss.
// ---------------------------------------------------------------------------

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double sigmoid_grad(double x) noexcept {
  const double s = sigmoid(x);
  return s * (1.0 - s);
}

inline constexpr double kLogClamp = 1e-12;

/// Binary cross-entropy of probability p against y in {0, 1}.
inline double bce_loss(double p, int y) noexcept {
  const double lp = std::log(std::max(p, kLogClamp));
  const double lq = std::log(std::max(1.0 - p, kLogClamp));
  return -(y * lp + (1 - y) * lq);
}

struct BceResult {
  double loss;
  double probability;
  double grad_logit;  // dL/dlogit = p - y
};

inline BceResult bce_with_logit(double logit, int y) noexcept {
  const double p = sigmoid(logit);
  return {bce_loss(p, y), p, p - static_cast<double>(y)};
}

}  // namespace grazing
