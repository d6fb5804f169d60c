#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "grazing/numerics/tensor.hpp"

namespace grazing {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose probes crossed a kink

  bool passed(double tolerance) const { return max_relative_error < tolerance; }
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares an analytic gradient of a scalar function against central
/// differences, coordinate by coordinate.
inline GradCheckResult grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                                  const Tensor& analytic, double step = 1e-3) {
  require_shape(analytic, x.shape(), "grad_check analytic gradient");
  GradCheckResult r;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double up = f(probe);
    probe[i] = orig - step;
    const double down = f(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    if (i == 0 || err > r.max_relative_error) r = {err, i, analytic[i], numeric, 0, 0};
  }
  r.checked = x.size();
  return r;
}

/// Value of a piecewise-smooth function plus an identifier of the smooth
/// piece it was evaluated on (ReLU signs, pooling winners, ...).
struct PiecewiseValue {
  double value = 0.0;
  std::vector<std::size_t> piece;
};

/// Like grad_check, but coordinates whose +/- probes land on a different
/// piece than `x` are skipped: central differences across a kink do not
/// estimate the derivative. A non-empty `coords` restricts the check to
/// those coordinates.
inline GradCheckResult grad_check_piecewise(const std::function<PiecewiseValue(const Tensor&)>& f, const Tensor& x,
                                            const Tensor& analytic, double step = 1e-3,
                                            std::span<const std::size_t> coords = {}) {
  require_shape(analytic, x.shape(), "grad_check analytic gradient");
  std::vector<std::size_t> all;
  if (coords.empty()) {
    all.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) all[i] = i;
    coords = all;
  }
  const auto base = f(x).piece;
  GradCheckResult r;
  bool any = false;
  Tensor probe = x;
  for (const std::size_t i : coords) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const auto up = f(probe);
    probe[i] = orig - step;
    const auto down = f(probe);
    probe[i] = orig;
    if (up.piece != base || down.piece != base) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up.value - down.value) / (2.0 * step);
    const double err = relative_error(analytic[i], numeric);
    ++r.checked;
    if (!any || err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = i;
      r.analytic_at_worst = analytic[i];
      r.numeric_at_worst = numeric;
      any = true;
    }
  }
  return r;
}

}  // namespace grazing
