#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/numerics/random.hpp"
#include "grazing/numerics/parallel.hpp"

namespace grazing {

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A season's inspection problem: N sites, a fraction q of them not grazed,
/// and a classifier whose "no activity" class has precision pi and recall rho.
struct InspectionScenario {
  std::size_t n_sites = 10000;
  double nongrazed_fraction = 0.05;
  double precision_no = 0.86;
  double recall_no = 0.69;

  double nongrazed() const { return nongrazed_fraction * static_cast<double>(n_sites); }

  void validate() const {
    if (n_sites < 1) throw ScenarioError("n_sites must be positive");
    if (!(nongrazed_fraction > 0.0 && nongrazed_fraction < 1.0))
      throw ScenarioError("nongrazed fraction must lie in (0, 1)");
    if (!(precision_no > 0.0 && precision_no <= 1.0)) throw ScenarioError("precision must lie in (0, 1]");
    if (!(recall_no >= 0.0 && recall_no <= 1.0)) throw ScenarioError("recall must lie in [0, 1]");
    if (nongrazed() < 1.0) throw ScenarioError("scenario has fewer than one non-grazed site");
    if (nongrazed() * recall_no / precision_no > static_cast<double>(n_sites))
      throw ScenarioError("expected flagged count exceeds the number of sites");
  }
};

inline nlohmann::json to_json(const InspectionScenario& s) {
  return {{"n_sites", s.n_sites},
          {"nongrazed_fraction", s.nongrazed_fraction},
          {"precision_no", s.precision_no},
          {"recall_no", s.recall_no}};
}

inline InspectionScenario scenario_from_json(const nlohmann::json& j) {
  InspectionScenario s;
  s.n_sites = j.value("n_sites", s.n_sites);
  s.nongrazed_fraction = j.value("nongrazed_fraction", s.nongrazed_fraction);
  s.precision_no = j.value("precision_no", s.precision_no);
  s.recall_no = j.value("recall_no", s.recall_no);
  s.validate();
  return s;
}

enum class VisitPolicy { random, targeted };

inline const char* to_string(VisitPolicy p) { return p == VisitPolicy::random ? "random" : "targeted"; }

/// F = qN rho / pi: expected number of sites the model flags as not grazed.
inline double expected_flagged(const InspectionScenario& s) {
  s.validate();
  return s.nongrazed() * s.recall_no / s.precision_no;
}

/// Expected non-grazed sites found with V visits. Targeted visits exhaust the
/// flagged set first, then sample the unflagged sites uniformly.
inline double expected_found(const InspectionScenario& s, VisitPolicy policy, double visits) {
  s.validate();
  const double n = static_cast<double>(s.n_sites);
  if (!(visits >= 0.0 && visits <= n)) throw ScenarioError("visit count must lie in [0, n_sites]");
  const double m = s.nongrazed();
  if (policy == VisitPolicy::random) return visits * s.nongrazed_fraction;
  const double f = expected_flagged(s);
  const double missed = m - m * s.recall_no;
  const double rest = n - f;
  return std::min(visits, f) * s.precision_no + (rest > 0.0 ? std::max(0.0, visits - f) * missed / rest : 0.0);
}

/// Targeted over random discoveries at visitation fraction p.
inline double advantage_ratio(const InspectionScenario& s, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ScenarioError("visitation fraction must lie in (0, 1]");
  const double v = p * static_cast<double>(s.n_sites);
  return expected_found(s, VisitPolicy::targeted, v) / expected_found(s, VisitPolicy::random, v);
}

struct CurvePoint {
  double p = 0.0;
  double random_found = 0.0;
  double targeted_found = 0.0;
  double random_pct = 0.0;    // of all non-grazed sites
  double targeted_pct = 0.0;
  double ratio = 0.0;
};

struct PolicyCurve {
  InspectionScenario scenario;
  std::vector<CurvePoint> points;
};

/// 0.5% steps from 0.5% to 100%.
inline std::vector<double> default_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 200; ++k) g.push_back(k / 200.0);
  return g;
}

inline PolicyCurve emit_curve(const InspectionScenario& s, std::span<const double> grid) {
  s.validate();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0 && grid[i] <= 1.0)) throw ScenarioError("grid values must lie in (0, 1]");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw ScenarioError("grid must be strictly increasing");
  }
  PolicyCurve c{s, {}};
  const double n = static_cast<double>(s.n_sites), m = s.nongrazed();
  for (double p : grid) {
    CurvePoint pt;
    pt.p = p;
    pt.random_found = expected_found(s, VisitPolicy::random, p * n);
    pt.targeted_found = expected_found(s, VisitPolicy::targeted, p * n);
    pt.random_pct = 100.0 * pt.random_found / m;
    pt.targeted_pct = 100.0 * pt.targeted_found / m;
    pt.ratio = pt.targeted_found / pt.random_found;
    c.points.push_back(pt);
  }
  return c;
}

inline std::string curve_csv(const PolicyCurve& c) {
  std::string out = "p,random_pct,targeted_pct,ratio\n";
  char buf[128];
  for (const auto& pt : c.points) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f\n", pt.p, pt.random_pct, pt.targeted_pct, pt.ratio);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// How each trial's flag set is drawn. `bernoulli` flags every non-grazed site
/// with probability rho and every grazed site at the rate implied by pi;
/// `fixed_counts` flags exactly round(qN rho) true and round(F) - round(qN rho)
/// false positives at random positions.
enum class FlagModel { bernoulli, fixed_counts };

inline const char* to_string(FlagModel m) { return m == FlagModel::bernoulli ? "bernoulli" : "fixed_counts"; }

struct MonteCarloResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
};

/// Probability that a grazed site is flagged: qN rho (1/pi - 1) / ((1 - q) N).
inline double false_flag_probability(const InspectionScenario& s) {
  const double n = static_cast<double>(s.n_sites);
  const double phi = s.nongrazed() * s.recall_no * (1.0 / s.precision_no - 1.0) / ((1.0 - s.nongrazed_fraction) * n);
  if (!(phi >= 0.0 && phi <= 1.0)) throw ScenarioError("scenario implies a false-flag probability outside [0, 1]");
  return phi;
}

namespace detail {

/// Successes among `draws` taken without replacement from `total` items of
/// which `good` are successes (sequential urn).
inline std::size_t hypergeometric(Rng& rng, std::size_t good, std::size_t total, std::size_t draws) {
  std::size_t hits = 0;
  for (std::size_t k = 0; k < draws && good > 0; ++k, --total) {
    if (uniform_index(rng, total) < good) {
      ++hits;
      --good;
    }
  }
  return hits;
}

inline std::size_t binomial(Rng& rng, std::size_t n, double p) {
  if (p <= 0.0 || n == 0) return 0;
  if (p >= 1.0) return n;
  return static_cast<std::size_t>(std::binomial_distribution<long long>(static_cast<long long>(n), p)(rng));
}

}  // namespace detail

/// Population size of non-grazed sites used by the simulation: round(qN).
inline std::size_t simulated_nongrazed(const InspectionScenario& s) {
  return static_cast<std::size_t>(std::llround(s.nongrazed()));
}

/// Mean and standard error of non-grazed sites found with `visits` visits.
/// Trial t draws from the stream (seed, t), so results do not depend on `threads`.
inline MonteCarloResult monte_carlo(const InspectionScenario& s, VisitPolicy policy, std::size_t visits,
                                    std::size_t trials, std::uint64_t seed, FlagModel model = FlagModel::bernoulli,
                                    std::size_t threads = 1) {
  s.validate();
  if (trials < 1) throw ScenarioError("monte_carlo: need at least one trial");
  if (visits > s.n_sites) throw ScenarioError("monte_carlo: more visits than sites");
  const std::size_t n = s.n_sites, m = simulated_nongrazed(s);
  const double phi = false_flag_probability(s);
  const auto fixed_tp = static_cast<std::size_t>(std::llround(s.nongrazed() * s.recall_no));
  const auto fixed_flagged = static_cast<std::size_t>(std::llround(expected_flagged(s)));
  if (model == FlagModel::fixed_counts && (fixed_tp > m || fixed_flagged < fixed_tp || fixed_flagged - fixed_tp > n - m))
    throw ScenarioError("monte_carlo: rounded flag counts are inconsistent with the population");

  std::vector<double> found(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    Rng rng = make_rng(seed, {0x3C4AULL, t});
    if (policy == VisitPolicy::random) {
      found[t] = static_cast<double>(detail::hypergeometric(rng, m, n, visits));
      return;
    }
    std::size_t tp, fp;
    if (model == FlagModel::bernoulli) {
      tp = detail::binomial(rng, m, s.recall_no);
      fp = detail::binomial(rng, n - m, phi);
    } else {
      tp = fixed_tp;
      fp = fixed_flagged - fixed_tp;
    }
    const std::size_t flagged = tp + fp;
    const std::size_t first = std::min(visits, flagged);
    std::size_t hits = detail::hypergeometric(rng, tp, flagged, first);
    if (visits > flagged) hits += detail::hypergeometric(rng, m - tp, n - flagged, visits - flagged);
    found[t] = static_cast<double>(hits);
  });

  double sum = 0.0;
  for (double f : found) sum += f;
  const double mean = sum / static_cast<double>(trials);
  double ss = 0.0;
  for (double f : found) ss += (f - mean) * (f - mean);
  const double var = trials > 1 ? ss / static_cast<double>(trials - 1) : 0.0;
  return {mean, std::sqrt(var / static_cast<double>(trials)), trials};
}

/// Exact expectation of the Bernoulli-flag simulation, summing over the
/// binomial true- and false-positive counts (terms below 1e-300 dropped).
inline double bernoulli_model_expectation(const InspectionScenario& s, std::size_t visits) {
  s.validate();
  const std::size_t n = s.n_sites, m = simulated_nongrazed(s);
  const double phi = false_flag_probability(s);
  auto log_pmf = [](std::size_t k, std::size_t trials, double p) {
    if (p <= 0.0) return k == 0 ? 0.0 : -INFINITY;
    if (p >= 1.0) return k == trials ? 0.0 : -INFINITY;
    const double kk = static_cast<double>(k), nn = static_cast<double>(trials);
    return std::lgamma(nn + 1) - std::lgamma(kk + 1) - std::lgamma(nn - kk + 1) + kk * std::log(p) +
           (nn - kk) * std::log1p(-p);
  };
  std::vector<double> p_fp(n - m + 1);
  for (std::size_t k = 0; k <= n - m; ++k) p_fp[k] = std::exp(log_pmf(k, n - m, phi));
  const double v = static_cast<double>(visits);
  double total = 0.0;
  for (std::size_t tp = 0; tp <= m; ++tp) {
    const double ptp = std::exp(log_pmf(tp, m, s.recall_no));
    if (ptp < 1e-300) continue;
    for (std::size_t fp = 0; fp <= n - m; ++fp) {
      if (p_fp[fp] < 1e-300) continue;
      const double flagged = static_cast<double>(tp + fp);
      double e = 0.0;
      if (flagged > 0.0) e += std::min(v, flagged) * static_cast<double>(tp) / flagged;
      if (v > flagged) e += (v - flagged) * static_cast<double>(m - tp) / (static_cast<double>(n) - flagged);
      total += ptp * p_fp[fp] * e;
    }
  }
  return total;
}

}  // namespace grazing
