#include <cmath>

#include <gtest/gtest.h>

#include "grazing/planner/planner.hpp"

using namespace grazing;

namespace {

const InspectionScenario kDefault{};

InspectionScenario scenario(double q, double pi, double rho, std::size_t n = 10000) {
  return InspectionScenario{n, q, pi, rho};
}

}  // namespace

TEST(Planner, ExpectedFlagged) {
  EXPECT_NEAR(expected_flagged(kDefault), 500.0 * 0.69 / 0.86, 1e-9);
  EXPECT_EQ(std::lround(expected_flagged(kDefault)), 401);
  EXPECT_DOUBLE_EQ(expected_flagged(scenario(0.05, 1.0, 1.0)), 500.0);
  EXPECT_DOUBLE_EQ(expected_flagged(scenario(0.05, 0.86, 0.0)), 0.0);
}

TEST(Planner, PublishedDiscoveries) {
  EXPECT_EQ(std::lround(expected_found(kDefault, VisitPolicy::targeted, 401)), 345);
  EXPECT_NEAR(expected_found(kDefault, VisitPolicy::targeted, 100), 86.0, 1e-9);
  EXPECT_NEAR(expected_found(kDefault, VisitPolicy::random, 100), 5.0, 1e-12);
  EXPECT_NEAR(expected_found(kDefault, VisitPolicy::random, 401), 20.05, 1e-12);
  EXPECT_NEAR(100.0 * expected_found(kDefault, VisitPolicy::targeted, 100) / 500.0, 17.2, 1e-9);
  EXPECT_THROW(expected_found(kDefault, VisitPolicy::random, -1), ScenarioError);
  EXPECT_THROW(expected_found(kDefault, VisitPolicy::random, 10001), ScenarioError);
}

TEST(Planner, AdvantagePlateau) {
  EXPECT_NEAR(advantage_ratio(kDefault, 0.01), 17.2, 1e-12);
  const double knee = expected_flagged(kDefault) / 10000.0;
  for (int k = 1; k <= 400; ++k) {
    const double p = k * 1e-4;
    if (p > knee) break;
    EXPECT_NEAR(advantage_ratio(kDefault, p), 0.86 / 0.05, 1e-12);
  }
  EXPECT_NEAR(advantage_ratio(kDefault, 1.0), 1.0, 1e-12);
  EXPECT_THROW(advantage_ratio(kDefault, 0.0), ScenarioError);
}

TEST(Planner, RatioNonIncreasing) {
  double prev = INFINITY;
  for (int k = 1; k <= 2000; ++k) {
    const double r = advantage_ratio(kDefault, k / 2000.0);
    EXPECT_LE(r, prev + 1e-12);
    prev = r;
  }
}

TEST(Planner, MonotoneInVisitsRecallPrecision) {
  for (auto policy : {VisitPolicy::random, VisitPolicy::targeted}) {
    double prev = -1;
    for (int v = 0; v <= 10000; v += 25) {
      const double f = expected_found(kDefault, policy, v);
      EXPECT_GE(f, prev - 1e-12);
      prev = f;
    }
  }
  for (double v : {50.0, 401.0, 1000.0, 5000.0}) {
    double prev = -1;
    for (int k = 0; k <= 20; ++k) {
      const double f = expected_found(scenario(0.05, 0.86, k / 20.0), VisitPolicy::targeted, v);
      EXPECT_GE(f, prev - 1e-12) << "rho " << k / 20.0 << " V " << v;
      prev = f;
    }
    prev = -1;
    for (int k = 1; k <= 20; ++k) {
      const double pi = 0.05 + 0.95 * k / 20.0;
      const double f = expected_found(scenario(0.05, pi, 0.69), VisitPolicy::targeted, v);
      EXPECT_GE(f, prev - 1e-12) << "pi " << pi << " V " << v;
      prev = f;
    }
  }
}

TEST(Planner, UninformativeClassifierIsRandom) {
  for (double rho : {0.1, 0.5, 0.9})
    for (double v : {10.0, 500.0, 7000.0}) {
      const auto s = scenario(0.05, 0.05, rho);
      EXPECT_NEAR(expected_found(s, VisitPolicy::targeted, v), expected_found(s, VisitPolicy::random, v), 1e-9);
    }
}

TEST(Planner, ScenarioValidation) {
  EXPECT_THROW(expected_flagged(scenario(0.0, 0.86, 0.69)), ScenarioError);
  EXPECT_THROW(expected_flagged(scenario(0.05, 0.0, 0.69)), ScenarioError);
  EXPECT_THROW(expected_flagged(scenario(0.05, 0.86, 1.5)), ScenarioError);
  EXPECT_THROW(expected_flagged(scenario(0.5, 0.2, 0.9, 10)), ScenarioError);
  EXPECT_THROW(expected_flagged(scenario(0.05, 0.86, 0.69, 10)), ScenarioError);
  const auto s = scenario_from_json({{"n_sites", 200}, {"nongrazed_fraction", 0.1}, {"precision_no", 0.5},
                                     {"recall_no", 0.4}});
  EXPECT_EQ(s.n_sites, 200u);
  EXPECT_DOUBLE_EQ(s.recall_no, 0.4);
}

TEST(Curve, KneeSlopesAndEndpoints) {
  const auto grid = default_grid();
  ASSERT_EQ(grid.size(), 200u);
  const auto c = emit_curve(kDefault, grid);
  EXPECT_NEAR(c.points.back().random_pct, 100.0, 1e-9);
  EXPECT_NEAR(c.points.back().targeted_pct, 100.0, 1e-9);
  for (const auto& pt : c.points) {
    EXPECT_NEAR(pt.random_pct, 100.0 * pt.p, 1e-9);
    EXPECT_GE(pt.targeted_pct, pt.random_pct - 1e-9);
  }

  const double n = 10000, qn = 500, f = expected_flagged(kDefault), knee = f / n;
  const double before = 0.86 * n / qn * 100.0;
  const double after = (qn - qn * 0.69) / qn * n / (n - f) * 100.0;
  std::vector<double> fine{knee - 0.002, knee - 0.001, knee + 0.001, knee + 0.002};
  const auto k = emit_curve(kDefault, fine);
  EXPECT_NEAR((k.points[1].targeted_pct - k.points[0].targeted_pct) / 0.001, before, 1e-6);
  EXPECT_NEAR((k.points[3].targeted_pct - k.points[2].targeted_pct) / 0.001, after, 1e-6);
}

TEST(Curve, CsvAndGridValidation) {
  std::vector<double> grid{0.01, 0.5, 1.0};
  const auto csv = curve_csv(emit_curve(kDefault, grid));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "p,random_pct,targeted_pct,ratio");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("0.010000,1.000000,17.200000,17.200000"), std::string::npos);
  std::vector<double> unsorted{0.5, 0.1};
  EXPECT_THROW(emit_curve(kDefault, unsorted), ScenarioError);
  std::vector<double> zero{0.0, 0.1};
  EXPECT_THROW(emit_curve(kDefault, zero), ScenarioError);
}

TEST(MonteCarlo, ClosedFormBeforeKnee) {
  const auto r = monte_carlo(kDefault, VisitPolicy::targeted, 100, 100000, 1);
  EXPECT_NEAR(r.mean, 86.0, 0.86);
  const auto rnd = monte_carlo(kDefault, VisitPolicy::random, 100, 100000, 2);
  EXPECT_NEAR(rnd.mean, 5.0, 3 * rnd.stderr_);
}

TEST(MonteCarlo, MatchesExactSimulationExpectationOnGrid) {
  for (std::size_t v : {50u, 200u, 380u, 401u, 420u, 1000u, 3000u, 6000u, 9500u}) {
    const auto r = monte_carlo(kDefault, VisitPolicy::targeted, v, 4000, 10 + v);
    EXPECT_NEAR(r.mean, bernoulli_model_expectation(kDefault, v), 3 * r.stderr_) << "V " << v;
    const auto rnd = monte_carlo(kDefault, VisitPolicy::random, v, 4000, 20 + v);
    EXPECT_NEAR(rnd.mean, expected_found(kDefault, VisitPolicy::random, v), 3 * rnd.stderr_ + 1e-9) << "V " << v;
  }
}

TEST(MonteCarlo, FixedCountsAwayFromKnee) {
  for (std::size_t v : {100u, 2000u}) {
    const auto r = monte_carlo(kDefault, VisitPolicy::targeted, v, 4000, 30 + v, FlagModel::fixed_counts);
    const double tp = 345, flagged = 401;
    const double exact = v <= flagged ? v * tp / flagged : tp + (v - flagged) * (500 - tp) / (10000 - flagged);
    EXPECT_NEAR(r.mean, exact, 3 * r.stderr_) << "V " << v;
  }
}

TEST(MonteCarlo, PerfectClassifierFindsEverything) {
  const auto s = scenario(0.05, 1.0, 1.0);
  const auto r = monte_carlo(s, VisitPolicy::targeted, 500, 200, 3);
  EXPECT_DOUBLE_EQ(r.mean, 500.0);
  EXPECT_DOUBLE_EQ(r.stderr_, 0.0);
}

TEST(MonteCarlo, StderrScalesAndDeterminism) {
  const auto small = monte_carlo(kDefault, VisitPolicy::targeted, 1000, 1000, 4);
  const auto large = monte_carlo(kDefault, VisitPolicy::targeted, 1000, 100000, 4);
  EXPECT_NEAR(small.stderr_ / large.stderr_, 10.0, 1.5);
  const auto again = monte_carlo(kDefault, VisitPolicy::targeted, 1000, 1000, 4, FlagModel::bernoulli, 3);
  EXPECT_EQ(again.mean, small.mean);
  EXPECT_EQ(again.stderr_, small.stderr_);
  EXPECT_THROW(monte_carlo(kDefault, VisitPolicy::targeted, 10, 0, 1), ScenarioError);
  EXPECT_THROW(monte_carlo(kDefault, VisitPolicy::targeted, 10001, 10, 1), ScenarioError);
}
