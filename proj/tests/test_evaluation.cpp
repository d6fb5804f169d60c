#include <algorithm>
#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "grazing/evaluation/evaluate.hpp"
#include "grazing/model/params.hpp"
#include "support.hpp"

using namespace grazing;

namespace {

std::pair<std::vector<Label>, std::vector<Label>> expand(std::size_t tp, std::size_t fn, std::size_t fp,
                                                         std::size_t tn) {
  std::vector<Label> pred, truth;
  auto add = [&](std::size_t n, Label t, Label p) {
    for (std::size_t i = 0; i < n; ++i) {
      truth.push_back(t);
      pred.push_back(p);
    }
  };
  add(tp, Label::grazing, Label::grazing);
  add(fn, Label::grazing, Label::no_activity);
  add(fp, Label::no_activity, Label::grazing);
  add(tn, Label::no_activity, Label::no_activity);
  return {pred, truth};
}

bool matches(const MetricsReport& r, const std::array<double, 8>& row, double tol) {
  const auto c = r.columns();
  for (std::size_t k = 0; k < 8; ++k)
    if (std::abs(c[k] - row[k]) > tol) return false;
  return true;
}

// Reference cross-validation rows: Acc, F1, Prec, Rec, Prec-gz, Prec-no, Rec-gz, Rec-no.
const std::array<std::array<double, 8>, 5> kSplitRows{{
    {0.797, 0.794, 0.810, 0.795, 0.750, 0.870, 0.900, 0.690},
    {0.770, 0.765, 0.791, 0.768, 0.718, 0.864, 0.903, 0.633},
    {0.772, 0.771, 0.780, 0.773, 0.727, 0.833, 0.857, 0.690},
    {0.733, 0.729, 0.751, 0.733, 0.684, 0.818, 0.867, 0.600},
    {0.807, 0.801, 0.817, 0.798, 0.778, 0.857, 0.903, 0.692},
}};

MetricsReport report_with_acc(double acc) {
  MetricsReport r;
  r.acc = acc;
  return r;
}

}  // namespace

TEST(Confusion, Accounting) {
  auto [pred, truth] = expand(27, 3, 9, 20);
  const auto cm = confusion(pred, truth);
  EXPECT_EQ(cm.tp, 27u);
  EXPECT_EQ(cm.fn, 3u);
  EXPECT_EQ(cm.fp, 9u);
  EXPECT_EQ(cm.tn, 20u);
  EXPECT_EQ(cm.total(), 59u);

  const auto perfect = confusion(truth, truth);
  EXPECT_EQ(perfect.fn + perfect.fp, 0u);
  std::vector<Label> flipped;
  for (auto l : truth) flipped.push_back(l == Label::grazing ? Label::no_activity : Label::grazing);
  const auto anti = confusion(flipped, truth);
  EXPECT_EQ(anti.tp + anti.tn, 0u);

  EXPECT_THROW(confusion(std::vector<Label>{Label::grazing}, std::vector<Label>{}), MetricsError);
  EXPECT_THROW(confusion(std::vector<Label>{}, std::vector<Label>{}), MetricsError);
}

TEST(Metrics, FirstSplitRow) {
  const auto r = metrics(ConfusionMatrix{27, 3, 9, 20});
  EXPECT_TRUE(matches(r, kSplitRows[0], 0.0005));
  EXPECT_NEAR(r.acc, 47.0 / 59.0, 1e-15);
  EXPECT_NEAR(r.prec_gz, 0.75, 1e-15);
  EXPECT_FALSE(r.zero_division);
}

TEST(Metrics, EveryPublishedRowHasAConfusionMatrix) {
  for (std::size_t row = 0; row < kSplitRows.size(); ++row) {
    bool found = false;
    for (std::size_t gz = 1; gz <= 60 && !found; ++gz)
      for (std::size_t no = 1; no <= 60 && !found; ++no)
        for (std::size_t tp = 0; tp <= gz && !found; ++tp) {
          if (std::abs(static_cast<double>(tp) / gz - kSplitRows[row][6]) > 0.0005) continue;
          for (std::size_t tn = 0; tn <= no && !found; ++tn)
            found = matches(metrics(ConfusionMatrix{tp, gz - tp, no - tn, tn}), kSplitRows[row], 0.0005);
        }
    EXPECT_TRUE(found) << "split #" << row + 1;
  }
}

TEST(Metrics, PerfectAndZeroDivision) {
  const auto p = metrics(ConfusionMatrix{5, 0, 0, 7});
  for (double v : p.columns()) EXPECT_DOUBLE_EQ(v, 1.0);
  const auto all_gz = metrics(ConfusionMatrix{5, 0, 7, 0});
  EXPECT_TRUE(all_gz.zero_division);
  EXPECT_EQ(all_gz.prec_no, 0.0);
  EXPECT_THROW(metrics(ConfusionMatrix{0, 0, 3, 4}), MetricsError);
  EXPECT_THROW(metrics(ConfusionMatrix{3, 4, 0, 0}), MetricsError);
}

TEST(Metrics, ClassSwapSymmetryAndBounds) {
  Rng rng = make_rng(11);
  for (int k = 0; k < 200; ++k) {
    const ConfusionMatrix cm{1 + uniform_index(rng, 30), uniform_index(rng, 30), uniform_index(rng, 30),
                             1 + uniform_index(rng, 30)};
    const ConfusionMatrix swapped{cm.tn, cm.fp, cm.fn, cm.tp};
    const auto a = metrics(cm), b = metrics(swapped);
    EXPECT_DOUBLE_EQ(a.acc, b.acc);
    EXPECT_DOUBLE_EQ(a.prec, b.prec);
    EXPECT_DOUBLE_EQ(a.rec, b.rec);
    EXPECT_DOUBLE_EQ(a.f1, b.f1);
    EXPECT_DOUBLE_EQ(a.prec_gz, b.prec_no);
    EXPECT_DOUBLE_EQ(a.rec_gz, b.rec_no);
    for (double v : a.columns()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    const double f1_gz = a.prec_gz + a.rec_gz > 0 ? 2 * a.prec_gz * a.rec_gz / (a.prec_gz + a.rec_gz) : 0.0;
    EXPECT_LE(f1_gz, std::max(a.prec_gz, a.rec_gz) + 1e-15);
    EXPECT_NEAR(a.prec, 0.5 * (a.prec_gz + a.prec_no), 1e-15);
  }
}

TEST(Aggregate, PublishedAccuracyColumn) {
  std::vector<MetricsReport> rows;
  for (double a : {0.797, 0.770, 0.772, 0.733, 0.807}) rows.push_back(report_with_acc(a));
  const auto agg = aggregate(rows);
  EXPECT_NEAR(agg.mean.acc, 0.776, 0.0005);
  EXPECT_DOUBLE_EQ(agg.median.acc, 0.772);
  std::reverse(rows.begin(), rows.end());
  EXPECT_DOUBLE_EQ(aggregate(rows).mean.acc, agg.mean.acc);
  EXPECT_DOUBLE_EQ(median_of({1.0, 4.0, 2.0, 3.0}), 2.5);
}

TEST(Aggregate, SingleReportAndEmpty) {
  const auto r = metrics(ConfusionMatrix{27, 3, 9, 20});
  const auto agg = aggregate(std::vector<MetricsReport>{r});
  EXPECT_EQ(agg.mean.columns(), r.columns());
  EXPECT_EQ(agg.median.columns(), r.columns());
  EXPECT_THROW(aggregate(std::vector<MetricsReport>{}), MetricsError);
}

TEST(Csv, ColumnOrderAndRows) {
  EXPECT_EQ(metrics_csv_header(), "row,Acc,F1,Prec,Rec,Prec-gz,Prec-no,Rec-gz,Rec-no\n");
  EXPECT_EQ(metrics_csv_row("Split #1", metrics(ConfusionMatrix{27, 3, 9, 20})),
            "Split #1,0.797,0.794,0.810,0.795,0.750,0.870,0.900,0.690\n");
  std::vector<MetricsReport> rows(5, metrics(ConfusionMatrix{27, 3, 9, 20}));
  const auto csv = metrics_table_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
  EXPECT_NE(csv.find("\nMedian,"), std::string::npos);
}

TEST(Evaluate, ZeroHeadVotesGrazingEverywhere) {
  ModelConfig c = configure_ablation("main");
  EnsembleParams ens{c, {}};
  for (std::uint64_t s = 0; s < 3; ++s) {
    auto p = init_params(c, s);
    p.head_weights.fill(0.0);
    p.head_bias.fill(0.0);
    ens.members.push_back(std::move(p));
  }
  std::vector<SampleTimeSeries> samples;
  for (std::uint64_t s = 0; s < 4; ++s) {
    samples.push_back(test::make_sample(3, s));
    samples.back().label = s % 2 ? Label::grazing : Label::no_activity;
  }
  const auto stats = compute_channel_stats(samples);
  const auto r = evaluate_ensemble(samples, stats, ens, 2);
  EXPECT_EQ(r.confusion.tp, 2u);
  EXPECT_EQ(r.confusion.fp, 2u);
  EXPECT_TRUE(r.report.zero_division);
  EXPECT_EQ(r.member_reports.size(), 3u);
  EXPECT_DOUBLE_EQ(mean_member_f1(r), r.report.f1);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("metrics"));
  EXPECT_THROW(evaluate_ensemble({}, stats, ens), MetricsError);
}
