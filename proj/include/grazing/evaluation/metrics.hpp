#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/types.hpp"

namespace grazing {

/// Counts with grazing as the positive class.
struct ConfusionMatrix {
  std::size_t tp = 0;  // grazing predicted grazing
  std::size_t fn = 0;  // grazing predicted no activity
  std::size_t fp = 0;  // no activity predicted grazing
  std::size_t tn = 0;

  std::size_t total() const { return tp + fn + fp + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
  double acc = 0, f1 = 0, prec = 0, rec = 0;
  double prec_gz = 0, prec_no = 0, rec_gz = 0, rec_no = 0;
  bool zero_division = false;  // a class was never predicted; its precision was set to 0

  /// Report column order.
  std::array<double, 8> columns() const { return {acc, f1, prec, rec, prec_gz, prec_no, rec_gz, rec_no}; }
  static MetricsReport from_columns(const std::array<double, 8>& c) {
    return {c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], false};
  }
};

inline constexpr std::array<const char*, 8> kMetricColumns = {"Acc",     "F1",      "Prec",   "Rec",
                                                              "Prec-gz", "Prec-no", "Rec-gz", "Rec-no"};
inline constexpr std::array<const char*, 8> kMetricKeys = {"acc",     "f1",      "prec",   "rec",
                                                           "prec_gz", "prec_no", "rec_gz", "rec_no"};

class MetricsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> labels) {
  if (predictions.size() != labels.size())
    throw MetricsError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                       std::to_string(labels.size()) + " labels");
  if (labels.empty()) throw MetricsError("confusion: no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == Label::grazing, pred = predictions[i] == Label::grazing;
    if (truth && pred) ++cm.tp;
    else if (truth) ++cm.fn;
    else if (pred) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

inline MetricsReport metrics(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0) throw MetricsError("metrics: no grazing samples in ground truth");
  if (cm.fp + cm.tn == 0) throw MetricsError("metrics: no no-activity samples in ground truth");
  MetricsReport r;
  auto ratio = [&](std::size_t num, std::size_t den) {
    if (den == 0) {
      r.zero_division = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  auto harmonic = [](double p, double q) { return p + q == 0.0 ? 0.0 : 2.0 * p * q / (p + q); };
  r.acc = ratio(cm.tp + cm.tn, cm.total());
  r.prec_gz = ratio(cm.tp, cm.tp + cm.fp);
  r.prec_no = ratio(cm.tn, cm.tn + cm.fn);
  r.rec_gz = ratio(cm.tp, cm.tp + cm.fn);
  r.rec_no = ratio(cm.tn, cm.tn + cm.fp);
  r.prec = 0.5 * (r.prec_gz + r.prec_no);
  r.rec = 0.5 * (r.rec_gz + r.rec_no);
  r.f1 = 0.5 * (harmonic(r.prec_gz, r.rec_gz) + harmonic(r.prec_no, r.rec_no));
  return r;
}

struct AggregateReport {
  MetricsReport mean;
  MetricsReport median;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw MetricsError("median of empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline AggregateReport aggregate(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw MetricsError("aggregate: no reports");
  std::array<double, 8> mean{}, median{};
  for (std::size_t k = 0; k < 8; ++k) {
    std::vector<double> col;
    double sum = 0.0;
    for (const auto& r : reports) {
      col.push_back(r.columns()[k]);
      sum += r.columns()[k];
    }
    mean[k] = sum / static_cast<double>(reports.size());
    median[k] = median_of(std::move(col));
  }
  AggregateReport a{MetricsReport::from_columns(mean), MetricsReport::from_columns(median)};
  for (const auto& r : reports) a.mean.zero_division = a.median.zero_division = a.mean.zero_division || r.zero_division;
  return a;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j;
  const auto c = r.columns();
  for (std::size_t k = 0; k < 8; ++k) j[kMetricKeys[k]] = c[k];
  j["zero_division"] = r.zero_division;
  return j;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fn", cm.fn}, {"fp", cm.fp}, {"tn", cm.tn}};
}

inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string metrics_csv_header() {
  std::string s = "row";
  for (auto c : kMetricColumns) s += std::string(",") + c;
  return s + "\n";
}

inline std::string metrics_csv_row(const std::string& name, const MetricsReport& r) {
  std::string s = name;
  for (double v : r.columns()) s += "," + format_metric(v);
  return s + "\n";
}

/// One row per split followed by Mean and Median rows.
inline std::string metrics_table_csv(std::span<const MetricsReport> splits) {
  std::string out = metrics_csv_header();
  for (std::size_t i = 0; i < splits.size(); ++i) out += metrics_csv_row("Split #" + std::to_string(i + 1), splits[i]);
  const auto agg = aggregate(splits);
  out += metrics_csv_row("Mean", agg.mean);
  out += metrics_csv_row("Median", agg.median);
  return out;
}

}  // namespace grazing
