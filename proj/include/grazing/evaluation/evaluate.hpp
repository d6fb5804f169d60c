#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "grazing/dataset/types.hpp"
#include "grazing/evaluation/metrics.hpp"
#include "grazing/model/network.hpp"
#include "grazing/training/trainer.hpp"

namespace grazing {

struct EvaluationResult {
  std::vector<std::string> site_ids;
  std::vector<Label> labels;
  std::vector<Label> predictions;                  // ensemble vote
  std::vector<std::vector<Label>> member_predictions;  // [member][sample]
  ConfusionMatrix confusion;
  MetricsReport report;
  std::vector<MetricsReport> member_reports;
};

/// Ensemble and per-member predictions over `samples`; parallel over samples.
inline EvaluationResult evaluate_ensemble(std::span<const SampleTimeSeries> samples, const ChannelStats& stats,
                                         const EnsembleParams& ensemble, std::size_t threads = 1) {
  if (samples.empty()) throw MetricsError("evaluate: no samples");
  const std::size_t n = samples.size(), m = ensemble.members.size();
  EvaluationResult r;
  r.predictions.resize(n);
  r.member_predictions.assign(m, std::vector<Label>(n));
  parallel_for(n, threads, [&](std::size_t i) {
    const auto input = make_model_input(samples[i], stats, ensemble.config);
    const auto d = predict_ensemble_detailed(input, ensemble);
    r.predictions[i] = d.label;
    for (std::size_t k = 0; k < m; ++k) r.member_predictions[k][i] = d.member_votes[k];
  });
  for (const auto& s : samples) {
    r.site_ids.push_back(s.site_id);
    r.labels.push_back(s.label);
  }
  r.confusion = confusion(r.predictions, r.labels);
  r.report = metrics(r.confusion);
  for (const auto& preds : r.member_predictions) r.member_reports.push_back(metrics(confusion(preds, r.labels)));
  return r;
}

inline double mean_member_f1(const EvaluationResult& r) {
  if (r.member_reports.empty()) return 0.0;
  double s = 0.0;
  for (const auto& m : r.member_reports) s += m.f1;
  return s / static_cast<double>(r.member_reports.size());
}

inline nlohmann::json to_json(const EvaluationResult& r) {
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : r.member_reports) members.push_back(to_json(m));
  nlohmann::json preds = nlohmann::json::array();
  for (std::size_t i = 0; i < r.site_ids.size(); ++i)
    preds.push_back({{"site_id", r.site_ids[i]},
                     {"label", label_name(r.labels[i])},
                     {"prediction", label_name(r.predictions[i])}});
  return {{"metrics", to_json(r.report)},
          {"confusion", to_json(r.confusion)},
          {"member_metrics", members},
          {"mean_member_f1", mean_member_f1(r)},
          {"predictions", preds}};
}

}  // namespace grazing
