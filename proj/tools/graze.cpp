// graze: command-line front end for data generation, training, evaluation,
// cross-validation, inspection planning and the gradient oracle suite.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "grazing/dataset/io.hpp"
#include "grazing/dataset/split.hpp"
#include "grazing/dataset/synth.hpp"
#include "grazing/evaluation/evaluate.hpp"
#include "grazing/evaluation/metrics.hpp"
#include "grazing/model/checkpoint.hpp"
#include "grazing/model/gradient_suite.hpp"
#include "grazing/planner/planner.hpp"
#include "grazing/training/crossval.hpp"
#include "grazing/training/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace grazing;

namespace {

constexpr const char* kToolVersion = "1.0.0";

/// Failure with a machine-parsable code; printed as "error[CODE]: message".
struct CliError : std::runtime_error {
  std::string code;
  int exit_code;
  CliError(std::string c, int e, const std::string& msg) : std::runtime_error(msg), code(std::move(c)), exit_code(e) {}
};

CliError config_error(const std::string& msg) { return {"E_CONFIG", 3, msg}; }

int verbosity = 1;

void info(const std::string& msg) {
  if (verbosity > 0) std::cerr << msg << '\n';
}

std::size_t resolve_threads(std::size_t flag) {
  if (const char* env = std::getenv("GRAZE_THREADS"); env && *env) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw config_error("GRAZE_THREADS must be a positive integer, got '" + std::string(env) + "'");
    return static_cast<std::size_t>(v);
  }
  if (flag < 1) throw config_error("--threads must be at least 1");
  return flag;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("short write to " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

void write_sidecar(const fs::path& path, const std::string& subcommand, const json& config) {
  write_json(path, {{"tool", "graze"}, {"version", kToolVersion}, {"subcommand", subcommand}, {"config", config}});
}

fs::path sidecar_for_file(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

// ---------------------------------------------------------------------------
// Shared training flags
// ---------------------------------------------------------------------------

struct TrainFlags {
  std::uint64_t seed = 0;
  std::size_t epochs = 300;
  std::size_t batch_size = 10;
  double learning_rate = 3e-4;
  std::size_t members = 10;
  std::string ablation = "main";
  std::size_t threads = 1;
  bool no_augment = false, no_flip = false, no_crop = false, no_temporal_dropout = false;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "Base seed; member i uses seed + i")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--lr", learning_rate, "Adam learning rate")->capture_default_str();
    app->add_option("--members", members, "Ensemble size")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--ablation", ablation, "main, only_last, no_poly, poly_input, no_rgb, no_rgb_no_veg, "
                                            "only_rgb_veg, no_temp_aug or single_model")
        ->capture_default_str();
    app->add_option("--threads", threads, "Worker threads (GRAZE_THREADS overrides)")->capture_default_str();
    app->add_flag("--no-augment", no_augment, "Disable all augmentation");
    app->add_flag("--no-flip", no_flip, "Disable random flips");
    app->add_flag("--no-crop", no_crop, "Disable random crops");
    app->add_flag("--no-temporal-dropout", no_temporal_dropout, "Disable temporal dropout");
  }

  RunSetup resolve() const {
    TrainConfig t;
    t.epochs = epochs;
    t.batch_size = batch_size;
    t.learning_rate = learning_rate;
    t.member_count = members;
    t.base_seed = seed;
    t.threads = resolve_threads(threads);
    if (no_augment || no_flip) t.flip_enabled = false;
    if (no_augment || no_crop) t.crop_enabled = false;
    if (no_augment || no_temporal_dropout) t.temporal_dropout_enabled = false;
    RunSetup setup = configure_run(ablation, t);
    setup.train.validate();
    return setup;
  }
};

EpochCallback progress_callback() {
  if (verbosity < 2) return {};
  return [](std::uint64_t seed, const EpochRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "member seed %llu epoch %zu loss %.4f acc %.3f (%.1fs)",
                  static_cast<unsigned long long>(seed), r.epoch, r.mean_loss, r.accuracy, r.seconds);
    info(buf);
  };
}

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

struct GenFlags {
  std::string out;
  std::size_t n = 407;
  double balance = 253.0 / 407.0;
  std::uint64_t seed = 0;
  double difficulty = 0.5;
  int cadence = 5;
  int cadence_jitter = 2;
  double cloud_prob = 0.3;
  double noise = 0.02;
  std::size_t sites_per_cluster = 1;
  double year_2022 = 108.0 / 407.0;
};

void cmd_gen_data(const GenFlags& f) {
  SynthConfig cfg;
  cfg.samples = f.n;
  cfg.grazing_fraction = f.balance;
  cfg.difficulty = f.difficulty;
  cfg.cadence_days = f.cadence;
  cfg.cadence_jitter = f.cadence_jitter;
  cfg.cloud_probability = f.cloud_prob;
  cfg.noise = f.noise;
  cfg.sites_per_cluster = f.sites_per_cluster;
  cfg.year_2022_fraction = f.year_2022;
  try {
    cfg.validate();
  } catch (const DataError& ex) {
    throw config_error(ex.what());
  }

  const fs::path dir = f.out;
  fs::create_directories(dir);
  DatasetManifest manifest;
  manifest.generator_config = to_json(cfg);
  manifest.seed = f.seed;
  const auto labels = draw_labels(cfg, f.seed);
  std::size_t grazing = 0;
  for (std::size_t i = 0; i < cfg.samples; ++i) {
    const auto site = synth_site(cfg, f.seed, i, labels[i]);
    manifest.samples.push_back(save_sample(site.sample, dir));
    grazing += labels[i] == Label::grazing;
  }
  save_manifest(manifest, dir);
  write_sidecar(dir / "run.json", "gen-data", {{"out", f.out}, {"seed", f.seed}, {"synth", to_json(cfg)}});
  std::cout << "wrote " << cfg.samples << " samples (" << grazing << " grazing, " << cfg.samples - grazing
            << " no activity) to " << dir.string() << '\n';
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCmdFlags {
  std::string data, out;
  TrainFlags train;
  double train_fraction = 0.8;
  std::optional<std::uint64_t> split_seed;
  bool all = false;
};

json ids_json(const std::vector<std::string>& ids) { return json(ids); }

void cmd_train(const TrainCmdFlags& f) {
  const auto setup = f.train.resolve();
  const auto data = load_prepared(f.data);
  if (data.samples.empty()) throw CliError("E_DATA", 6, "no usable samples in " + f.data);
  const std::uint64_t split_seed = f.split_seed.value_or(f.train.seed);

  TrainValSplit split;
  if (f.all) {
    for (const auto& e : data.manifest.samples) split.train.push_back(e.site_id);
  } else {
    split = split_train_val(data.manifest, f.train_fraction, split_seed);
  }
  const auto train = select_samples(data, split.train);
  if (train.empty()) throw CliError("E_DATA", 6, "training split has no usable samples");
  const auto stats = compute_channel_stats(train);
  info("training " + std::to_string(setup.train.member_count) + " member(s) on " + std::to_string(train.size()) +
       " samples for " + std::to_string(setup.train.epochs) + " epochs");
  auto result = train_ensemble(train, stats, setup.model, setup.train, progress_callback());

  json resolved{{"data", f.data},
                {"out", f.out},
                {"ablation", f.train.ablation},
                {"model", to_json(setup.model)},
                {"train", to_json(setup.train)},
                {"train_fraction", f.all ? 1.0 : f.train_fraction},
                {"split_seed", split_seed},
                {"train_on_all", f.all}};
  json train_cfg = to_json(setup.train);
  train_cfg.erase("threads");  // thread count must not change checkpoint bytes

  Checkpoint ckpt{result.ensemble, stats,
                  {{"train_config", train_cfg},
                   {"split_seed", split_seed},
                   {"train_fraction", f.all ? 1.0 : f.train_fraction},
                   {"train_ids", ids_json(split.train)},
                   {"val_ids", ids_json(split.val)},
                   {"rejected", ids_json(data.rejected)}}};
  const fs::path out = f.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(ckpt, out);

  json logs = json::array();
  for (const auto& l : result.logs) logs.push_back(to_json(l));
  write_json(fs::path(f.out + ".log.json"), {{"members", logs}});
  write_sidecar(sidecar_for_file(out), "train", resolved);

  double final_loss = 0.0;
  for (const auto& l : result.logs) final_loss += l.epochs.back().mean_loss;
  char buf[160];
  std::snprintf(buf, sizeof buf, "saved %zu-member checkpoint to %s (mean final-epoch loss %.4f)",
                result.ensemble.members.size(), f.out.c_str(), final_loss / static_cast<double>(result.logs.size()));
  std::cout << buf << '\n';
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalFlags {
  std::string checkpoint, data, split = "val", out, csv;
  std::size_t threads = 1;
};

void cmd_eval(const EvalFlags& f) {
  const std::size_t threads = resolve_threads(f.threads);
  if (!fs::exists(f.checkpoint)) throw IoError("checkpoint not found: " + f.checkpoint);
  const auto ckpt = load_checkpoint(f.checkpoint);
  const auto data = load_prepared(f.data);
  if (data.samples.empty()) throw CliError("E_DATA", 6, "no usable samples in " + f.data);
  check_compatible(ckpt, data.samples.front());

  std::vector<std::string> ids;
  if (f.split == "all") {
    for (const auto& e : data.manifest.samples) ids.push_back(e.site_id);
  } else if (f.split == "train" || f.split == "val") {
    const auto key = f.split + "_ids";
    if (!ckpt.metadata.contains(key)) throw config_error("checkpoint records no '" + f.split + "' split");
    ids = ckpt.metadata.at(key).get<std::vector<std::string>>();
    if (ids.empty()) throw config_error("checkpoint's '" + f.split + "' split is empty");
  } else {
    throw config_error("--split must be train, val or all");
  }
  const auto samples = select_samples(data, ids);
  if (samples.empty()) throw CliError("E_DATA", 6, "none of the split's sites are usable in " + f.data);
  const auto r = evaluate_ensemble(samples, ckpt.stats, ckpt.ensemble, threads);
  if (r.report.zero_division) info("warning: a class was never predicted; its precision is reported as 0");

  const std::string table = metrics_csv_header() + metrics_csv_row(f.split, r.report);
  std::cout << table;
  json j = to_json(r);
  j["split"] = f.split;
  j["samples"] = samples.size();
  if (!f.out.empty()) write_json(f.out, j);
  if (!f.csv.empty()) write_text(f.csv, table);
  const fs::path side = !f.out.empty() ? sidecar_for_file(f.out)
                        : !f.csv.empty() ? sidecar_for_file(f.csv)
                                         : sidecar_for_file(f.checkpoint + ".eval");
  write_sidecar(side, "eval",
                {{"checkpoint", f.checkpoint}, {"data", f.data}, {"split", f.split}, {"out", f.out}, {"csv", f.csv},
                 {"threads", threads}});
}

// ---------------------------------------------------------------------------
// crossval
// ---------------------------------------------------------------------------

struct CrossvalFlags {
  std::string data, out;
  std::size_t folds = 5;
  double train_fraction = 0.8;
  TrainFlags train;
};

void cmd_crossval(const CrossvalFlags& f) {
  const auto setup = f.train.resolve();
  if (f.folds < 1) throw config_error("--folds must be at least 1");
  const auto data = load_prepared(f.data);
  const auto r = cross_validate(data, setup.model, setup.train, f.folds, f.train_fraction, progress_callback());
  const std::string csv = metrics_table_csv(r.splits);
  std::cout << csv;
  write_text(f.out, csv);
  json splits = json::array();
  for (std::size_t i = 0; i < r.splits.size(); ++i) {
    json s = to_json(r.splits[i]);
    s["mean_member_f1"] = r.mean_member_f1[i];
    splits.push_back(s);
  }
  write_json(fs::path(f.out + ".json"),
             {{"splits", splits}, {"mean", to_json(r.aggregate.mean)}, {"median", to_json(r.aggregate.median)}});
  write_sidecar(sidecar_for_file(f.out), "crossval",
                {{"data", f.data}, {"out", f.out}, {"folds", f.folds}, {"train_fraction", f.train_fraction},
                 {"ablation", f.train.ablation}, {"model", to_json(setup.model)}, {"train", to_json(setup.train)}});
}

// ---------------------------------------------------------------------------
// plan
// ---------------------------------------------------------------------------

struct PlanFlags {
  std::string scenario_file, out, summary, flag_model = "bernoulli";
  std::size_t n_sites = 10000;
  double nongrazed = 0.05, precision = 0.86, recall = 0.69, grid_step = 0.005;
  std::vector<std::size_t> visits{50, 100, 401, 1000};
  std::size_t montecarlo = 0, threads = 1;
  std::uint64_t seed = 0;
  bool n_set = false, q_set = false, p_set = false, r_set = false;
};

void cmd_plan(const PlanFlags& f) {
  InspectionScenario s;
  if (!f.scenario_file.empty()) {
    std::ifstream in(f.scenario_file);
    if (!in) throw IoError("cannot open " + f.scenario_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& ex) {
      throw FormatError(f.scenario_file + ": " + ex.what());
    }
    s = scenario_from_json(j);
  }
  if (f.n_set || f.scenario_file.empty()) s.n_sites = f.n_sites;
  if (f.q_set || f.scenario_file.empty()) s.nongrazed_fraction = f.nongrazed;
  if (f.p_set || f.scenario_file.empty()) s.precision_no = f.precision;
  if (f.r_set || f.scenario_file.empty()) s.recall_no = f.recall;
  s.validate();
  if (!(f.grid_step > 0.0 && f.grid_step <= 1.0)) throw config_error("--grid-step must lie in (0, 1]");
  const FlagModel model = f.flag_model == "bernoulli"      ? FlagModel::bernoulli
                          : f.flag_model == "fixed_counts" ? FlagModel::fixed_counts
                                                           : throw config_error("--flag-model must be bernoulli or fixed_counts");
  const std::size_t threads = resolve_threads(f.threads);

  std::vector<double> grid;
  const auto steps = static_cast<std::size_t>(std::ceil(1.0 / f.grid_step - 1e-9));
  for (std::size_t k = 1; k <= steps; ++k) grid.push_back(std::min(1.0, static_cast<double>(k) * f.grid_step));
  const auto curve = emit_curve(s, grid);
  if (!f.out.empty()) write_text(f.out, curve_csv(curve));

  const double flagged = expected_flagged(s);
  const double n = static_cast<double>(s.n_sites);
  const double p_small = flagged > 0.0 ? std::min(0.01, flagged / n) : 0.01;
  json summary{{"scenario", to_json(s)},
               {"expected_flagged", flagged},
               {"knee_fraction", flagged / n},
               {"small_p", p_small},
               {"advantage_ratio_small_p", advantage_ratio(s, p_small)},
               {"visits", json::array()}};
  char buf[200];
  std::snprintf(buf, sizeof buf, "expected flagged F = %.2f (knee at p = %.4f)\n", flagged, flagged / n);
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "advantage ratio at p = %.4f: %.4f\n", p_small, advantage_ratio(s, p_small));
  std::cout << buf;
  for (std::size_t v : f.visits) {
    if (v > s.n_sites) throw config_error("--visits value " + std::to_string(v) + " exceeds n_sites");
    const double t = expected_found(s, VisitPolicy::targeted, static_cast<double>(v));
    const double r = expected_found(s, VisitPolicy::random, static_cast<double>(v));
    json row{{"V", v}, {"targeted", t}, {"random", r}};
    std::snprintf(buf, sizeof buf, "V=%zu targeted %.3f random %.3f", v, t, r);
    std::string line = buf;
    if (f.montecarlo > 0) {
      const auto mc = monte_carlo(s, VisitPolicy::targeted, v, f.montecarlo, f.seed, model, threads);
      row["montecarlo"] = {{"mean", mc.mean}, {"stderr", mc.stderr_}, {"trials", mc.trials},
                           {"relative_deviation", (mc.mean - t) / t}};
      std::snprintf(buf, sizeof buf, " | montecarlo %.3f +/- %.3f (%+.2f%%)", mc.mean, mc.stderr_,
                    100.0 * (mc.mean - t) / t);
      line += buf;
    }
    std::cout << line << '\n';
    summary["visits"].push_back(row);
  }
  if (!f.summary.empty()) write_json(f.summary, summary);
  const fs::path side = !f.out.empty() ? sidecar_for_file(f.out)
                        : !f.summary.empty() ? sidecar_for_file(f.summary)
                                             : fs::path("graze-plan.run.json");
  write_sidecar(side, "plan",
                {{"scenario", to_json(s)}, {"grid_step", f.grid_step}, {"visits", f.visits},
                 {"montecarlo", f.montecarlo}, {"flag_model", f.flag_model}, {"seed", f.seed},
                 {"out", f.out}, {"summary", f.summary}});
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

struct GradcheckFlags {
  std::size_t seeds = 20;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  std::string out;
};

void cmd_gradcheck(const GradcheckFlags& f) {
  const auto checks = run_gradient_suite(f.seeds, f.seed, f.tolerance);
  std::map<std::string, std::pair<double, bool>> worst;
  std::size_t failed = 0;
  json all = json::array();
  for (const auto& c : checks) {
    auto& w = worst.try_emplace(c.name, 0.0, true).first->second;
    w.first = std::max(w.first, c.result.max_relative_error);
    w.second = w.second && c.passed;
    failed += !c.passed;
    all.push_back(to_json(c));
  }
  char buf[160];
  for (const auto& [name, w] : worst) {
    std::snprintf(buf, sizeof buf, "%-34s max rel err %.3e  %s\n", name.c_str(), w.first, w.second ? "ok" : "FAIL");
    std::cout << buf;
  }
  std::cout << checks.size() - failed << "/" << checks.size() << " checks passed over " << f.seeds << " seeds\n";
  if (!f.out.empty()) write_json(f.out, {{"tolerance", f.tolerance}, {"checks", all}});
  write_sidecar(!f.out.empty() ? sidecar_for_file(f.out) : fs::path("graze-gradcheck.run.json"), "gradcheck",
                {{"seeds", f.seeds}, {"seed", f.seed}, {"tolerance", f.tolerance}, {"out", f.out}});
  if (failed > 0) throw CliError("E_CHECK", 8, std::to_string(failed) + " gradient checks failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grazing detection from satellite image time series"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  int verbose = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "More progress output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic labeled dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n", gen.n, "Number of sites")->capture_default_str();
  gen_cmd->add_option("--balance", gen.balance, "Fraction of grazing sites")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--difficulty", gen.difficulty, "0 = trivially separable, 1 = hardest")->capture_default_str();
  gen_cmd->add_option("--cadence", gen.cadence, "Days between acquisitions")->capture_default_str();
  gen_cmd->add_option("--cadence-jitter", gen.cadence_jitter, "Max jitter in days")->capture_default_str();
  gen_cmd->add_option("--cloud-prob", gen.cloud_prob, "Per-acquisition cloud probability")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Per-pixel index noise")->capture_default_str();
  gen_cmd->add_option("--sites-per-cluster", gen.sites_per_cluster, "Sites sharing a location cluster")
      ->capture_default_str();
  gen_cmd->add_option("--year-2022-frac", gen.year_2022, "Fraction of sites from 2022")->capture_default_str();

  TrainCmdFlags train;
  auto* train_cmd = app.add_subcommand("train", "Train an ensemble and write a checkpoint");
  train_cmd->add_option("--data", train.data, "Dataset directory")->required();
  train_cmd->add_option("--out", train.out, "Checkpoint path")->required();
  train.train.add_to(train_cmd);
  train_cmd->add_option("--train-fraction", train.train_fraction, "Train share of the split")->capture_default_str();
  train_cmd->add_option("--split-seed", train.split_seed, "Split seed (defaults to --seed)");
  train_cmd->add_flag("--all", train.all, "Train on every sample (no validation split)");

  EvalFlags eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", eval.split, "train, val or all")->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "JSON report path");
  eval_cmd->add_option("--csv", eval.csv, "CSV report path");
  eval_cmd->add_option("--threads", eval.threads, "Worker threads (GRAZE_THREADS overrides)")->capture_default_str();

  CrossvalFlags cv;
  auto* cv_cmd = app.add_subcommand("crossval", "Repeated random-split cross-validation");
  cv_cmd->add_option("--data", cv.data, "Dataset directory")->required();
  cv_cmd->add_option("--out", cv.out, "CSV output path")->required();
  cv_cmd->add_option("--folds", cv.folds, "Number of random splits")->capture_default_str();
  cv_cmd->add_option("--train-fraction", cv.train_fraction, "Train share of each split")->capture_default_str();
  cv.train.add_to(cv_cmd);

  PlanFlags plan;
  auto* plan_cmd = app.add_subcommand("plan", "Inspection prioritization curves");
  plan_cmd->add_option("--scenario", plan.scenario_file, "Scenario JSON file");
  auto* n_opt = plan_cmd->add_option("--n-sites", plan.n_sites, "Number of sites")->capture_default_str();
  auto* q_opt = plan_cmd->add_option("--nongrazed-frac", plan.nongrazed, "Fraction of non-grazed sites")
                    ->capture_default_str();
  auto* p_opt = plan_cmd->add_option("--precision-no", plan.precision, "Precision of the no-activity class")
                    ->capture_default_str();
  auto* r_opt = plan_cmd->add_option("--recall-no", plan.recall, "Recall of the no-activity class")
                    ->capture_default_str();
  plan_cmd->add_option("--visits", plan.visits, "Visit counts for the summary")->delimiter(',')->capture_default_str();
  plan_cmd->add_option("--grid-step", plan.grid_step, "Visitation fraction grid step")->capture_default_str();
  plan_cmd->add_option("--montecarlo", plan.montecarlo, "Monte Carlo trials per visit count (0 = off)")
      ->capture_default_str();
  plan_cmd->add_option("--flag-model", plan.flag_model, "bernoulli or fixed_counts")->capture_default_str();
  plan_cmd->add_option("--seed", plan.seed, "Monte Carlo seed")->capture_default_str();
  plan_cmd->add_option("--threads", plan.threads, "Worker threads (GRAZE_THREADS overrides)")->capture_default_str();
  plan_cmd->add_option("--out", plan.out, "Curve CSV path");
  plan_cmd->add_option("--summary", plan.summary, "Summary JSON path");

  GradcheckFlags gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Run the finite-difference gradient oracle suite");
  gc_cmd->add_option("--seeds", gc.seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
  gc_cmd->add_option("--seed", gc.seed, "First seed")->capture_default_str();
  gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
  gc_cmd->add_option("--out", gc.out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error[E_USAGE]: " << e.what() << '\n';
    return 2;
  }
  verbosity = quiet ? 0 : 1 + verbose;
  plan.n_set = n_opt->count() > 0;
  plan.q_set = q_opt->count() > 0;
  plan.p_set = p_opt->count() > 0;
  plan.r_set = r_opt->count() > 0;

  try {
    if (*gen_cmd) cmd_gen_data(gen);
    else if (*train_cmd) cmd_train(train);
    else if (*eval_cmd) cmd_eval(eval);
    else if (*cv_cmd) cmd_crossval(cv);
    else if (*plan_cmd) cmd_plan(plan);
    else if (*gc_cmd) cmd_gradcheck(gc);
    return 0;
  } catch (const CliError& e) {
    std::cerr << "error[" << e.code << "]: " << e.what() << '\n';
    return e.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "error[E_CONFIG]: " << e.what() << '\n';
    return 3;
  } catch (const ScenarioError& e) {
    std::cerr << "error[E_CONFIG]: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error[E_IO]: " << e.what() << '\n';
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error[E_IO]: " << e.what() << '\n';
    return 4;
  } catch (const FormatError& e) {
    std::cerr << "error[E_FORMAT]: " << e.what() << '\n';
    return 5;
  } catch (const DataError& e) {
    std::cerr << "error[E_DATA]: " << e.what() << '\n';
    return 6;
  } catch (const ShapeError& e) {
    std::cerr << "error[E_DATA]: " << e.what() << '\n';
    return 6;
  } catch (const MetricsError& e) {
    std::cerr << "error[E_DATA]: " << e.what() << '\n';
    return 6;
  } catch (const TrainingError& e) {
    std::cerr << "error[E_TRAIN]: " << e.what() << '\n';
    return 7;
  } catch (const std::exception& e) {
    std::cerr << "error[E_INTERNAL]: " << e.what() << '\n';
    return 70;
  }
}
