#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support.hpp"

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  grazing::test::TempDir dir{"cli"};

  CliResult graze(const std::string& args, const std::string& env = "") {
    const auto out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
    const std::string cmd = env + " \"" GRAZE_BIN "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
  }

  std::string p(const std::string& name) const { return "\"" + (dir.path() / name).string() + "\""; }

  void make_data(const std::string& name, std::size_t n = 12, int seed = 1) {
    const auto r = graze("-q gen-data --out " + p(name) + " --n " + std::to_string(n) + " --seed " +
                         std::to_string(seed) + " --cadence 20");
    ASSERT_EQ(r.code, 0) << r.err;
  }
};

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(graze("").code, 2);
  EXPECT_EQ(graze("frobnicate").code, 2);
  const auto r = graze("plan --bogus 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error[E_USAGE]"), std::string::npos);
  EXPECT_EQ(graze("--help").code, 0);
}

TEST_F(Cli, GenDataDeterministicAndValidated) {
  make_data("a", 6, 3);
  make_data("b", 6, 3);
  EXPECT_EQ(slurp(dir.path() / "a" / "manifest.json"), slurp(dir.path() / "b" / "manifest.json"));
  const auto sidecar = nlohmann::json::parse(slurp(dir.path() / "a" / "run.json"));
  EXPECT_EQ(sidecar.at("subcommand"), "gen-data");
  EXPECT_EQ(sidecar.at("config").at("synth").at("samples"), 6);
  const auto bad = graze("gen-data --out " + p("c") + " --n 0");
  EXPECT_EQ(bad.code, 3);
  EXPECT_NE(bad.err.find("error[E_CONFIG]"), std::string::npos);
}

TEST_F(Cli, TrainEvalRoundTrip) {
  make_data("d", 12, 2);
  const std::string train_args =
      "-q train --data " + p("d") + " --out " + p("m.ckpt") + " --epochs 1 --members 2 --seed 4";
  ASSERT_EQ(graze(train_args).code, 0);
  const auto first = slurp(dir.path() / "m.ckpt");
  ASSERT_EQ(graze(train_args, "GRAZE_THREADS=2").code, 0);
  EXPECT_EQ(slurp(dir.path() / "m.ckpt"), first);
  const auto sidecar = nlohmann::json::parse(slurp(dir.path() / "m.ckpt.run.json"));
  EXPECT_EQ(sidecar.at("config").at("train").at("member_count"), 2);

  const auto ev = graze("-q eval --checkpoint " + p("m.ckpt") + " --data " + p("d") + " --out " + p("r.json"));
  ASSERT_EQ(ev.code, 0) << ev.err;
  EXPECT_EQ(ev.out.substr(0, ev.out.find('\n')), "row,Acc,F1,Prec,Rec,Prec-gz,Prec-no,Rec-gz,Rec-no");
  const auto report = nlohmann::json::parse(slurp(dir.path() / "r.json"));
  EXPECT_TRUE(report.contains("metrics"));

  const auto missing = graze("eval --checkpoint " + p("none.ckpt") + " --data " + p("d"));
  EXPECT_EQ(missing.code, 4);
  EXPECT_NE(missing.err.find("error[E_IO]"), std::string::npos);
  EXPECT_EQ(graze("train --data " + p("d") + " --out " + p("x.ckpt") + " --ablation nonsense").code, 3);
  EXPECT_EQ(graze(train_args, "GRAZE_THREADS=abc").code, 3);
}

TEST_F(Cli, CrossvalRowCount) {
  make_data("d", 14, 5);
  const auto r = graze("-q crossval --data " + p("d") + " --out " + p("cv.csv") +
                       " --folds 2 --epochs 1 --members 1 --no-augment");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir.path() / "cv.csv");
  EXPECT_EQ(line_count(csv), 5u);
  EXPECT_NE(csv.find("\nMean,"), std::string::npos);
  EXPECT_NE(csv.find("\nMedian,"), std::string::npos);
}

TEST_F(Cli, PlanDefaultsAndOverrides) {
  const auto r = graze("plan --out " + p("curve.csv") + " --summary " + p("s.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("F = 401.16"), std::string::npos);
  EXPECT_NE(r.out.find(": 17.2000"), std::string::npos);
  EXPECT_NE(r.out.find("V=100 targeted 86.000"), std::string::npos);
  EXPECT_EQ(line_count(slurp(dir.path() / "curve.csv")), 201u);

  const auto flat = graze("plan --precision-no 0.05");
  ASSERT_EQ(flat.code, 0) << flat.err;
  EXPECT_NE(flat.out.find(": 1.0000"), std::string::npos);

  std::ofstream(dir.path() / "sc.json") << R"({"n_sites": 1000, "nongrazed_fraction": 0.1, "precision_no": 0.5,
                                               "recall_no": 0.5})";
  const auto file = graze("plan --scenario " + p("sc.json") + " --visits 10");
  ASSERT_EQ(file.code, 0) << file.err;
  EXPECT_NE(file.out.find("F = 100.00"), std::string::npos);
  EXPECT_EQ(graze("plan --recall-no 2").code, 3);
}

TEST_F(Cli, Gradcheck) {
  const auto r = graze("gradcheck --seeds 1 --out " + p("g.json"));
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("checks passed"), std::string::npos);
}
