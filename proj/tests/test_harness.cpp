#include "ixfdr/error.hpp"
#include "ixfdr/harness.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ixfdr;
using namespace ixfdr::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig quick_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.functions = {1};
  cfg.n = 4000;
  cfg.repetitions = 2;
  cfg.methods = {ImportanceMethod::kModelBased, ImportanceMethod::kInstanceBased};
  cfg.train.epochs = 3;
  cfg.hidden = {16, 8, 4};
  cfg.attribution.sample_cap = 3;
  cfg.attribution.alpha_steps = 4;
  cfg.attribution.beta_steps = 4;
  cfg.output_dir = out;
  cfg.threads = 2;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(IXFDR_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("F1, two repetitions, both methods") {
  const fs::path out = temp_dir("harness_bookkeeping");
  const ExperimentReport report = run_experiment(quick_config(out));
  REQUIRE(report.repetitions.size() == 2);
  std::size_t evals = 0;
  for (const auto& r : report.repetitions) {
    CHECK_FALSE(r.error.has_value());
    for (const auto& a : r.arms) evals += a.evaluation.has_value();
  }
  CHECK(evals == 4);
  CHECK(report.summaries.size() == 2);
  for (const auto& [key, s] : report.summaries) CHECK(s.repetitions == 2);

  const auto j = report.to_json();
  CHECK(j["repetitions"].size() == 2);
  CHECK(j["summaries"].size() == 2);
  CHECK_FALSE(j.contains("output_dir"));
  for (const char* f : {"report.json", "repetitions.csv", "summary.csv"}) CHECK(fs::exists(out / f));
  for (const char* f : {"dataset.csv", "manifest.json", "augmented.csv", "knockoff_model.json",
                        "network_coupled.bin", "scores_coupled_model_based.csv",
                        "scores_coupled_instance_based.csv", "selection_coupled_model_based_calibrated.json",
                        "evaluation_coupled_instance_based_calibrated.json"}) {
    CHECK_MESSAGE(fs::exists(out / "F1" / "rep_0" / f), f);
  }
}

TEST_CASE("same config and seed give byte-identical reports") {
  ExperimentConfig a = quick_config(temp_dir("harness_det_a"));
  a.repetitions = 1;
  a.methods = {ImportanceMethod::kModelBased};
  a.calibration = {true, false};
  a.coupling = {true, false};
  ExperimentConfig b = a;
  b.output_dir = temp_dir("harness_det_b");
  b.threads = 1;
  run_experiment(a);
  run_experiment(b);
  CHECK(slurp(a.output_dir / "report.json") == slurp(b.output_dir / "report.json"));
  CHECK(slurp(a.output_dir / "summary.csv") == slurp(b.output_dir / "summary.csv"));
  CHECK(config_hash(a) == config_hash(b));
  ExperimentConfig c = a;
  c.seed = 1;
  CHECK(config_hash(c) != config_hash(a));
}

TEST_CASE("stages can be rerun individually from files") {
  const fs::path dir = temp_dir("harness_stages");
  stage_simulate({2, 600, 12, 5, 0.5}, dir);
  const Dataset d = load_dataset(dir);
  CHECK(d.p() == 12);
  CHECK(d.truth.has_value());
  stage_knockoff(dir, 6, 0.0);
  CHECK(load_augmented(dir).cols() == 24);
  TrainConfig tc;
  tc.epochs = 2;
  stage_train(dir, true, {8, 4, 2}, 7, tc);
  stage_score(dir, true, ImportanceMethod::kModelBased, {});
  const auto sel = stage_select(dir, true, ImportanceMethod::kModelBased, true, 0.2);
  const EvalReport e = stage_evaluate(dir, true, ImportanceMethod::kModelBased, true);
  CHECK(e.n_selected == sel.interactions.selected.size());
  CHECK(e.n_true == ground_truth(2).size());
  // Scoring a dense arm that was never trained is a runtime failure.
  CHECK_THROWS(stage_score(dir, false, ImportanceMethod::kModelBased, {}));
}

TEST_CASE("a failing repetition is reported and the run continues") {
  const fs::path work = temp_dir("harness_failing");
  {
    std::ofstream csv(work / "constant.csv");
    csv << "a,b,c,y\n";
    for (int r = 0; r < 40; ++r) csv << r * 0.1 << ',' << 1.0 << ',' << (r % 7) << ',' << r * 0.3 << '\n';
  }
  ExperimentConfig cfg = quick_config(work / "out");
  cfg.functions.clear();
  cfg.data = ExternalData{work / "constant.csv", "y", Task::kRegression};
  cfg.p = 3;
  cfg.n = 40;
  const ExperimentReport report = run_experiment(cfg);
  REQUIRE(report.repetitions.size() == 2);
  for (const auto& r : report.repetitions) {
    REQUIRE(r.error.has_value());
    CHECK(r.failed_stage == "knockoff");
    CHECK(r.error->find("zero-variance") != std::string::npos);
  }
  CHECK(report.to_json()["repetitions"][0]["status"] == "failed");
  CHECK(fs::exists(work / "out" / "report.json"));
}

TEST_CASE("config parsing and validation") {
  const auto cfg = config_from_json(nlohmann::json::parse(
      R"({"functions": ["F1", 3], "method": "both", "calibration": "off", "coupling": "both", "q": 0.1})"));
  CHECK(cfg.functions == std::vector<int>{1, 3});
  CHECK(cfg.methods.size() == 2);
  CHECK(cfg.calibration == std::vector<bool>{false});
  CHECK(cfg.coupling.size() == 2);
  CHECK(cfg.q == 0.1);
  CHECK(config_from_json(nlohmann::json::parse(R"({"functions": "all"})")).functions.size() == 10);
  const auto scaled = config_from_json(nlohmann::json::parse(R"({"paper_scale": true})"));
  CHECK(scaled.n == 20000);
  CHECK(scaled.repetitions == 20);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"functions": ["F11"]})")).validate(), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"n": "many"})")), ConfigError);
  ExperimentConfig bad;
  bad.q = 1.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  // The config written into the report parses back to the same hash.
  CHECK(config_hash(config_from_json(config_to_json(cfg))) == config_hash(cfg));
}

TEST_CASE("CLI exit codes") {
  const fs::path out = temp_dir("harness_cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("run --q nope") == 1);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("run --functions F12 --out " + out.string()) == 1);
  CHECK(run_cli("knockoff --dir " + (out / "nothing_here").string()) == 2);
  CHECK(run_cli("simulate --function F3 --n 200 --dir " + (out / "sim").string()) == 0);
  CHECK(fs::exists(out / "sim" / "dataset.csv"));
  CHECK(run_cli("run --functions F2 --n 300 --repetitions 1 --epochs 1 --out " + (out / "run").string()) == 0);
  CHECK(fs::exists(out / "run" / "report.json"));
}

TEST_CASE("relative output directories resolve under the environment root") {
  const fs::path root = temp_dir("harness_env_root");
  setenv(kOutputRootEnv, root.c_str(), 1);
  CHECK(resolve_output_dir("exp") == root / "exp");
  CHECK(resolve_output_dir("/abs/path") == fs::path("/abs/path"));
  unsetenv(kOutputRootEnv);
}
