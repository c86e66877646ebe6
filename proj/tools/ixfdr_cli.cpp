// Command-line driver: individual pipeline stages plus `run` for full
// experiments. Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include "ixfdr/error.hpp"
#include "ixfdr/harness.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace ixfdr;

int parse_function_id(const std::string& s) {
  std::string digits = s;
  if (!digits.empty() && (digits[0] == 'F' || digits[0] == 'f')) digits = digits.substr(1);
  try {
    std::size_t used = 0;
    const int id = std::stoi(digits, &used);
    if (used == digits.size()) return id;
  } catch (const std::exception&) {
  }
  throw ConfigError("bad function id '" + s + "' (expected F1..F10)");
}

bool on_off(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw ConfigError("expected on|off, got '" + s + "'");
}

HiddenSizes parse_hidden(const std::string& s) {
  HiddenSizes h{};
  std::stringstream ss(s);
  std::string part;
  std::size_t k = 0;
  while (std::getline(ss, part, ',')) {
    if (k >= 3) throw ConfigError("--hidden takes exactly three sizes");
    h[k++] = std::stoul(part);
  }
  if (k != 3) throw ConfigError("--hidden takes exactly three sizes");
  return h;
}

void print_summary(const ExperimentReport& report) {
  std::size_t failed = 0;
  for (const auto& r : report.repetitions) failed += r.error.has_value();
  std::printf("%-10s %-15s %-6s %-8s %8s %8s %8s %5s\n", "dataset", "method", "calib", "coupling",
              "auroc", "fdp", "power", "reps");
  for (const auto& [key, s] : report.summaries) {
    std::printf("%-10s %-15s %-6s %-8s %8.3f %8.3f %8.3f %5zu\n", key.dataset.c_str(),
                std::string(to_string(key.method)).c_str(), key.calibrated ? "on" : "off",
                key.coupled ? "on" : "off", s.auroc.mean, s.fdp.mean, s.power.mean, s.repetitions);
  }
  if (failed) std::fprintf(stderr, "warning: %zu repetition(s) failed; see report.json\n", failed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knockoff-based FDR-controlled interaction detection for feedforward networks"};
  app.require_subcommand(1);

  // simulate
  std::string function = "F1";
  std::size_t n = 4000;
  std::size_t p = 30;
  std::uint64_t seed = 0;
  double train_fraction = 0.5;
  std::string dir = ".";
  auto* simulate = app.add_subcommand("simulate", "Generate a benchmark dataset (dataset.csv, manifest.json)");
  simulate->add_option("--function", function, "F1..F10")->capture_default_str();
  simulate->add_option("--n", n)->capture_default_str();
  simulate->add_option("--p", p)->capture_default_str();
  simulate->add_option("--seed", seed)->capture_default_str();
  simulate->add_option("--train-fraction", train_fraction)->capture_default_str();
  simulate->add_option("--dir", dir, "Working directory")->capture_default_str();

  // ingest
  std::string csv_path;
  std::string response = "y";
  std::string task = "regression";
  auto* ingest = app.add_subcommand("ingest", "Import an external CSV dataset into a working directory");
  ingest->add_option("--csv", csv_path)->required();
  ingest->add_option("--response", response)->capture_default_str();
  ingest->add_option("--task", task, "regression|binary")->capture_default_str();
  ingest->add_option("--train-fraction", train_fraction)->capture_default_str();
  ingest->add_option("--dir", dir)->capture_default_str();

  // knockoff
  double ridge = 0.0;
  auto* knockoff = app.add_subcommand("knockoff", "Fit the Gaussian model and sample knockoffs");
  knockoff->add_option("--dir", dir)->capture_default_str();
  knockoff->add_option("--seed", seed)->capture_default_str();
  knockoff->add_option("--ridge", ridge)->capture_default_str();

  // train
  std::string coupling = "on";
  std::string hidden = "64,32,16";
  std::uint64_t init_seed = 0;
  TrainConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "Train a network on the augmented data");
  train_cmd->add_option("--dir", dir)->capture_default_str();
  train_cmd->add_option("--coupling", coupling, "on|off")->capture_default_str();
  train_cmd->add_option("--hidden", hidden)->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--learning-rate", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--l1", train_cfg.l1_filter_penalty)->capture_default_str();
  train_cmd->add_option("--validation-fraction", train_cfg.validation_fraction)->capture_default_str();
  train_cmd->add_option("--seed", train_cfg.seed)->capture_default_str();
  train_cmd->add_option("--init-seed", init_seed)->capture_default_str();

  // score
  std::string method = "model_based";
  AttributionConfig attr;
  auto* score = app.add_subcommand("score", "Compute interaction and univariate importance scores");
  score->add_option("--dir", dir)->capture_default_str();
  score->add_option("--coupling", coupling)->capture_default_str();
  score->add_option("--method", method, "model_based|instance_based")->capture_default_str();
  score->add_option("--alpha-steps", attr.alpha_steps)->capture_default_str();
  score->add_option("--beta-steps", attr.beta_steps)->capture_default_str();
  score->add_option("--sample-cap", attr.sample_cap)->capture_default_str();
  score->add_option("--epsilon-floor", attr.epsilon_floor)->capture_default_str();
  score->add_option("--sampled-baselines", attr.sampled_baselines)->capture_default_str();
  score->add_option("--baseline-seed", attr.baseline_seed)->capture_default_str();

  // select
  std::string calibration = "on";
  double q = 0.2;
  auto* select = app.add_subcommand("select", "Apply the knockoff interaction threshold");
  select->add_option("--dir", dir)->capture_default_str();
  select->add_option("--coupling", coupling)->capture_default_str();
  select->add_option("--method", method)->capture_default_str();
  select->add_option("--calibration", calibration, "on|off")->capture_default_str();
  select->add_option("--q", q)->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a selection against the ground truth");
  evaluate->add_option("--dir", dir)->capture_default_str();
  evaluate->add_option("--coupling", coupling)->capture_default_str();
  evaluate->add_option("--method", method)->capture_default_str();
  evaluate->add_option("--calibration", calibration)->capture_default_str();

  // run
  std::string config_path;
  std::vector<std::string> functions;
  std::optional<std::size_t> run_n, run_p, reps, epochs, sample_cap, threads;
  std::optional<double> run_q;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_method, run_calibration, run_coupling, out_dir, data_path;
  std::optional<std::string> data_response, data_task;
  bool paper_scale = false;
  bool verbose = false;
  auto* run = app.add_subcommand("run", "Run the full pipeline over repetitions and write reports");
  run->add_option("--config", config_path, "JSON experiment config");
  run->add_option("--functions", functions, "e.g. F1 F2 or all")->delimiter(',');
  run->add_option("--data", data_path, "External CSV instead of simulations");
  run->add_option("--response", data_response);
  run->add_option("--task", data_task);
  run->add_option("--n", run_n);
  run->add_option("--p", run_p);
  run->add_option("--q", run_q);
  run->add_option("--repetitions", reps);
  run->add_option("--method", run_method, "model_based|instance_based|both");
  run->add_option("--calibration", run_calibration, "on|off|both");
  run->add_option("--coupling", run_coupling, "on|off|both");
  run->add_option("--epochs", epochs);
  run->add_option("--sample-cap", sample_cap);
  run->add_option("--seed", run_seed);
  run->add_option("--out", out_dir, "Output directory (relative paths resolve under $IXFDR_OUTPUT_ROOT)");
  run->add_option("--threads", threads, "Concurrent repetitions");
  run->add_flag("--paper-scale", paper_scale, "n = 20000 and 20 repetitions");
  run->add_flag("--verbose", verbose);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) {
      stage_simulate({parse_function_id(function), n, p, seed, train_fraction}, dir);
      std::cout << "wrote " << dir << "/dataset.csv and manifest.json\n";
    } else if (ingest->parsed()) {
      stage_ingest({csv_path, response, parse_task(task)}, train_fraction, dir);
      std::cout << "wrote " << dir << "/dataset.csv and manifest.json\n";
    } else if (knockoff->parsed()) {
      const auto d = stage_knockoff(dir, seed, ridge);
      std::printf("knockoffs sampled: cov deviation %.4f, cross-cov deviation %.4f, mean shift %.4f\n",
                  d.knockoff_cov_deviation, d.cross_cov_deviation, d.max_mean_shift);
    } else if (train_cmd->parsed()) {
      const auto out = stage_train(dir, on_off(coupling), parse_hidden(hidden), init_seed, train_cfg);
      std::printf("loss %.5f -> %.5f; test mse %.5f, test R^2 %.4f\n", out.initial_loss, out.final_loss,
                  out.test_fit.mse, out.test_fit.r_squared);
    } else if (score->parsed()) {
      stage_score(dir, on_off(coupling), parse_method(method), attr);
      std::cout << "wrote scores for " << method << '\n';
    } else if (select->parsed()) {
      const auto s = stage_select(dir, on_off(coupling), parse_method(method), on_off(calibration), q);
      std::cout << to_json(s.interactions).dump(2) << '\n';
    } else if (evaluate->parsed()) {
      const auto e = stage_evaluate(dir, on_off(coupling), parse_method(method), on_off(calibration));
      std::cout << to_json(e).dump(2) << '\n';
    } else if (run->parsed()) {
      nlohmann::json j = nlohmann::json::object();
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("cannot open config '" + config_path + "'");
        try {
          j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("config parse error: ") + e.what());
        }
      }
      if (paper_scale) j["paper_scale"] = true;
      if (!functions.empty()) {
        if (functions.size() == 1 && functions[0] == "all") {
          j["functions"] = "all";
        } else {
          j["functions"] = functions;
        }
      }
      if (data_path) {
        j["data"] = {{"path", *data_path},
                     {"response", data_response.value_or("y")},
                     {"task", data_task.value_or("regression")}};
      }
      if (run_n) j["n"] = *run_n;
      if (run_p) j["p"] = *run_p;
      if (run_q) j["q"] = *run_q;
      if (reps) j["repetitions"] = *reps;
      if (run_method) j["method"] = *run_method;
      if (run_calibration) j["calibration"] = *run_calibration;
      if (run_coupling) j["coupling"] = *run_coupling;
      if (epochs) j["train"]["epochs"] = *epochs;
      if (sample_cap) j["attribution"]["sample_cap"] = *sample_cap;
      if (run_seed) j["seed"] = *run_seed;
      if (out_dir) j["output_dir"] = *out_dir;
      if (threads) j["threads"] = *threads;
      if (verbose) j["verbose"] = true;
      const ExperimentConfig cfg = config_from_json(j);
      cfg.validate();
      const ExperimentReport report = run_experiment(cfg);
      print_summary(report);
      std::cout << "report: " << (resolve_output_dir(cfg.output_dir) / "report.json").string() << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
