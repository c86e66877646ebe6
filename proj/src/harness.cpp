#include "ixfdr/harness.hpp"

#include "ixfdr/error.hpp"
#include "ixfdr/random.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace ixfdr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kKnockoffNote =
    "knockoffs: second-order Gaussian construction (equicorrelated s) fitted to the empirical "
    "mean and covariance; no generative knockoff model is used";
constexpr const char* kNoiseNote = "simulated responses carry no observation noise";
constexpr const char* kRegularizationNote =
    "training uses Adam with an L1 penalty on the coupling-layer filter weights only; no dropout, "
    "weight decay or early stopping";
constexpr const char* kBaselineNote =
    "instance-based scores integrate from the data-mean baseline unless configured otherwise, "
    "on the first sample_cap training rows";
constexpr const char* kUncalibratedNote =
    "uncalibrated arms rank interactions by the absolute raw score |s2d|";

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

std::string function_label(int id) { return "F" + std::to_string(id); }

int parse_function(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  const std::string s = j.get<std::string>();
  if (s.size() >= 2 && (s[0] == 'F' || s[0] == 'f')) {
    try {
      return std::stoi(s.substr(1));
    } catch (const std::exception&) {
    }
  }
  throw ConfigError("bad function id '" + s + "' (expected F1..F10)");
}

template <typename T, typename Parse>
std::vector<T> parse_choice(const json& j, const char* field, Parse parse, std::vector<T> both) {
  if (j.is_array()) {
    std::vector<T> out;
    for (const auto& e : j) out.push_back(parse(e.get<std::string>()));
    if (out.empty()) throw ConfigError(std::string(field) + " must not be empty");
    return out;
  }
  const std::string s = j.get<std::string>();
  if (s == "both") return both;
  return {parse(s)};
}

bool parse_on_off(const std::string& s) {
  if (s == "on" || s == "true") return true;
  if (s == "off" || s == "false") return false;
  throw ConfigError("expected on|off|both, got '" + s + "'");
}

json on_off_json(const std::vector<bool>& v) {
  json arr = json::array();
  for (bool b : v) arr.push_back(b ? "on" : "off");
  return arr;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json diagnostics_json(const KnockoffDiagnostics& d) {
  return {{"n", d.n},
          {"knockoff_cov_deviation", d.knockoff_cov_deviation},
          {"cross_cov_deviation", d.cross_cov_deviation},
          {"max_mean_shift", d.max_mean_shift}};
}

json fit_json(const FitSummary& f, Task task) {
  if (task == Task::kBinary) return {{"mse", f.mse}, {"accuracy", f.accuracy}};
  return {{"mse", f.mse}, {"r_squared", f.r_squared}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("q must lie in (0, 1)");
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (!data) {
    if (functions.empty()) throw ConfigError("no simulation functions selected");
    for (int f : functions) SimulationSpec{f, n, p, seed, train_fraction}.validate();
  }
  if (methods.empty() || calibration.empty() || coupling.empty()) {
    throw ConfigError("method, calibration and coupling must each select at least one arm");
  }
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("hidden layer sizes must be at least 1");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (!(knockoff_ridge >= 0.0)) throw ConfigError("knockoff_ridge must be nonnegative");
  train.validate();
  attribution.validate();
}

void ExperimentConfig::apply_paper_scale() {
  n = 20000;
  repetitions = 20;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("functions")) {
      cfg.functions.clear();
      const auto& f = j.at("functions");
      if (f.is_array()) {
        for (const auto& e : f) cfg.functions.push_back(parse_function(e));
      } else if (f.is_string() && f.get<std::string>() == "all") {
        for (int k = 1; k <= kNumSimulationFunctions; ++k) cfg.functions.push_back(k);
      } else {
        cfg.functions.push_back(parse_function(f));
      }
    }
    if (j.contains("data") && !j.at("data").is_null()) {
      const auto& d = j.at("data");
      ExternalData ext;
      ext.path = d.at("path").get<std::string>();
      ext.response_column = d.value("response", std::string("y"));
      ext.task = parse_task(d.value("task", std::string("regression")));
      cfg.data = ext;
    }
    if (j.value("paper_scale", false)) cfg.apply_paper_scale();
    cfg.n = j.value("n", cfg.n);
    cfg.p = j.value("p", cfg.p);
    cfg.q = j.value("q", cfg.q);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    if (j.contains("method")) {
      cfg.methods = parse_choice<ImportanceMethod>(
          j.at("method"), "method", [](const std::string& s) { return parse_method(s); },
          {ImportanceMethod::kModelBased, ImportanceMethod::kInstanceBased});
    }
    if (j.contains("calibration")) {
      cfg.calibration = parse_choice<bool>(j.at("calibration"), "calibration", parse_on_off, {true, false});
    }
    if (j.contains("coupling")) {
      cfg.coupling = parse_choice<bool>(j.at("coupling"), "coupling", parse_on_off, {true, false});
    }
    if (j.contains("hidden")) {
      const auto h = j.at("hidden").get<std::vector<std::size_t>>();
      if (h.size() != 3) throw ConfigError("hidden must list exactly 3 layer sizes");
      cfg.hidden = {h[0], h[1], h[2]};
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
      cfg.train.epochs = t.value("epochs", cfg.train.epochs);
      cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
      cfg.train.l1_filter_penalty = t.value("l1_filter_penalty", cfg.train.l1_filter_penalty);
      cfg.train.validation_fraction = t.value("validation_fraction", cfg.train.validation_fraction);
    }
    if (j.contains("attribution")) {
      const auto& a = j.at("attribution");
      cfg.attribution.alpha_steps = a.value("alpha_steps", cfg.attribution.alpha_steps);
      cfg.attribution.beta_steps = a.value("beta_steps", cfg.attribution.beta_steps);
      cfg.attribution.sample_cap = a.value("sample_cap", cfg.attribution.sample_cap);
      cfg.attribution.epsilon_floor = a.value("epsilon_floor", cfg.attribution.epsilon_floor);
      cfg.attribution.sampled_baselines = a.value("sampled_baselines", cfg.attribution.sampled_baselines);
    }
    cfg.knockoff_ridge = j.value("knockoff_ridge", cfg.knockoff_ridge);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.threads = j.value("threads", cfg.threads);
    cfg.verbose = j.value("verbose", cfg.verbose);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.data) {
    j["data"] = {{"path", cfg.data->path.string()},
                 {"response", cfg.data->response_column},
                 {"task", std::string(to_string(cfg.data->task))}};
  } else {
    json fns = json::array();
    for (int f : cfg.functions) fns.push_back(function_label(f));
    j["functions"] = fns;
  }
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["q"] = cfg.q;
  j["repetitions"] = cfg.repetitions;
  json methods = json::array();
  for (auto m : cfg.methods) methods.push_back(std::string(to_string(m)));
  j["method"] = methods;
  j["calibration"] = on_off_json(cfg.calibration);
  j["coupling"] = on_off_json(cfg.coupling);
  j["hidden"] = {cfg.hidden[0], cfg.hidden[1], cfg.hidden[2]};
  j["train"] = {{"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"batch_size", cfg.train.batch_size},
                {"l1_filter_penalty", cfg.train.l1_filter_penalty},
                {"validation_fraction", cfg.train.validation_fraction},
                {"optimizer", "adam"}};
  j["attribution"] = {{"alpha_steps", cfg.attribution.alpha_steps},
                      {"beta_steps", cfg.attribution.beta_steps},
                      {"sample_cap", cfg.attribution.sample_cap},
                      {"epsilon_floor", cfg.attribution.epsilon_floor},
                      {"sampled_baselines", cfg.attribution.sampled_baselines}};
  j["knockoff_ridge"] = cfg.knockoff_ridge;
  j["train_fraction"] = cfg.train_fraction;
  j["seed"] = cfg.seed;
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(config_to_json(cfg).dump())));
  return buf;
}

fs::path resolve_output_dir(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / dir;
  return dir;
}

// ---------------------------------------------------------------------------
// Stages

namespace {

json manifest_base(const Dataset& data) {
  json m;
  m["format"] = "ixfdr-dataset";
  m["version"] = 1;
  m["n"] = data.n();
  m["p"] = data.p();
  m["n_train"] = data.n_train;
  m["task"] = std::string(to_string(data.task));
  m["response"] = data.response_name;
  m["feature_names"] = data.feature_names;
  if (data.truth) {
    json pairs = json::array();
    for (const auto& pr : *data.truth) pairs.push_back({pr.first + 1, pr.second + 1});
    m["ground_truth"] = pairs;
  } else {
    m["ground_truth"] = nullptr;
  }
  return m;
}

}  // namespace

void stage_simulate(const SimulationSpec& spec, const fs::path& dir) {
  const Dataset data = generate(spec);
  fs::create_directories(dir);
  write_dataset_csv(dir / "dataset.csv", data);
  json m = manifest_base(data);
  m["source"] = "simulation";
  m["function"] = function_label(spec.function_id);
  m["seed"] = spec.seed;
  m["train_fraction"] = spec.train_fraction;
  m["noise"] = "none";
  write_json(dir / "manifest.json", m);
}

void stage_ingest(const ExternalData& source, double train_fraction, const fs::path& dir) {
  const Dataset data = ingest_csv(source.path, source.response_column, source.task, train_fraction);
  fs::create_directories(dir);
  write_dataset_csv(dir / "dataset.csv", data);
  json m = manifest_base(data);
  m["source"] = source.path.string();
  m["train_fraction"] = train_fraction;
  write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const fs::path& dir) {
  const json m = read_json(dir / "manifest.json");
  try {
    const Task task = parse_task(m.at("task").get<std::string>());
    Dataset data = ingest_csv(dir / "dataset.csv", m.at("response").get<std::string>(), task, 0.5);
    data.n_train = m.at("n_train").get<std::size_t>();
    if (data.n_train > data.n()) throw DataError("manifest n_train exceeds row count");
    if (!m.at("ground_truth").is_null()) {
      std::set<Pair> truth;
      for (const auto& pr : m.at("ground_truth")) {
        truth.insert(Pair::of(pr.at(0).get<std::size_t>() - 1, pr.at(1).get<std::size_t>() - 1));
      }
      data.truth = std::move(truth);
    }
    return data;
  } catch (const json::exception& e) {
    throw DataError("'" + (dir / "manifest.json").string() + "': " + e.what());
  }
}

KnockoffDiagnostics stage_knockoff(const fs::path& dir, std::uint64_t seed, double ridge) {
  const Dataset data = load_dataset(dir);
  const GaussianKnockoffModel model = fit_gaussian(data.x, ridge);
  const Matrix x_ko = sample_knockoffs(data.x, model, seed);
  const KnockoffDiagnostics diag = knockoff_diagnostics(data.x, x_ko, model);
  save_knockoff_model(model, dir / "knockoff_model.json");
  Matrix augmented(data.x.rows(), 2 * data.x.cols());
  augmented << data.x, x_ko;
  write_csv(dir / "augmented.csv", augmented_names(data.feature_names), augmented);
  json d = diagnostics_json(diag);
  d["seed"] = seed;
  d["ridge"] = model.ridge;
  write_json(dir / "knockoff_diagnostics.json", d);
  return diag;
}

Matrix load_augmented(const fs::path& dir) { return read_csv(dir / "augmented.csv").values; }

std::string arm_name(bool coupled) { return coupled ? "coupled" : "dense"; }

std::string selection_tag(bool coupled, ImportanceMethod method, bool calibrated) {
  return arm_name(coupled) + "_" + std::string(to_string(method)) + "_" +
         (calibrated ? "calibrated" : "uncalibrated");
}

TrainOutcome stage_train(const fs::path& dir, bool coupled, const HiddenSizes& hidden,
                         std::uint64_t init_seed, const TrainConfig& cfg) {
  const Dataset data = load_dataset(dir);
  const Matrix augmented = load_augmented(dir);
  if (augmented.rows() != data.x.rows() || augmented.cols() != 2 * data.x.cols()) {
    throw DataError("augmented.csv does not match dataset.csv");
  }
  const auto n_train = static_cast<Eigen::Index>(data.n_train);
  const auto n_test = augmented.rows() - n_train;
  CoupledNetwork net = init_network(data.p(), hidden, data.task, init_seed, coupled);
  TrainResult result = train(std::move(net), augmented.topRows(n_train), data.y.head(n_train), cfg);

  TrainOutcome out;
  out.epochs = static_cast<std::size_t>(cfg.epochs);
  out.initial_loss = result.loss_trace.front();
  out.final_loss = result.loss_trace.back();
  out.train_fit = evaluate_fit(result.net, augmented.topRows(n_train), data.y.head(n_train));
  if (n_test > 0) out.test_fit = evaluate_fit(result.net, augmented.bottomRows(n_test), data.y.tail(n_test));

  save_network(result.net, dir / ("network_" + arm_name(coupled) + ".bin"));
  json t;
  t["arm"] = arm_name(coupled);
  t["init_seed"] = init_seed;
  t["train_seed"] = cfg.seed;
  t["loss_trace"] = result.loss_trace;
  if (!result.validation_trace.empty()) t["validation_trace"] = result.validation_trace;
  t["train_fit"] = fit_json(out.train_fit, data.task);
  t["test_fit"] = fit_json(out.test_fit, data.task);
  write_json(dir / ("train_" + arm_name(coupled) + ".json"), t);
  return out;
}

ImportanceScores stage_score(const fs::path& dir, bool coupled, ImportanceMethod method,
                             const AttributionConfig& cfg) {
  const CoupledNetwork net = load_network(dir / ("network_" + arm_name(coupled) + ".bin"));
  ImportanceScores scores;
  if (method == ImportanceMethod::kInstanceBased) {
    const json m = read_json(dir / "manifest.json");
    const auto n_train = static_cast<Eigen::Index>(m.at("n_train").get<std::size_t>());
    const Matrix augmented = load_augmented(dir);
    scores = compute_scores(net, augmented.topRows(n_train), method, cfg);
  } else {
    scores = compute_scores(net, Matrix(), method, cfg);
  }
  const std::string stem = arm_name(coupled) + "_" + std::string(to_string(method));
  write_scores_csv(dir / ("scores_" + stem + ".csv"), scores);
  write_univariate_csv(dir / ("univariate_" + stem + ".csv"), scores);
  return scores;
}

namespace {

ImportanceScores load_scores(const fs::path& dir, bool coupled, ImportanceMethod method) {
  const std::string stem = arm_name(coupled) + "_" + std::string(to_string(method));
  return read_scores(dir / ("scores_" + stem + ".csv"), dir / ("univariate_" + stem + ".csv"), method);
}

Matrix ranking_matrix(const ImportanceScores& scores, bool calibrated) {
  return calibrated ? scores.calibrated : Matrix(scores.s2d.cwiseAbs());
}

}  // namespace

StageSelection stage_select(const fs::path& dir, bool coupled, ImportanceMethod method,
                            bool calibrated, double q) {
  const ImportanceScores scores = load_scores(dir, coupled, method);
  const auto gamma = build_gamma(ranking_matrix(scores, calibrated));
  StageSelection out;
  out.interactions = interaction_threshold(gamma, q);
  out.features = feature_threshold(knockoff_stats(scores.s1d), q);
  const std::string tag = selection_tag(coupled, method, calibrated);
  write_selection_csv(dir / ("selection_" + tag + ".csv"), gamma, out.interactions);
  json j = to_json(out.interactions);
  j["features"] = to_json(out.features);
  j["calibrated"] = calibrated;
  write_json(dir / ("selection_" + tag + ".json"), j);
  return out;
}

EvalReport stage_evaluate(const fs::path& dir, bool coupled, ImportanceMethod method,
                          bool calibrated) {
  const json manifest = read_json(dir / "manifest.json");
  if (manifest.at("ground_truth").is_null()) {
    throw DataError("evaluation needs ground truth; the manifest has none");
  }
  std::set<Pair> truth;
  for (const auto& pr : manifest.at("ground_truth")) {
    truth.insert(Pair::of(pr.at(0).get<std::size_t>() - 1, pr.at(1).get<std::size_t>() - 1));
  }
  const auto p = manifest.at("p").get<std::size_t>();
  const ImportanceScores scores = load_scores(dir, coupled, method);
  const std::string tag = selection_tag(coupled, method, calibrated);
  const json selection = read_json(dir / ("selection_" + tag + ".json"));

  std::set<Pair> selected;
  for (const auto& s : selection.at("selected")) {
    selected.insert(Pair::of(s.at("i").get<std::size_t>() - 1, s.at("j").get<std::size_t>() - 1));
  }
  EvalReport report;
  report.auroc = auroc(original_pair_scores(ranking_matrix(scores, calibrated), p), truth);
  const FdpPower fp = fdp_power(selected, truth);
  report.fdp = fp.fdp;
  report.power = fp.power;
  report.n_selected = selected.size();
  report.n_true = truth.size();
  write_json(dir / ("evaluation_" + tag + ".json"), to_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

struct Job {
  std::string dataset;
  std::optional<int> function_id;
  std::size_t repetition = 0;
};

void log_line(const ExperimentConfig& cfg, const std::string& msg) {
  if (!cfg.verbose) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::clog << msg << std::endl;
}

RepetitionResult run_repetition(const ExperimentConfig& cfg, const Job& job, const fs::path& root) {
  RepetitionResult rep;
  rep.dataset = job.dataset;
  rep.repetition = job.repetition;
  rep.seed = derive_seed(cfg.seed, job.repetition);
  const fs::path dir = root / job.dataset / ("rep_" + std::to_string(job.repetition));
  const std::string where = job.dataset + " rep " + std::to_string(job.repetition);

  std::string stage = "simulate";
  try {
    if (job.function_id) {
      stage_simulate({*job.function_id, cfg.n, cfg.p, derive_seed(rep.seed, 1), cfg.train_fraction}, dir);
    } else {
      stage = "ingest";
      stage_ingest(*cfg.data, cfg.train_fraction, dir);
    }
    stage = "knockoff";
    rep.knockoff = stage_knockoff(dir, derive_seed(rep.seed, 2), cfg.knockoff_ridge);
    const bool has_truth = !read_json(dir / "manifest.json").at("ground_truth").is_null();

    for (bool coupled : cfg.coupling) {
      stage = "train/" + arm_name(coupled);
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(rep.seed, coupled ? 3 : 4);
      log_line(cfg, where + ": training " + arm_name(coupled));
      rep.training.emplace_back(coupled, stage_train(dir, coupled, cfg.hidden,
                                                     derive_seed(rep.seed, coupled ? 5 : 6), tc));
      for (ImportanceMethod method : cfg.methods) {
        stage = "score/" + arm_name(coupled) + "/" + std::string(to_string(method));
        AttributionConfig ac = cfg.attribution;
        ac.baseline_seed = derive_seed(rep.seed, 7);
        stage_score(dir, coupled, method, ac);
        for (bool calibrated : cfg.calibration) {
          ArmResult arm;
          arm.coupled = coupled;
          arm.method = method;
          arm.calibrated = calibrated;
          stage = "select/" + selection_tag(coupled, method, calibrated);
          arm.selection = stage_select(dir, coupled, method, calibrated, cfg.q);
          if (has_truth) {
            stage = "evaluate/" + selection_tag(coupled, method, calibrated);
            arm.evaluation = stage_evaluate(dir, coupled, method, calibrated);
          }
          rep.arms.push_back(std::move(arm));
        }
      }
    }
  } catch (const std::exception& e) {
    rep.error = e.what();
    rep.failed_stage = stage;
    log_line(cfg, where + ": failed in " + stage + ": " + e.what());
  }
  return rep;
}

json arm_json(const ArmResult& arm) {
  json j;
  j["coupling"] = arm.coupled ? "on" : "off";
  j["method"] = std::string(to_string(arm.method));
  j["calibration"] = arm.calibrated ? "on" : "off";
  j["interactions"] = to_json(arm.selection.interactions);
  j["features"] = to_json(arm.selection.features);
  j["evaluation"] = arm.evaluation ? to_json(*arm.evaluation) : json(nullptr);
  return j;
}

}  // namespace

json ExperimentReport::to_json() const {
  json j;
  j["software"] = {{"name", "ixfdr"}, {"version", kSoftwareVersion}};
  j["config"] = config_to_json(config);
  j["config_hash"] = config_hash(config);
  j["notes"] = {kKnockoffNote, kNoiseNote, kRegularizationNote, kBaselineNote, kUncalibratedNote};

  json reps = json::array();
  for (const auto& r : repetitions) {
    json rj;
    rj["dataset"] = r.dataset;
    rj["repetition"] = r.repetition;
    rj["seed"] = r.seed;
    rj["status"] = r.error ? "failed" : "ok";
    if (r.error) {
      rj["error"] = *r.error;
      rj["failed_stage"] = r.failed_stage;
    }
    rj["knockoff_diagnostics"] = r.knockoff ? diagnostics_json(*r.knockoff) : json(nullptr);
    json training = json::array();
    for (const auto& [coupled, t] : r.training) {
      training.push_back({{"coupling", coupled ? "on" : "off"},
                          {"epochs", t.epochs},
                          {"initial_loss", t.initial_loss},
                          {"final_loss", t.final_loss},
                          {"train_mse", t.train_fit.mse},
                          {"test_mse", t.test_fit.mse},
                          {"test_r_squared", t.test_fit.r_squared},
                          {"test_accuracy", t.test_fit.accuracy}});
    }
    rj["training"] = training;
    json arms = json::array();
    for (const auto& a : r.arms) arms.push_back(arm_json(a));
    rj["arms"] = arms;
    reps.push_back(std::move(rj));
  }
  j["repetitions"] = reps;

  json sums = json::array();
  for (const auto& [key, s] : summaries) {
    json sj = ixfdr::to_json(s);
    sj["dataset"] = key.dataset;
    sj["method"] = std::string(to_string(key.method));
    sj["calibration"] = key.calibrated ? "on" : "off";
    sj["coupling"] = key.coupled ? "on" : "off";
    sums.push_back(std::move(sj));
  }
  j["summaries"] = sums;
  return j;
}

void ExperimentReport::write_repetitions_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "dataset,method,q,repetition,calibration,coupling,auroc,fdp,power,n_selected,n_true\n";
  for (const auto& r : repetitions) {
    for (const auto& a : r.arms) {
      if (!a.evaluation) continue;
      const auto& e = *a.evaluation;
      out << r.dataset << ',' << to_string(a.method) << ',' << json(config.q).dump() << ','
          << r.repetition << ',' << (a.calibrated ? "on" : "off") << ',' << (a.coupled ? "on" : "off")
          << ',' << json(e.auroc).dump() << ',' << json(e.fdp).dump() << ',' << json(e.power).dump()
          << ',' << e.n_selected << ',' << e.n_true << '\n';
    }
  }
}

void ExperimentReport::write_summary_csv(const fs::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "dataset,method,calibration,coupling,metric,mean,se,ci_low,ci_high,repetitions\n";
  for (const auto& [key, s] : summaries) {
    const std::pair<const char*, const MetricSummary*> metrics[] = {
        {"auroc", &s.auroc}, {"fdp", &s.fdp}, {"power", &s.power}};
    for (const auto& [name, m] : metrics) {
      out << key.dataset << ',' << to_string(key.method) << ',' << (key.calibrated ? "on" : "off")
          << ',' << (key.coupled ? "on" : "off") << ',' << name << ',' << json(m->mean).dump() << ','
          << json(m->se).dump() << ',' << json(m->ci_low).dump() << ',' << json(m->ci_high).dump()
          << ',' << s.repetitions << '\n';
    }
  }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path root = resolve_output_dir(cfg.output_dir);
  fs::create_directories(root);

  std::vector<Job> jobs;
  if (cfg.data) {
    const std::string label = cfg.data->path.stem().string();
    for (std::size_t r = 0; r < cfg.repetitions; ++r) jobs.push_back({label, std::nullopt, r});
  } else {
    for (int f : cfg.functions) {
      for (std::size_t r = 0; r < cfg.repetitions; ++r) jobs.push_back({function_label(f), f, r});
    }
  }

  ExperimentReport report;
  report.config = cfg;
  report.repetitions.resize(jobs.size());
  std::size_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      report.repetitions[k] = run_repetition(cfg, jobs[k], root);
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::map<SummaryKey, std::vector<EvalReport>> grouped;
  for (const auto& r : report.repetitions) {
    for (const auto& a : r.arms) {
      if (a.evaluation) grouped[{r.dataset, a.method, a.calibrated, a.coupled}].push_back(*a.evaluation);
    }
  }
  for (const auto& [key, evals] : grouped) report.summaries[key] = aggregate(evals);

  write_json(root / "report.json", report.to_json());
  report.write_repetitions_csv(root / "repetitions.csv");
  report.write_summary_csv(root / "summary.csv");
  return report;
}

}  // namespace ixfdr
