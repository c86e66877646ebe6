#pragma once

#include "ixfdr/dataset.hpp"
#include "ixfdr/fdr.hpp"
#include "ixfdr/importance.hpp"
#include "ixfdr/knockoff.hpp"
#include "ixfdr/metrics.hpp"
#include "ixfdr/network.hpp"
#include "ixfdr/simsuite.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace ixfdr {

inline constexpr const char* kSoftwareVersion = "0.1.0";
inline constexpr const char* kOutputRootEnv = "IXFDR_OUTPUT_ROOT";

struct ExternalData {
  std::filesystem::path path;
  std::string response_column = "y";
  Task task = Task::kRegression;
};

struct ExperimentConfig {
  std::vector<int> functions{1};
  std::optional<ExternalData> data;  // replaces `functions` when set
  std::size_t n = 4000;
  std::size_t p = 30;
  double q = 0.2;
  std::size_t repetitions = 10;
  std::vector<ImportanceMethod> methods{ImportanceMethod::kModelBased};
  std::vector<bool> calibration{true};
  std::vector<bool> coupling{true};
  HiddenSizes hidden = kDefaultHiddenSizes;
  TrainConfig train;
  AttributionConfig attribution;
  double knockoff_ridge = 0.0;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "ixfdr_out";
  // Concurrent repetitions; 0 picks hardware concurrency.
  std::size_t threads = 0;
  bool verbose = false;

  void validate() const;
  // Scales n and repetitions up to the full benchmark protocol (n = 20000, 20 reps).
  void apply_paper_scale();
};

// Config JSON uses the field names above; method/calibration/coupling accept a
// single value or "both", functions accept "F1".."F10" or integers.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Everything except output_dir, threads and verbose, which do not affect results.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

// Resolves a relative output directory against $IXFDR_OUTPUT_ROOT when set.
std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

// Pipeline stages. Each stage reads the declared files of the stages before it
// from a working directory and writes its own:
//   simulate/ingest -> dataset.csv, manifest.json
//   knockoff        -> knockoff_model.json, augmented.csv, knockoff_diagnostics.json
//   train           -> network_<arm>.bin, train_<arm>.json
//   score           -> scores_<arm>_<method>.csv, univariate_<arm>_<method>.csv
//   select          -> selection_<tag>.csv, selection_<tag>.json
//   evaluate        -> evaluation_<tag>.json
// where arm is "coupled" or "dense" and tag is <arm>_<method>_<calibrated|uncalibrated>.
void stage_simulate(const SimulationSpec& spec, const std::filesystem::path& dir);
void stage_ingest(const ExternalData& source, double train_fraction, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

KnockoffDiagnostics stage_knockoff(const std::filesystem::path& dir, std::uint64_t seed, double ridge);
Matrix load_augmented(const std::filesystem::path& dir);

struct TrainOutcome {
  FitSummary train_fit;
  FitSummary test_fit;
  std::size_t epochs = 0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

std::string arm_name(bool coupled);
std::string selection_tag(bool coupled, ImportanceMethod method, bool calibrated);

TrainOutcome stage_train(const std::filesystem::path& dir, bool coupled, const HiddenSizes& hidden,
                         std::uint64_t init_seed, const TrainConfig& cfg);
ImportanceScores stage_score(const std::filesystem::path& dir, bool coupled, ImportanceMethod method,
                             const AttributionConfig& cfg);

struct StageSelection {
  SelectionResult interactions;
  FeatureSelection features;
};

StageSelection stage_select(const std::filesystem::path& dir, bool coupled, ImportanceMethod method,
                            bool calibrated, double q);
// Requires a manifest with ground truth.
EvalReport stage_evaluate(const std::filesystem::path& dir, bool coupled, ImportanceMethod method,
                          bool calibrated);

struct ArmResult {
  bool coupled = true;
  ImportanceMethod method = ImportanceMethod::kModelBased;
  bool calibrated = true;
  StageSelection selection;
  std::optional<EvalReport> evaluation;
};

struct RepetitionResult {
  std::string dataset;  // "F1".."F10" or the external file stem
  std::size_t repetition = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;
  std::string failed_stage;
  std::optional<KnockoffDiagnostics> knockoff;
  std::vector<std::pair<bool, TrainOutcome>> training;  // (coupled, outcome)
  std::vector<ArmResult> arms;
};

struct SummaryKey {
  std::string dataset;
  ImportanceMethod method;
  bool calibrated;
  bool coupled;
  friend auto operator<=>(const SummaryKey&, const SummaryKey&) = default;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<RepetitionResult> repetitions;
  std::map<SummaryKey, EvalSummary> summaries;

  nlohmann::json to_json() const;
  // Per-repetition metrics, one row per (dataset, method, q, repetition, calibration, coupling).
  void write_repetitions_csv(const std::filesystem::path& path) const;
  // Aggregated bar data (mean and 95% CI) per (dataset, method, calibration, coupling).
  void write_summary_csv(const std::filesystem::path& path) const;
};

// Runs every (dataset, repetition) through the full pipeline and writes
// report.json, repetitions.csv and summary.csv to the output directory. A
// failing repetition is recorded in the report and the others continue.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace ixfdr
