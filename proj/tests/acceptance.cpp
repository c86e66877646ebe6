// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Tolerances and runtime limits are fixed
// constants below; nothing is tuned after the fact.

#include "ixfdr/fdr.hpp"
#include "ixfdr/harness.hpp"
#include "ixfdr/knockoff.hpp"
#include "ixfdr/network.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace ixfdr;
using namespace ixfdr::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= time_limit_s;
  if (!in_time) o.detail += "; exceeded " + std::to_string(static_cast<int>(time_limit_s)) + " s";
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::printf("[%s] %d %s: %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1 ---------------------------------------------------------------------
Outcome knockoff_moments() {
  constexpr std::size_t p = 10, n = 100000;
  constexpr double rho = 0.3, tol = 0.05;
  const Matrix x = equicorrelated_gaussian(n, p, rho, 1);
  const GaussianKnockoffModel model = fit_gaussian(x, 0.0);
  const Matrix ko = sample_knockoffs(x, model, 2);
  // Targets from the true covariance as well as from the fitted model.
  Matrix sigma = Matrix::Constant(p, p, rho);
  sigma.diagonal().setOnes();
  const Matrix cov_ko = sample_cross_covariance(ko, ko);
  const Matrix cov_x_ko = sample_cross_covariance(x, ko);
  const Matrix cross_target = sigma - Matrix(model.s.asDiagonal());
  const double dev_ko = (cov_ko - sigma).cwiseAbs().maxCoeff();
  const double dev_cross = (cov_x_ko - cross_target).cwiseAbs().maxCoeff();
  const KnockoffDiagnostics d = knockoff_diagnostics(x, ko, model);
  const bool ok = dev_ko <= tol && dev_cross <= tol && d.knockoff_cov_deviation <= tol &&
                  d.cross_cov_deviation <= tol;
  return {ok, "max |cov(Xk) - Sigma| = " + fmt("%.4f", dev_ko) + ", max |cov(X,Xk) - (Sigma - diag s)| = " +
                  fmt("%.4f", dev_cross) + " (fitted-model targets " + fmt("%.4f", d.knockoff_cov_deviation) +
                  " / " + fmt("%.4f", d.cross_cov_deviation) + "), tol 0.05"};
}

// ---- 2 ---------------------------------------------------------------------
Outcome threshold_oracles() {
  CounterRng rng(2, 0);
  int interaction_mismatch = 0, feature_mismatch = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto gamma = random_gamma(2 + rng.below(9), rng);
    const double q = rng.uniform(0.01, 0.6);
    interaction_mismatch += interaction_threshold(gamma, q).threshold != brute_interaction_threshold(gamma, q);
  }
  for (int t = 0; t < 1000; ++t) {
    const Vector w = random_w(rng);
    const double q = rng.uniform(0.05, 0.6);
    feature_mismatch += feature_threshold(w, q).threshold != brute_feature_threshold(w, q);
  }
  return {interaction_mismatch == 0 && feature_mismatch == 0,
          std::to_string(interaction_mismatch) + "/1000 interaction and " + std::to_string(feature_mismatch) +
              "/1000 feature threshold mismatches"};
}

// ---- 3 ---------------------------------------------------------------------
Outcome differentiation() {
  constexpr double h = 1e-4;
  double worst_grad = 0, worst_hess = 0;
  bool symmetric = true;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto [net, x] = random_smooth_case(50000 + s);
    const Vector g = input_gradient(net, x);
    const Matrix hess = input_hessian(net, x);
    symmetric = symmetric && hess == hess.transpose();
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Vector up = x, down = x;
      up(i) += h;
      down(i) -= h;
      const double fd = (forward_affine(net, up) - forward_affine(net, down)) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(g(i) - fd) / std::max(std::abs(fd), 1e-6));
      const Vector fdh = (input_gradient(net, up) - input_gradient(net, down)) / (2 * h);
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        worst_hess = std::max(worst_hess, std::abs(hess(k, i) - fdh(k)) / std::max(std::abs(fdh(k)), 1e-6));
      }
    }
  }
  return {worst_grad < 1e-5 && worst_hess < 1e-3 && symmetric,
          "worst gradient rel err " + fmt("%.2e", worst_grad) + " (tol 1e-5), Hessian " +
              fmt("%.2e", worst_hess) + " (tol 1e-3), exactly symmetric: " + (symmetric ? "yes" : "no")};
}

// ---- 4-7 -------------------------------------------------------------------
struct Arms {
  std::map<SummaryKey, EvalSummary> s;
  std::size_t failed_reps = 0;
  const EvalSummary& at(int f, bool calibrated, bool coupled) const {
    return s.at({"F" + std::to_string(f), ImportanceMethod::kModelBased, calibrated, coupled});
  }
};

Arms simulation_study() {
  ExperimentConfig cfg;
  cfg.functions = {1, 2, 3, 4};
  cfg.n = 4000;
  cfg.q = 0.2;
  cfg.repetitions = 10;
  cfg.methods = {ImportanceMethod::kModelBased};
  cfg.calibration = {true, false};
  cfg.coupling = {true, false};
  cfg.seed = 20240;
  cfg.output_dir = temp_dir("acceptance_study");
  const ExperimentReport report = run_experiment(cfg);
  Arms a;
  a.s = report.summaries;
  for (const auto& r : report.repetitions) a.failed_reps += r.error.has_value();
  std::printf("    study output: %s\n", cfg.output_dir.c_str());
  std::printf("    %-4s %-11s %-8s %8s %8s %8s %8s\n", "fn", "calibration", "coupling", "AUROC", "FDP", "power",
              "n_sel");
  for (const auto& [k, s] : a.s) {
    std::printf("    %-4s %-11s %-8s %8.3f %8.3f %8.3f %8.1f\n", k.dataset.c_str(), k.calibrated ? "on" : "off",
                k.coupled ? "on" : "off", s.auroc.mean, s.fdp.mean, s.power.mean, s.n_selected.mean);
  }
  std::fflush(stdout);
  return a;
}

Outcome fdr_control(const Arms& a) {
  std::string detail;
  bool ok = a.failed_reps == 0;
  for (int f = 1; f <= 4; ++f) {
    const EvalSummary& s = a.at(f, true, true);
    ok = ok && s.repetitions == 10 && s.fdp.mean <= 0.25;
    detail += "F" + std::to_string(f) + " " + fmt("%.3f", s.fdp.mean) + (f < 4 ? ", " : "");
  }
  return {ok, "mean FDP (calibrated, coupled) " + detail + "; bound 0.25"};
}

Outcome calibration_necessity(const Arms& a) {
  std::string detail;
  bool any = false;
  for (int f = 1; f <= 4; ++f) {
    const double fdp = a.at(f, false, true).fdp.mean;
    any = any || fdp > 0.2;
    detail += "F" + std::to_string(f) + " " + fmt("%.3f", fdp) + (f < 4 ? ", " : "");
  }
  return {any, "mean FDP (uncalibrated, coupled) " + detail + "; need one > 0.2"};
}

Outcome coupling_power(const Arms& a) {
  double with = 0, without = 0;
  for (int f = 1; f <= 4; ++f) {
    with += a.at(f, true, true).power.mean / 4;
    without += a.at(f, true, false).power.mean / 4;
  }
  return {with >= without, "mean power over F1-F4 (calibrated): coupling " + fmt("%.3f", with) +
                               ", no coupling " + fmt("%.3f", without)};
}

Outcome ranking_quality(const Arms& a) {
  std::string detail;
  bool ok = true;
  for (int f = 1; f <= 4; ++f) {
    const double cal = a.at(f, true, true).auroc.mean;
    const double raw = a.at(f, false, true).auroc.mean;
    ok = ok && cal >= raw - 0.05;
    detail += "F" + std::to_string(f) + " " + fmt("%.3f", cal) + " vs " + fmt("%.3f", raw) + (f < 4 ? ", " : "");
  }
  return {ok, "AUROC calibrated vs uncalibrated (coupled) " + detail + "; slack 0.05"};
}

// ---- 8 ---------------------------------------------------------------------
Outcome ground_truth_agreement() {
  std::string problems;
  for (int f = 1; f <= kNumSimulationFunctions; ++f) {
    const OracleOutcome o = ground_truth_oracle(f, 8);
    problems += o.detail;
  }
  return {problems.empty(), problems.empty() ? "F1-F10 frozen pair lists match the mixed-partial oracle" : problems};
}

// ---- 9 ---------------------------------------------------------------------
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = temp_dir("acceptance_determinism");
  for (const char* name : {"a", "b"}) {
    const std::string cmd = std::string(IXFDR_CLI_PATH) + " run --functions F1 --n 2000 --repetitions 1 --seed 9 --out " +
                            (root / name).string() + " > /dev/null";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "run exited with status " + std::to_string(status)};
  }
  const std::string a = slurp(root / "a" / "report.json");
  const std::string b = slurp(root / "b" / "report.json");
  return {!a.empty() && a == b, "report.json " + std::to_string(a.size()) + " bytes, identical: " + (a == b ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion(1, "knockoff moment fidelity", 30, knockoff_moments);
  criterion(2, "threshold oracle equivalence", 10, threshold_oracles);
  criterion(3, "differentiation correctness", 60, differentiation);

  const auto start = std::chrono::steady_clock::now();
  Arms arms;
  bool study_ok = true;
  std::string study_error;
  try {
    arms = simulation_study();
  } catch (const std::exception& e) {
    study_ok = false;
    study_error = e.what();
  }
  const double study_secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("    simulation study (F1-F4, n=4000, q=0.2, 10 reps, 4 arms): %.1f s\n", study_secs);
  auto study = [&](Outcome (*fn)(const Arms&)) {
    return [&, fn] {
      if (!study_ok) return Outcome{false, "study failed: " + study_error};
      Outcome o = fn(arms);
      if (study_secs > 1800) {
        o.pass = false;
        o.detail += "; study exceeded 30 min";
      }
      return o;
    };
  };
  criterion(4, "FDR control with calibration", 1800, study(fdr_control));
  criterion(5, "calibration necessity", 1800, study(calibration_necessity));
  criterion(6, "coupling-layer power gain", 1800, study(coupling_power));
  criterion(7, "ranking quality preservation", 1800, study(ranking_quality));

  criterion(8, "ground-truth oracle", 60, ground_truth_agreement);
  criterion(9, "determinism", 180, determinism);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
