#pragma once

#include "ixfdr/network.hpp"
#include "ixfdr/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

namespace ixfdr {

enum class ImportanceMethod { kModelBased, kInstanceBased };

std::string_view to_string(ImportanceMethod method);
ImportanceMethod parse_method(std::string_view name);

struct AttributionConfig {
  std::size_t alpha_steps = 32;
  std::size_t beta_steps = 32;
  // Explicit baselines (each of length 2p). When empty, `sampled_baselines`
  // rows drawn from the data are used, or the data mean if that is 0 too.
  std::vector<Vector> baselines;
  std::size_t sampled_baselines = 0;
  std::uint64_t baseline_seed = 0;
  std::size_t sample_cap = 1000;
  double epsilon_floor = 1e-12;
  // Worker threads for per-sample attribution; 0 picks hardware concurrency.
  std::size_t threads = 0;

  void validate() const;
};

// Indices 0..p-1 are original features, p..2p-1 their knockoffs.
struct ImportanceScores {
  ImportanceMethod method = ImportanceMethod::kModelBased;
  Vector s1d;         // 2p univariate scores
  Matrix s2d;         // 2p x 2p raw interaction scores
  Matrix calibrated;  // 2p x 2p calibrated scores
  std::size_t samples_used = 0;
};

// Weight-based pairwise score: ((Zagg_i Wint_i) .* (Zagg_j Wint_j))^T Wagg with
// Wagg = W1 W2 W3 and Wint the first-layer weights repeated for knockoffs.
// Without the coupling layer, Zagg is 1 and Wint is the 2p-row first layer.
Matrix model_based_2d(const CoupledNetwork& net);

// (z .* W1d, z_tilde .* W1d) with W1d = W0 Wagg.
Vector model_based_1d(const CoupledNetwork& net);

// Integrated-Hessian pairwise scores summed over the first sample_cap rows of
// x_aug, with the double path integral approximated on a midpoint grid.
Matrix instance_based_2d(const CoupledNetwork& net, const Matrix& x_aug,
                         const AttributionConfig& cfg);

// Integrated-gradient univariate scores, same sampling and baselines.
Vector instance_based_1d(const CoupledNetwork& net, const Matrix& x_aug,
                         const AttributionConfig& cfg);

// S_ij = |s2d_ij| / sqrt(max(|s1d_i s1d_j|, epsilon_floor)).
Matrix calibrate(const Matrix& s2d, const Vector& s1d, double epsilon_floor);

ImportanceScores compute_scores(const CoupledNetwork& net, const Matrix& x_aug,
                                ImportanceMethod method, const AttributionConfig& cfg);

// Long format, one row per pair i < j (1-based): i,j,class,raw,calibrated.
void write_scores_csv(const std::filesystem::path& path, const ImportanceScores& scores);
// One row per augmented index: index,s1d.
void write_univariate_csv(const std::filesystem::path& path, const ImportanceScores& scores);
ImportanceScores read_scores(const std::filesystem::path& pairs_csv,
                             const std::filesystem::path& univariate_csv,
                             ImportanceMethod method);

}  // namespace ixfdr
