#pragma once

#include "ixfdr/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ixfdr {

using HiddenSizes = std::array<std::size_t, 3>;

inline constexpr HiddenSizes kDefaultHiddenSizes{64, 32, 16};
inline constexpr double kInitialFilterWeight = 0.1;

// Feedforward network over an augmented input (x, x_ko) of length 2p.
//
// With the pairwise-coupling layer enabled, filter j combines the feature and
// its knockoff linearly, F_j = z[j] * x[j] + z_tilde[j] * x_ko[j], and the p
// filter outputs feed a three-hidden-layer ELU perceptron. With coupling
// disabled (ablation) the 2p inputs feed the perceptron directly and z,
// z_tilde are empty.
//
// Weight matrices are stored input-major: w[l] has shape (fan_in, fan_out) and
// a layer computes w[l]^T h + b[l].
struct CoupledNetwork {
  std::size_t p = 0;
  Task task = Task::kRegression;
  bool coupled = true;
  HiddenSizes hidden_sizes = kDefaultHiddenSizes;
  std::uint64_t seed = 0;

  Vector z;
  Vector z_tilde;
  std::array<Matrix, 4> w;
  std::array<Vector, 4> b;

  // Affine map from the network output to the response scale (regression);
  // set by train() from training-split statistics.
  double response_shift = 0.0;
  double response_scale = 1.0;

  std::size_t input_dim() const { return 2 * p; }
  std::size_t filter_dim() const { return coupled ? p : 2 * p; }
};

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double l1_filter_penalty = 1e-4;
  double validation_fraction = 0.0;

  void validate() const;
};

struct TrainResult {
  CoupledNetwork net;
  // Full training-set objective before training (entry 0) and after each epoch.
  std::vector<double> loss_trace;
  // Same, on the validation rows; empty when validation_fraction == 0.
  std::vector<double> validation_trace;
};

CoupledNetwork init_network(std::size_t p, const HiddenSizes& hidden, Task task,
                            std::uint64_t seed, bool coupled = true);

// Pre-link affine output for one augmented input.
double forward_affine(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug);

// Network response: the affine output for regression, the logistic of it for
// binary tasks.
double forward(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug);

// Row-wise forward_affine over an n x 2p matrix.
Vector forward_affine_rows(const CoupledNetwork& net, const Matrix& x_aug);

// Predictions on the response scale (de-standardized regression output or
// class-1 probability).
Vector predict(const CoupledNetwork& net, const Matrix& x_aug);

// Gradient of the pre-link output with respect to x_aug (reverse mode).
Vector input_gradient(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug);

// Row i holds the input gradient at row i of `points`.
Matrix input_gradient_rows(const CoupledNetwork& net, const Matrix& points);

// Hessian of the pre-link output with respect to x_aug, computed by pushing a
// full tangent basis forward through the reverse sweep (forward-over-reverse).
// The result is exactly symmetric. ELU'' uses e^u for u <= 0 and 0 otherwise.
Matrix input_hessian(const CoupledNetwork& net, const Eigen::Ref<const Vector>& x_aug);

TrainResult train(CoupledNetwork net, const Matrix& x_aug, const Vector& y,
                  const TrainConfig& cfg);

struct FitSummary {
  double mse = 0.0;
  double r_squared = 0.0;  // regression only
  double accuracy = 0.0;   // binary only
};

FitSummary evaluate_fit(const CoupledNetwork& net, const Matrix& x_aug, const Vector& y);

void save_network(const CoupledNetwork& net, const std::filesystem::path& path);
CoupledNetwork load_network(const std::filesystem::path& path);

}  // namespace ixfdr
