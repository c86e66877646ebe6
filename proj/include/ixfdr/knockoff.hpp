#pragma once

#include "ixfdr/types.hpp"

#include <cstdint>
#include <filesystem>

namespace ixfdr {

// Second-order Gaussian knockoff sampler. Given X ~ N(mu, Sigma), knockoffs are
// drawn from
//   X_ko | X ~ N(mu + (I - diag(s) Sigma^-1)(X - mu),
//                2 diag(s) - diag(s) Sigma^-1 diag(s)),
// which gives (X, X_ko) the joint covariance [[Sigma, Sigma - diag(s)],
// [Sigma - diag(s), Sigma]].
struct GaussianKnockoffModel {
  Vector mu;
  Matrix sigma;
  Vector s;
  Matrix cond_mean_map;    // I - diag(s) Sigma^-1
  Matrix cond_cov_factor;  // lower-triangular L with L L^T = conditional covariance
  double ridge = 0.0;      // ridge actually added to the empirical covariance

  std::size_t p() const { return static_cast<std::size_t>(mu.size()); }
};

inline constexpr double kEquicorrelationShrink = 1e-3;
inline constexpr double kMinCovarianceEigenvalue = 1e-8;

// Equicorrelated gap vector: s_j = (1 - 1e-3) min(2 lambda_min(corr), 1) Sigma_jj.
Vector solve_s(const Matrix& sigma);

// Builds the sampler for a known mean and covariance.
GaussianKnockoffModel make_knockoff_model(const Vector& mu, const Matrix& sigma);

// Estimates mean and covariance from data. The covariance gets `ridge` * I,
// and the ridge is increased until the smallest eigenvalue reaches 1e-8. With
// ridge == 0, zero-variance columns raise DegenerateFeatureError.
GaussianKnockoffModel fit_gaussian(const Matrix& x, double ridge);

// Row r draws its noise from stream r of `seed`, so the result does not depend
// on evaluation order. Takes no response: knockoffs are built from X alone.
Matrix sample_knockoffs(const Matrix& x, const GaussianKnockoffModel& model, std::uint64_t seed);

struct KnockoffDiagnostics {
  std::size_t n = 0;
  // max |cov(X_ko) - Sigma|
  double knockoff_cov_deviation = 0.0;
  // max |cov(X, X_ko) - (Sigma - diag(s))|
  double cross_cov_deviation = 0.0;
  // mean(X_ko) - mu per feature
  Vector mean_shift;
  double max_mean_shift = 0.0;

  bool within(double tolerance) const {
    return knockoff_cov_deviation <= tolerance && cross_cov_deviation <= tolerance &&
           max_mean_shift <= tolerance;
  }
};

KnockoffDiagnostics knockoff_diagnostics(const Matrix& x, const Matrix& x_ko,
                                         const GaussianKnockoffModel& model);

// Unbiased (n - 1) sample cross-covariance of the columns of a and b.
Matrix sample_cross_covariance(const Matrix& a, const Matrix& b);

void save_knockoff_model(const GaussianKnockoffModel& model, const std::filesystem::path& path);
GaussianKnockoffModel load_knockoff_model(const std::filesystem::path& path);

}  // namespace ixfdr
