#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance binary. Deliberately naive: quadratic scans, no sorting tricks.

#include "ixfdr/fdr.hpp"
#include "ixfdr/random.hpp"
#include "ixfdr/simsuite.hpp"
#include "ixfdr/types.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ixfdr::testing {

inline std::optional<double> brute_interaction_threshold(const std::vector<LabeledScore>& gamma,
                                                         double q) {
  std::optional<double> best;
  for (const auto& cand : gamma) {
    const double t = cand.score;
    if (t == 0.0) continue;
    double knock = 0, dd = 0, total = 0;
    for (const auto& g : gamma) {
      if (g.score < t) continue;
      total += 1;
      if (g.klass != PairClass::kOO) knock += 1;
      if (g.klass == PairClass::kDD) dd += 1;
    }
    if ((knock - 2.0 * dd) / total <= q && (!best || t < *best)) best = t;
  }
  return best;
}

inline std::optional<double> brute_feature_threshold(const Vector& w, double q) {
  std::optional<double> best;
  for (Eigen::Index c = 0; c < w.size(); ++c) {
    const double t = std::abs(w(c));
    if (t == 0.0) continue;
    double neg = 0, pos = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w(j) <= -t) neg += 1;
      if (w(j) >= t) pos += 1;
    }
    if (pos > 0 && (1.0 + neg) / pos <= q && (!best || t < *best)) best = t;
  }
  return best;
}

// Random Gamma over p originals with scores drawn from a small integer grid so
// that ties are common, plus a sprinkling of exact zeros.
inline std::vector<LabeledScore> random_gamma(std::size_t p, CounterRng& rng) {
  std::vector<LabeledScore> gamma;
  const std::uint64_t levels = 1 + rng.below(12);
  const std::uint64_t signal = rng.below(4);
  for (std::size_t i = 0; i < 2 * p; ++i) {
    for (std::size_t j = i + 1; j < 2 * p; ++j) {
      if (j == i + p) continue;
      const PairClass k = classify_pair(i, j, p);
      // Tilt originals upward so both feasible and infeasible instances occur.
      double s = static_cast<double>(rng.below(levels + 1));
      if (k == PairClass::kOO) s += static_cast<double>(rng.below(signal + 1));
      if (rng.uniform() < 0.05) s = 0.0;
      gamma.push_back({i, j, s, k});
    }
  }
  return gamma;
}

inline Vector random_w(CounterRng& rng) {
  const auto p = static_cast<Eigen::Index>(2 + rng.below(30));
  Vector w(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double mag = static_cast<double>(rng.below(8));
    w(j) = rng.uniform() < 0.75 ? mag : -mag;
  }
  return w;
}

// Rows of an equicorrelated Gaussian: unit variances, off-diagonal rho.
inline Matrix equicorrelated_gaussian(std::size_t n, std::size_t p, double rho, std::uint64_t seed) {
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  const double a = std::sqrt(rho), b = std::sqrt(1.0 - rho);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    CounterRng rng(seed, static_cast<std::uint64_t>(r));
    const double common = rng.normal();
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = a * common + b * rng.normal();
  }
  return x;
}

// Mixed-partial finite-difference check of a frozen pair list on x1..x10.
struct OracleOutcome {
  bool ok = true;
  std::string detail;
};

inline double mixed_partial(int fid, std::array<double, kActiveFeatures> x, std::size_t i,
                            std::size_t j, double h) {
  auto f = [&](double di, double dj) {
    auto y = x;
    y[i] += di;
    y[j] += dj;
    return evaluate_function(fid, std::span<const double, kActiveFeatures>(y));
  };
  return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
}

inline OracleOutcome ground_truth_oracle(int fid, std::uint64_t seed, std::size_t points = 20,
                                         double h = 1e-2) {
  OracleOutcome out;
  const std::set<Pair> truth = ground_truth(fid);
  std::vector<std::array<double, kActiveFeatures>> xs(points);
  CounterRng rng(seed, static_cast<std::uint64_t>(fid));
  for (auto& x : xs) {
    for (double& v : x) v = rng.uniform(0.1, 0.9);
  }
  for (std::size_t i = 0; i < kActiveFeatures; ++i) {
    for (std::size_t j = i + 1; j < kActiveFeatures; ++j) {
      double largest = 0.0;
      for (const auto& x : xs) largest = std::max(largest, std::abs(mixed_partial(fid, x, i, j, h)));
      const bool claimed = truth.contains(Pair::of(i, j));
      if (claimed && !(largest > 1e-6)) {
        out.ok = false;
        out.detail += "F" + std::to_string(fid) + " claimed pair (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ") shows no interaction; ";
      }
      if (!claimed && !(largest < 1e-8)) {
        out.ok = false;
        out.detail += "F" + std::to_string(fid) + " unlisted pair (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ") has mixed partial " + std::to_string(largest) + "; ";
      }
    }
  }
  return out;
}

}  // namespace ixfdr::testing
