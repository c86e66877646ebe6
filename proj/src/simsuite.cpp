#include "ixfdr/simsuite.hpp"

#include "ixfdr/error.hpp"
#include "ixfdr/random.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace ixfdr {

void SimulationSpec::validate() const {
  if (function_id < 1 || function_id > kNumSimulationFunctions) {
    throw ConfigError("unknown simulation function F" + std::to_string(function_id));
  }
  if (p < kActiveFeatures) throw ConfigError("simulation requires p >= 10");
  if (n < 2) throw ConfigError("simulation requires n >= 2");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1]");
  }
}

double evaluate_function(int function_id, std::span<const double, kActiveFeatures> v) {
  using std::abs;
  using std::exp;
  using std::log;
  using std::pow;
  using std::sqrt;
  constexpr double pi = std::numbers::pi;
  const double x1 = v[0], x2 = v[1], x3 = v[2], x4 = v[3], x5 = v[4];
  const double x6 = v[5], x7 = v[6], x8 = v[7], x9 = v[8], x10 = v[9];

  switch (function_id) {
    case 1:
      return pow(pi, x1 * x2) * sqrt(2.0 * x3) - std::asin(x4) + log(x3 + x5) -
             (x9 / x10) * sqrt(x7 / x8) - x2 * x7;
    case 2:
      return pow(pi, x1 * x2) * sqrt(2.0 * abs(x3)) - std::asin(0.5 * x4) +
             log(abs(x3 + x5) + 1.0) - (x9 / (1.0 + abs(x10))) * sqrt(x7 / (1.0 + abs(x8))) -
             x2 * x7;
    case 3:
    case 4: {
      double f = exp(abs(x1 - x2)) + abs(x2 * x3) - pow(x3, 2.0 * abs(x4)) +
                 log(x4 * x4 + x5 * x5 + x7 * x7 + x8 * x8) + x9 + 1.0 / (1.0 + x10 * x10);
      if (function_id == 4) f += (x1 * x4) * (x1 * x4);
      return f;
    }
    case 5:
      return 1.0 / (1.0 + x1 * x1 + x2 * x2 + x3 * x3) + sqrt(exp(x4 + x5)) + abs(x6 + x7) +
             x8 * x9 * x10;
    case 6:
      return exp(abs(x1 * x2) + 1.0) - exp(abs(x3 + x4) + 1.0) + std::cos(x5 + x6 - x8) +
             sqrt(x8 * x8 + x9 * x9 + x10 * x10);
    case 7: {
      const double at = std::atan(x1) + std::atan(x2);
      const double prod = x4 * x5 * x6 * x7 * x8;
      double sum = 0.0;
      for (double xi : v) sum += xi;
      return at * at + std::max(x3 * x4 + x6, 0.0) - 1.0 / (1.0 + prod * prod) +
             pow(abs(x7) / (1.0 + abs(x9)), 5.0) + sum;
    }
    case 8:
      return x1 * x2 + pow(2.0, x3 + x5 + x6) + pow(2.0, x3 + x4 + x5 + x7) +
             std::sin(x7 * std::sin(x8 + x9)) + std::acos(0.9 * x10);
    case 9: {
      const double triple = x6 * x7 * x8;
      return std::tanh(x1 * x2 + x3 * x4) * sqrt(abs(x5)) + exp(x5 + x6) +
             log(triple * triple + 1.0) + x9 * x10 + 1.0 / (1.0 + abs(x10));
    }
    case 10:
      return std::sinh(x1 + x2) + std::acos(std::tanh(x3 + x5 + x7)) + std::cos(x4 + x5) +
             1.0 / std::cos(x7 * x9);
    default:
      throw ConfigError("unknown simulation function F" + std::to_string(function_id));
  }
}

namespace {

// Variable groups (1-based) of the non-additive terms of each function on
// (0,1)^10. Absolute values of sums of positive features reduce to plain sums
// there, and max(x3 x4 + x6, 0) never clips, so those terms are only partly
// (or not at all) non-additive.
std::vector<std::vector<std::size_t>> interaction_terms(int function_id) {
  switch (function_id) {
    case 1:
    case 2: return {{1, 2, 3}, {3, 5}, {7, 8, 9, 10}, {2, 7}};
    case 3: return {{1, 2}, {2, 3}, {3, 4}, {4, 5, 7, 8}};
    case 4: return {{1, 2}, {2, 3}, {3, 4}, {1, 4}, {4, 5, 7, 8}};
    case 5: return {{1, 2, 3}, {4, 5}, {8, 9, 10}};
    case 6: return {{1, 2}, {3, 4}, {5, 6, 8}, {8, 9, 10}};
    case 7: return {{1, 2}, {3, 4}, {4, 5, 6, 7, 8}, {7, 9}};
    case 8: return {{1, 2}, {3, 5, 6}, {3, 4, 5, 7}, {7, 8, 9}};
    case 9: return {{1, 2, 3, 4, 5}, {5, 6}, {6, 7, 8}, {9, 10}};
    case 10: return {{1, 2}, {3, 5, 7}, {4, 5}, {7, 9}};
    default:
      throw ConfigError("unknown simulation function F" + std::to_string(function_id));
  }
}

}  // namespace

std::set<Pair> ground_truth(int function_id) {
  std::set<Pair> pairs;
  for (const auto& term : interaction_terms(function_id)) {
    for (std::size_t a = 0; a < term.size(); ++a) {
      for (std::size_t b = a + 1; b < term.size(); ++b) pairs.insert(Pair::of(term[a] - 1, term[b] - 1));
    }
  }
  return pairs;
}

Dataset generate(const SimulationSpec& spec) {
  spec.validate();
  Dataset data;
  data.task = Task::kRegression;
  data.feature_names = default_feature_names(spec.p);
  data.response_name = "y";
  const auto n = static_cast<Eigen::Index>(spec.n);
  const auto p = static_cast<Eigen::Index>(spec.p);
  data.x.resize(n, p);
  data.y.resize(n);
  std::array<double, kActiveFeatures> active{};
  for (Eigen::Index r = 0; r < n; ++r) {
    CounterRng rng(spec.seed, static_cast<std::uint64_t>(r));
    for (Eigen::Index j = 0; j < p; ++j) data.x(r, j) = rng.uniform();
    for (std::size_t j = 0; j < kActiveFeatures; ++j) active[j] = data.x(r, static_cast<Eigen::Index>(j));
    const double y = evaluate_function(spec.function_id, active);
    if (!std::isfinite(y)) {
      throw DataError("F" + std::to_string(spec.function_id) + " produced a non-finite response at row " +
                      std::to_string(r));
    }
    data.y(r) = y;
  }
  data.n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(spec.n)));
  data.truth = ground_truth(spec.function_id);
  return data;
}

}  // namespace ixfdr
