#pragma once

#include "ixfdr/dataset.hpp"

#include <cstdint>
#include <set>
#include <span>

namespace ixfdr {

inline constexpr int kNumSimulationFunctions = 10;
inline constexpr std::size_t kActiveFeatures = 10;

struct SimulationSpec {
  int function_id = 1;  // 1..10
  std::size_t n = 20000;
  std::size_t p = 30;
  std::uint64_t seed = 0;
  double train_fraction = 0.5;

  void validate() const;
};

// Benchmark response F_k evaluated on x1..x10 (x[0] is x1).
double evaluate_function(int function_id, std::span<const double, kActiveFeatures> x);

// Pairs of interacting features (0-based) for F_k on the unit cube: every pair
// inside a non-additive term. Higher-order terms contribute all their pairs.
std::set<Pair> ground_truth(int function_id);

// Features i.i.d. U(0,1), response F_k without noise. Row r is drawn from
// stream r of the seed; the first floor(n * train_fraction) rows are training.
Dataset generate(const SimulationSpec& spec);

}  // namespace ixfdr
