#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>

namespace ixfdr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Task { kRegression, kBinary };

std::string_view to_string(Task task);
Task parse_task(std::string_view name);

// Unordered feature pair, stored with first < second. Indices are 0-based.
struct Pair {
  std::size_t first = 0;
  std::size_t second = 0;

  static Pair of(std::size_t a, std::size_t b) {
    return a < b ? Pair{a, b} : Pair{b, a};
  }
  friend auto operator<=>(const Pair&, const Pair&) = default;
};

}  // namespace ixfdr

namespace ixfdr {

// Class of a pair in the augmented index space 0..2p-1: both originals (OO),
// exactly one knockoff (D), or both knockoffs (DD).
enum class PairClass { kOO, kD, kDD };

inline PairClass classify_pair(std::size_t i, std::size_t j, std::size_t p) {
  const int knockoffs = (i >= p) + (j >= p);
  return knockoffs == 0 ? PairClass::kOO : knockoffs == 1 ? PairClass::kD : PairClass::kDD;
}

inline std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::kOO: return "OO";
    case PairClass::kD: return "D";
    case PairClass::kDD: return "DD";
  }
  return "?";
}

}  // namespace ixfdr
