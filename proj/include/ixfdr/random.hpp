#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace ixfdr {

std::uint64_t splitmix64(std::uint64_t x);

// Derives an independent child seed, e.g. per repetition or per stage.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

// Counter-based generator: the k-th draw of stream s under seed is a pure
// function of (seed, s, k). Rows sampled with stream = row index therefore do
// not depend on the order in which rows are visited.
//
// The uniform/normal transforms are implemented here rather than through
// <random> distributions so output is identical across standard libraries.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ixfdr
