#pragma once

#include "ixfdr/types.hpp"

#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

namespace ixfdr {

// One element of the interaction score set, indices 0-based in the augmented
// space (originals 0..p-1, knockoffs p..2p-1), i < j and j != i + p.
struct LabeledScore {
  std::size_t i = 0;
  std::size_t j = 0;
  double score = 0.0;
  PairClass klass = PairClass::kOO;
};

struct ClassCounts {
  std::size_t oo = 0;
  std::size_t d = 0;   // exactly one knockoff
  std::size_t dd = 0;  // two knockoffs

  std::size_t total() const { return oo + d + dd; }
  // Pairs with at least one knockoff.
  std::size_t any_knockoff() const { return d + dd; }
};

struct SelectionResult {
  double q = 0.0;
  std::optional<double> threshold;  // empty when no candidate satisfies the bound
  std::vector<LabeledScore> selected;  // OO pairs with score >= threshold
  std::optional<double> estimated_fdp;
  ClassCounts counts_at_threshold;

  bool feasible() const { return threshold.has_value(); }
};

struct FeatureSelection {
  double q = 0.0;
  std::optional<double> threshold;
  std::vector<std::size_t> selected;  // 0-based original feature indices
  std::optional<double> estimated_fdp;

  bool feasible() const { return threshold.has_value(); }
};

// All pairs i < j of the calibrated matrix except feature/own-knockoff pairs.
std::vector<LabeledScore> build_gamma(const Matrix& calibrated);

// Smallest t among the distinct nonzero scores with
//   (#{score >= t, >= 1 knockoff} - 2 #{score >= t, 2 knockoffs}) / #{score >= t} <= q.
SelectionResult interaction_threshold(const std::vector<LabeledScore>& gamma, double q);

// W_j = |s1d_j| - |s1d_{j+p}|.
Vector knockoff_stats(const Vector& s1d);

// Knockoff+ threshold: smallest t among distinct nonzero |W_j| with
// (1 + #{W_j <= -t}) / #{W_j >= t} <= q.
FeatureSelection feature_threshold(const Vector& w, double q);

nlohmann::json to_json(const SelectionResult& result);
nlohmann::json to_json(const FeatureSelection& result);

// pair,i,j,score,class,selected for every element of gamma (1-based indices).
void write_selection_csv(const std::filesystem::path& path, const std::vector<LabeledScore>& gamma,
                         const SelectionResult& result);

}  // namespace ixfdr
