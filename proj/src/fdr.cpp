#include "ixfdr/fdr.hpp"

#include "ixfdr/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <tuple>

namespace ixfdr {

namespace {

void check_level(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("target FDR level q must lie in (0, 1)");
}

}  // namespace

std::vector<LabeledScore> build_gamma(const Matrix& calibrated) {
  const auto dim = calibrated.rows();
  if (dim != calibrated.cols() || dim % 2 != 0) {
    throw ContractViolation("build_gamma: expected a 2p x 2p matrix");
  }
  const auto p = static_cast<std::size_t>(dim / 2);
  std::vector<LabeledScore> gamma;
  gamma.reserve(static_cast<std::size_t>(dim * (dim - 1) / 2) - p);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = i + 1; j < dim; ++j) {
      const double a = calibrated(i, j);
      const double b = calibrated(j, i);
      if (a != b && std::abs(a - b) > 1e-12 * std::max(std::abs(a), std::abs(b))) {
        throw ContractViolation("build_gamma: score matrix is not symmetric");
      }
      if (!(a >= 0.0) || !std::isfinite(a)) {
        throw ContractViolation("build_gamma: scores must be finite and nonnegative");
      }
      const auto ui = static_cast<std::size_t>(i);
      const auto uj = static_cast<std::size_t>(j);
      if (uj == ui + p) continue;
      gamma.push_back({ui, uj, a, classify_pair(ui, uj, p)});
    }
  }
  return gamma;
}

SelectionResult interaction_threshold(const std::vector<LabeledScore>& gamma, double q) {
  check_level(q);
  for (const auto& g : gamma) {
    if (!(g.score >= 0.0) || !std::isfinite(g.score)) {
      throw ContractViolation("interaction_threshold: scores must be finite and nonnegative");
    }
  }
  SelectionResult result;
  result.q = q;

  std::vector<const LabeledScore*> order;
  order.reserve(gamma.size());
  for (const auto& g : gamma) order.push_back(&g);
  std::sort(order.begin(), order.end(), [](const LabeledScore* a, const LabeledScore* b) {
    if (a->score != b->score) return a->score > b->score;
    return std::tie(a->i, a->j) < std::tie(b->i, b->j);
  });

  // Sweep distinct scores from the top; counts cover every element >= t.
  ClassCounts counts;
  std::size_t k = 0;
  while (k < order.size()) {
    const double t = order[k]->score;
    if (t == 0.0) break;
    while (k < order.size() && order[k]->score == t) {
      switch (order[k]->klass) {
        case PairClass::kOO: ++counts.oo; break;
        case PairClass::kD: ++counts.d; break;
        case PairClass::kDD: ++counts.dd; break;
      }
      ++k;
    }
    const double estimate =
        (static_cast<double>(counts.any_knockoff()) - 2.0 * static_cast<double>(counts.dd)) /
        static_cast<double>(counts.total());
    if (estimate <= q) {
      result.threshold = t;
      result.estimated_fdp = estimate;
      result.counts_at_threshold = counts;
    }
  }

  if (result.threshold) {
    for (const LabeledScore* g : order) {
      if (g->score < *result.threshold) break;
      if (g->klass == PairClass::kOO) result.selected.push_back(*g);
    }
  }
  return result;
}

Vector knockoff_stats(const Vector& s1d) {
  if (s1d.size() % 2 != 0) throw ContractViolation("knockoff_stats: expected 2p scores");
  if (!s1d.allFinite()) throw ContractViolation("knockoff_stats: non-finite scores");
  const auto p = s1d.size() / 2;
  return s1d.head(p).cwiseAbs() - s1d.tail(p).cwiseAbs();
}

FeatureSelection feature_threshold(const Vector& w, double q) {
  check_level(q);
  if (!w.allFinite()) throw ContractViolation("feature_threshold: non-finite statistics");
  FeatureSelection result;
  result.q = q;

  std::vector<double> candidates;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (w(j) != 0.0) candidates.push_back(std::abs(w(j)));
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Ascending scan: the first qualifying candidate is the minimum.
  for (double t : candidates) {
    std::size_t negatives = 0;
    std::size_t positives = 0;
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      negatives += w(j) <= -t;
      positives += w(j) >= t;
    }
    if (positives == 0) continue;
    const double estimate = (1.0 + static_cast<double>(negatives)) / static_cast<double>(positives);
    if (estimate <= q) {
      result.threshold = t;
      result.estimated_fdp = estimate;
      break;
    }
  }
  if (result.threshold) {
    for (Eigen::Index j = 0; j < w.size(); ++j) {
      if (w(j) >= *result.threshold) result.selected.push_back(static_cast<std::size_t>(j));
    }
  }
  return result;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const SelectionResult& result) {
  nlohmann::json j;
  j["q"] = result.q;
  j["threshold"] = optional_number(result.threshold);
  j["feasible"] = result.feasible();
  j["estimated_fdp"] = optional_number(result.estimated_fdp);
  j["counts_at_threshold"] = {{"OO", result.counts_at_threshold.oo},
                              {"D", result.counts_at_threshold.d},
                              {"DD", result.counts_at_threshold.dd}};
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& s : result.selected) pairs.push_back({{"i", s.i + 1}, {"j", s.j + 1}, {"score", s.score}});
  j["selected"] = std::move(pairs);
  return j;
}

nlohmann::json to_json(const FeatureSelection& result) {
  nlohmann::json j;
  j["q"] = result.q;
  j["threshold"] = optional_number(result.threshold);
  j["feasible"] = result.feasible();
  j["estimated_fdp"] = optional_number(result.estimated_fdp);
  nlohmann::json features = nlohmann::json::array();
  for (std::size_t f : result.selected) features.push_back(f + 1);
  j["selected"] = std::move(features);
  return j;
}

void write_selection_csv(const std::filesystem::path& path, const std::vector<LabeledScore>& gamma,
                         const SelectionResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "pair,i,j,score,class,selected\n";
  char buf[32];
  for (const auto& g : gamma) {
    const bool selected = result.threshold && g.klass == PairClass::kOO && g.score >= *result.threshold;
    out << g.i + 1 << '-' << g.j + 1 << ',' << g.i + 1 << ',' << g.j + 1 << ',';
    const auto res = std::to_chars(buf, buf + sizeof buf, g.score);
    out.write(buf, res.ptr - buf);
    out << ',' << to_string(g.klass) << ',' << (selected ? 1 : 0) << '\n';
  }
}

}  // namespace ixfdr
