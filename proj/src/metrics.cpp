#include "ixfdr/metrics.hpp"

#include "ixfdr/error.hpp"

#include <algorithm>
#include <cmath>

namespace ixfdr {

std::map<Pair, double> original_pair_scores(const Matrix& scores, std::size_t p) {
  if (static_cast<std::size_t>(scores.rows()) < p || static_cast<std::size_t>(scores.cols()) < p) {
    throw ContractViolation("original_pair_scores: matrix smaller than p");
  }
  std::map<Pair, double> out;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      out[{i, j}] = scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return out;
}

double auroc(const std::map<Pair, double>& scores, const std::set<Pair>& truth) {
  std::vector<std::pair<double, bool>> items;
  items.reserve(scores.size());
  std::size_t positives = 0;
  for (const auto& [pair, score] : scores) {
    const bool positive = truth.contains(pair);
    positives += positive;
    items.emplace_back(score, positive);
  }
  const std::size_t negatives = items.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw DataError("AUROC undefined: need at least one positive and one negative candidate");
  }
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double positive_rank_sum = 0.0;
  std::size_t k = 0;
  while (k < items.size()) {
    std::size_t end = k;
    while (end < items.size() && items[end].first == items[k].first) ++end;
    // Ranks k+1..end share the midrank.
    const double midrank = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t m = k; m < end; ++m) {
      if (items[m].second) positive_rank_sum += midrank;
    }
    k = end;
  }
  const double np = static_cast<double>(positives);
  const double nn = static_cast<double>(negatives);
  return (positive_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

FdpPower fdp_power(const std::set<Pair>& selected, const std::set<Pair>& truth) {
  std::size_t hits = 0;
  for (const auto& s : selected) hits += truth.contains(s);
  FdpPower out;
  out.fdp = static_cast<double>(selected.size() - hits) /
            static_cast<double>(std::max<std::size_t>(selected.size(), 1));
  out.power = truth.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(truth.size());
  return out;
}

namespace {

MetricSummary summarize(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  MetricSummary s;
  const auto n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    s.se_defined = true;
  }
  s.ci_low = s.mean - 1.96 * s.se;
  s.ci_high = s.mean + 1.96 * s.se;
  return s;
}

}  // namespace

EvalSummary aggregate(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw ContractViolation("aggregate: no reports");
  std::vector<double> auc, fdp, power, selected;
  for (const auto& r : reports) {
    auc.push_back(r.auroc);
    fdp.push_back(r.fdp);
    power.push_back(r.power);
    selected.push_back(static_cast<double>(r.n_selected));
  }
  EvalSummary s;
  s.repetitions = reports.size();
  s.auroc = summarize(std::move(auc));
  s.fdp = summarize(std::move(fdp));
  s.power = summarize(std::move(power));
  s.n_selected = summarize(std::move(selected));
  return s;
}

nlohmann::json to_json(const EvalReport& report) {
  return {{"auroc", report.auroc},
          {"fdp", report.fdp},
          {"power", report.power},
          {"n_selected", report.n_selected},
          {"n_true", report.n_true}};
}

nlohmann::json to_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"se", s.se}, {"ci_low", s.ci_low}, {"ci_high", s.ci_high},
          {"se_defined", s.se_defined}};
}

nlohmann::json to_json(const EvalSummary& s) {
  return {{"repetitions", s.repetitions},
          {"auroc", to_json(s.auroc)},
          {"fdp", to_json(s.fdp)},
          {"power", to_json(s.power)},
          {"n_selected", to_json(s.n_selected)}};
}

}  // namespace ixfdr
