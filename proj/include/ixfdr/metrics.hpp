#pragma once

#include "ixfdr/types.hpp"

#include <map>
#include <set>
#include <vector>

#include <json.hpp>

namespace ixfdr {

struct EvalReport {
  double auroc = 0.0;
  double fdp = 0.0;
  double power = 0.0;
  std::size_t n_selected = 0;
  std::size_t n_true = 0;
};

struct MetricSummary {
  double mean = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  // False when fewer than two values were aggregated (SE reported as 0).
  bool se_defined = false;
};

struct EvalSummary {
  std::size_t repetitions = 0;
  MetricSummary auroc;
  MetricSummary fdp;
  MetricSummary power;
  MetricSummary n_selected;
};

struct FdpPower {
  double fdp = 0.0;
  double power = 0.0;
};

// Scores for every original-original pair (i < j < p) of a 2p x 2p matrix.
std::map<Pair, double> original_pair_scores(const Matrix& scores, std::size_t p);

// Rank-based AUROC (Mann-Whitney) with midranks for ties. Every key of
// `scores` is a candidate; candidates in `truth` are positives.
double auroc(const std::map<Pair, double>& scores, const std::set<Pair>& truth);

// fdp = |selected \ truth| / max(|selected|, 1), power = |selected & truth| / |truth|.
FdpPower fdp_power(const std::set<Pair>& selected, const std::set<Pair>& truth);

// Mean, standard error and mean +/- 1.96 SE for each metric. Values are summed
// in sorted order so the result does not depend on report order.
EvalSummary aggregate(const std::vector<EvalReport>& reports);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const MetricSummary& summary);
nlohmann::json to_json(const EvalSummary& summary);

}  // namespace ixfdr
