#include "ixfdr/error.hpp"
#include "ixfdr/metrics.hpp"
#include "ixfdr/random.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ixfdr;

namespace {

const Pair kA = Pair::of(0, 1);
const Pair kB = Pair::of(0, 2);
const Pair kC = Pair::of(1, 2);

// Direct pairwise definition: P(score_pos > score_neg) + 0.5 P(tie).
double pairwise_auroc(const std::map<Pair, double>& s, const std::set<Pair>& truth) {
  double wins = 0, total = 0;
  for (const auto& [pp, sp] : s) {
    if (!truth.contains(pp)) continue;
    for (const auto& [pn, sn] : s) {
      if (truth.contains(pn)) continue;
      wins += sp > sn ? 1.0 : (sp == sn ? 0.5 : 0.0);
      total += 1;
    }
  }
  return wins / total;
}

EvalReport report(double auroc, double fdp, double power, std::size_t n) {
  EvalReport r;
  r.auroc = auroc;
  r.fdp = fdp;
  r.power = power;
  r.n_selected = n;
  return r;
}

}  // namespace

TEST_CASE("AUROC worked examples") {
  const std::set<Pair> truth{kA};
  CHECK(auroc({{kA, 0.9}, {kB, 0.8}, {kC, 0.1}}, truth) == 1.0);
  CHECK(auroc({{kA, 0.8}, {kB, 0.9}, {kC, 0.1}}, truth) == 0.5);
  CHECK(auroc({{kA, 1.0}, {kB, 1.0}, {kC, 1.0}}, truth) == 0.5);
  CHECK(auroc({{kA, 0.0}, {kB, 0.5}, {kC, 0.7}}, truth) == 0.0);
}

TEST_CASE("AUROC undefined without both classes") {
  CHECK_THROWS_AS(auroc({{kA, 1.0}, {kB, 2.0}}, {}), DataError);
  CHECK_THROWS_AS(auroc({{kA, 1.0}, {kB, 2.0}}, {kA, kB}), DataError);
}

TEST_CASE("AUROC matches the pairwise definition and is rank-invariant") {
  CounterRng rng(8, 0);
  for (int t = 0; t < 200; ++t) {
    const Matrix m = Matrix::NullaryExpr(8, 8, [&] { return static_cast<double>(rng.below(5)); });
    const auto scores = original_pair_scores(m, 8);
    CHECK(scores.size() == 28);
    std::set<Pair> truth;
    for (const auto& [pr, s] : scores) {
      if (rng.uniform() < 0.3) truth.insert(pr);
    }
    if (truth.empty() || truth.size() == scores.size()) continue;
    const double a = auroc(scores, truth);
    CHECK(a == doctest::Approx(pairwise_auroc(scores, truth)).epsilon(1e-12));
    std::map<Pair, double> transformed;
    for (const auto& [pr, s] : scores) transformed[pr] = std::exp(3.0 * s) - 7.0;
    CHECK(auroc(transformed, truth) == doctest::Approx(a).epsilon(1e-12));
  }
}

TEST_CASE("fdp and power") {
  const Pair t1 = Pair::of(0, 1), t2 = Pair::of(1, 2), t3 = Pair::of(2, 3), t4 = Pair::of(3, 4);
  const Pair f1 = Pair::of(0, 9);
  const std::set<Pair> truth{t1, t2, t3, t4};
  const auto same = fdp_power(truth, truth);
  CHECK(same.fdp == 0.0);
  CHECK(same.power == 1.0);
  const auto mixed = fdp_power({t1, t2, f1}, truth);
  CHECK(mixed.fdp == doctest::Approx(1.0 / 3.0));
  CHECK(mixed.power == doctest::Approx(0.5));
  // fdp + precision = 1 on a nonempty selection.
  CHECK(mixed.fdp + 2.0 / 3.0 == doctest::Approx(1.0));
  const auto none = fdp_power({}, truth);
  CHECK(none.fdp == 0.0);
  CHECK(none.power == 0.0);
}

TEST_CASE("aggregate") {
  SUBCASE("single report: zero-width interval, flagged") {
    const auto s = aggregate({report(0.7, 0.1, 0.5, 3)});
    CHECK(s.repetitions == 1);
    CHECK(s.fdp.mean == 0.1);
    CHECK_FALSE(s.fdp.se_defined);
    CHECK(s.fdp.ci_low == s.fdp.ci_high);
  }
  SUBCASE("two reports") {
    const auto s = aggregate({report(0.6, 0.1, 0.5, 2), report(0.8, 0.3, 0.7, 4)});
    CHECK(s.fdp.mean == doctest::Approx(0.2));
    CHECK(s.fdp.se_defined);
    // sd = 0.1414..., se = sd / sqrt(2) = 0.1
    CHECK(s.fdp.se == doctest::Approx(0.1));
    CHECK(s.fdp.ci_high - s.fdp.ci_low == doctest::Approx(2 * 1.96 * 0.1));
    CHECK(s.n_selected.mean == 3.0);
  }
  SUBCASE("identical reports") {
    const std::vector<EvalReport> same(20, report(0.9, 0.05, 0.8, 10));
    const auto s = aggregate(same);
    CHECK(s.power.ci_high - s.power.ci_low == doctest::Approx(0.0));
  }
  SUBCASE("permutation invariant, bit for bit") {
    CounterRng rng(4, 0);
    std::vector<EvalReport> rs;
    for (int k = 0; k < 13; ++k) rs.push_back(report(rng.uniform(), rng.uniform(), rng.uniform(), rng.below(9)));
    const auto a = aggregate(rs);
    std::reverse(rs.begin(), rs.end());
    rng.shuffle(std::span<EvalReport>(rs));
    const auto b = aggregate(rs);
    CHECK(a.fdp.mean == b.fdp.mean);
    CHECK(a.fdp.se == b.fdp.se);
    CHECK(a.auroc.mean == b.auroc.mean);
    CHECK(a.power.se == b.power.se);
  }
  CHECK_THROWS_AS(aggregate({}), ContractViolation);
}
