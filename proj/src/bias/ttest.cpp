#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "difflab/bias.hpp"
#include "difflab/error.hpp"
#include "difflab/stats.hpp"

namespace difflab {

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestVariant variant) {
  require(a.size() >= 2 && b.size() >= 2, "t-test needs at least two runs per group");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = stats::mean(a);
  const double mb = stats::mean(b);
  const double va = stats::variance(a, 1);
  const double vb = stats::variance(b, 1);

  TTestResult result;
  result.mean_difference = ma - mb;
  double se2 = 0.0;
  if (variant == TTestVariant::kWelch) {
    const double ra = va / na;
    const double rb = vb / nb;
    se2 = ra + rb;
    if (se2 > 0.0) result.dof = se2 * se2 / (ra * ra / (na - 1.0) + rb * rb / (nb - 1.0));
  } else {
    result.dof = na + nb - 2.0;
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / result.dof;
    se2 = pooled * (1.0 / na + 1.0 / nb);
  }

  if (se2 == 0.0) {
    if (ma == mb) {
      result.t = 0.0;
      result.p = 1.0;
    } else {
      result.t = std::copysign(std::numeric_limits<double>::infinity(), result.mean_difference);
      result.p = kPValueFloor;
    }
    return result;
  }
  result.t = result.mean_difference / std::sqrt(se2);
  result.p = std::max(kPValueFloor, std::min(1.0, stats::student_t_two_sided(result.t, result.dof)));
  return result;
}

TTestReport ttest_per_example(const ScoreMatrix& a, const ScoreMatrix& b, TTestVariant variant) {
  require(a.n_examples == b.n_examples, "ttest_per_example: example counts differ");
  require(a.n_runs >= 2 && b.n_runs >= 2, "ttest_per_example: each side needs at least two runs");
  require(a.kind == b.kind, "ttest_per_example: score kinds differ");
  TTestReport report;
  report.kind = a.kind;
  report.model_a = a.model;
  report.model_b = b.model;
  report.t_statistic.resize(a.n_examples);
  report.p_value.resize(a.n_examples);
  report.mean_difference.resize(a.n_examples);
  std::vector<double> xa(a.n_runs), xb(b.n_runs);
  for (std::size_t i = 0; i < a.n_examples; ++i) {
    for (std::size_t r = 0; r < a.n_runs; ++r) xa[r] = a.canonical(i, r);
    for (std::size_t r = 0; r < b.n_runs; ++r) xb[r] = b.canonical(i, r);
    const auto result = two_sample_ttest(xa, xb, variant);
    report.t_statistic[i] = result.t;
    report.p_value[i] = result.p;
    report.mean_difference[i] = result.mean_difference;
  }
  return report;
}

double neglog10(double p) { return -std::log10(std::max(p, kPValueFloor)); }

SensitivityRanking aggregate_significance(std::span<const TTestReport> reports) {
  require(!reports.empty(), "aggregate_significance: no t-test reports");
  const std::size_t n = reports.front().size();
  SensitivityRanking ranking;
  ranking.mean_neglog_p.assign(n, 0.0);
  for (const auto& report : reports) {
    require(report.size() == n, "aggregate_significance: reports disagree on example count");
    for (std::size_t i = 0; i < n; ++i) ranking.mean_neglog_p[i] += neglog10(report.p_value[i]);
  }
  for (double& v : ranking.mean_neglog_p) v /= static_cast<double>(reports.size());
  ranking.order.resize(n);
  std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
  std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](std::size_t x, std::size_t y) {
    return ranking.mean_neglog_p[x] > ranking.mean_neglog_p[y];
  });
  return ranking;
}

double bonferroni_threshold(double alpha, std::size_t n_tests) {
  require(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
  require(n_tests >= 1, "n_tests must be positive");
  return alpha / static_cast<double>(n_tests);
}

std::size_t count_significant(const TTestReport& report, double threshold) {
  return static_cast<std::size_t>(std::count_if(report.p_value.begin(), report.p_value.end(),
                                                [&](double p) { return p < threshold; }));
}

std::vector<SizeRatioRow> size_ratio_significance(std::span<const ModelPairSignificance> pairs) {
  std::vector<SizeRatioRow> rows;
  for (const auto& pair : pairs) {
    const auto ca = pair.model_a.param_count;
    const auto cb = pair.model_b.param_count;
    require(ca > 0 && cb > 0, "size ratio needs non-zero parameter counts (" + pair.model_a.tag() +
                                  " vs " + pair.model_b.tag() + ")");
    rows.push_back({pair.model_a, pair.model_b,
                    static_cast<double>(std::max(ca, cb)) / static_cast<double>(std::min(ca, cb)),
                    pair.mean_neglog_p});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SizeRatioRow& x, const SizeRatioRow& y) {
    return x.size_ratio < y.size_ratio;
  });
  return rows;
}

}  // namespace difflab
