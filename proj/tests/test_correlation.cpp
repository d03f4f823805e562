#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "difflab/correlation.hpp"
#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "difflab/stats.hpp"
#include "test_util.hpp"

using namespace difflab;
using testutil::make_matrix;

namespace {

std::vector<double> slow_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) less += 1;
      if (j != i && v[j] == v[i]) equal += 1;
    }
    r[i] = less + equal / 2;
  }
  return r;
}

// Sort-based average ranks for large inputs.
std::vector<double> slow_ranks_fast(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double slow_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double slow_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return slow_pearson(slow_ranks(x), slow_ranks(y));
}

ScoreKind kind(ScoreId id) { return ScoreKind::builtin(id); }

// Empirical-CDF sup distance between two samples.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / static_cast<double>(a.size()) -
                              static_cast<double>(j) / static_cast<double>(b.size())));
  }
  return d;
}

}  // namespace

TEST_CASE("spearman fixed cases") {
  const std::vector<double> x{1, 2, 3, 4, 5}, y{5, 6, 7, 8, 7};
  CHECK(std::fabs(spearman(x, y) - slow_spearman(x, y)) <= 1e-12);
  CHECK(std::fabs(spearman(x, y) - 0.8207826816681233) <= 1e-12);

  std::vector<double> e, neg;
  for (const double v : x) {
    e.push_back(std::exp(v));
    neg.push_back(-v);
  }
  CHECK(spearman(x, e) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(spearman(x, neg) == doctest::Approx(-1.0).epsilon(1e-15));

  const std::vector<double> flat{2, 2, 2, 2, 2};
  CHECK_THROWS_AS(spearman(x, flat), Error);
  CHECK_THROWS_AS(spearman(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("spearman matches brute force on random tied and untied data") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3 + rng.below(40);
    std::vector<double> x(n), y(n);
    const bool ties = trial % 2 == 1;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = ties ? static_cast<double>(rng.below(5)) : rng.normal();
      y[i] = ties ? static_cast<double>(rng.below(5)) : x[i] + rng.normal();
    }
    if (*std::min_element(x.begin(), x.end()) == *std::max_element(x.begin(), x.end())) continue;
    if (*std::min_element(y.begin(), y.end()) == *std::max_element(y.begin(), y.end())) continue;
    const double rho = spearman(x, y);
    CHECK(std::fabs(rho - slow_spearman(x, y)) <= 1e-12);
    CHECK(rho == spearman(y, x));
    CHECK((rho >= -1.0 && rho <= 1.0));
    std::vector<double> tx(n);
    for (std::size_t i = 0; i < n; ++i) tx[i] = std::atan(x[i]) * 7 + 2;
    CHECK(std::fabs(spearman(tx, y) - rho) <= 1e-12);
  }
}

TEST_CASE("zero run variance gives zero deltas") {
  const auto a = make_matrix({{1, 1, 1}, {3, 3, 3}, {2, 2, 2}, {5, 5, 5}});
  const auto b = make_matrix({{2, 2, 2}, {1, 1, 1}, {4, 4, 4}, {3, 3, 3}}, kind(ScoreId::kVoG));
  const ScoreMatrix ms[] = {a, b};
  const auto report = correlation_report(ms);
  CHECK(report.mean_to_run_delta.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(report.run_to_run_delta.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shared signal plus noise: deltas against a direct estimate") {
  const std::size_t n = 10000, runs = 6;
  Rng rng(77);
  std::vector<std::vector<double>> ra(n, std::vector<double>(runs)), rb = ra;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = rng.normal();
    for (std::size_t r = 0; r < runs; ++r) {
      ra[i][r] = s + rng.normal();
      rb[i][r] = s + 1.5 * rng.normal();
    }
  }
  const auto a = make_matrix(ra), b = make_matrix(rb, kind(ScoreId::kEL2N));
  const ScoreMatrix ms[] = {a, b};
  const auto report = correlation_report(ms);

  auto col = [&](const std::vector<std::vector<double>>& m, std::size_t r) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = m[i][r];
    return c;
  };
  auto mean = [&](const std::vector<std::vector<double>>& m) {
    std::vector<double> c(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (const double v : m[i]) c[i] += v / static_cast<double>(runs);
    }
    return c;
  };
  const auto ma = mean(ra), mb = mean(rb);
  const double m2m = slow_pearson(slow_ranks_fast(ma), slow_ranks_fast(mb));
  double m2r = 0, r2r = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    m2r += slow_pearson(slow_ranks_fast(ma), slow_ranks_fast(col(rb, r))) / runs;
    r2r += slow_pearson(slow_ranks_fast(col(ra, r)), slow_ranks_fast(col(rb, r))) / runs;
  }
  CHECK(std::fabs(report.mean_to_mean(0, 1) - m2m) <= 0.02);
  CHECK(std::fabs(report.mean_to_run_delta(0, 1) - (m2r - m2m)) <= 0.02);
  CHECK(std::fabs(report.run_to_run_delta(0, 1) - (r2r - m2r)) <= 0.02);
  CHECK(report.mean_to_run_delta(0, 1) < 0);
  CHECK(report.run_to_run_delta(0, 1) < 0);
  CHECK(report.mean_to_run_delta(0, 0) <= 0);
  CHECK(report.mean_to_run_delta(1, 1) <= 0);
}

TEST_CASE("report layout, symmetry and permutation") {
  Rng rng(3);
  std::vector<ScoreMatrix> ms;
  for (const auto id : {ScoreId::kMeanLoss, ScoreId::kMeanAccuracy, ScoreId::kForgetting}) {
    ms.push_back(testutil::noisy_matrix(50, 4, 1.0, rng.next_u64(), kind(id)));
  }
  const auto report = correlation_report(ms);
  CHECK(report.kinds.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(report.mean_to_mean(i, i) == 1.0);
    for (int j = 0; j < 3; ++j) CHECK(report.mean_to_mean(i, j) == report.mean_to_mean(j, i));
    // Diagonal of run-to-run is 1 minus the mean-to-run correlation.
    const double m2r = report.mean_to_run_delta(i, i) + 1.0;
    CHECK(std::fabs(report.run_to_run_delta(i, i) - (1.0 - m2r)) <= 1e-12);
  }
  const std::vector<ScoreMatrix> permuted{ms[2], ms[0], ms[1]};
  const int map[] = {2, 0, 1};  // permuted index -> original index
  const auto other = correlation_report(permuted);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(other.mean_to_mean(i, j) == doctest::Approx(report.mean_to_mean(map[i], map[j])).epsilon(1e-14));
      CHECK(other.mean_to_run_delta(i, j) ==
            doctest::Approx(report.mean_to_run_delta(map[i], map[j])).epsilon(1e-14));
    }
  }
}

TEST_CASE("single-run externals get NaN delta cells") {
  const auto a = testutil::noisy_matrix(30, 3, 1.0, 1);
  auto ext = testutil::noisy_matrix(30, 1, 1.0, 2, ScoreKind::external("agreement", -1));
  const ScoreMatrix ms[] = {a, ext};
  const auto report = correlation_report(ms);
  CHECK(std::isfinite(report.mean_to_mean(0, 1)));
  CHECK(std::isfinite(report.mean_to_run_delta(0, 0)));
  CHECK(std::isnan(report.mean_to_run_delta(0, 1)));
  CHECK(std::isnan(report.mean_to_run_delta(1, 1)));
  CHECK(std::isnan(report.run_to_run_delta(1, 0)));

  const auto short_one = testutil::noisy_matrix(29, 3, 1.0, 3);
  const ScoreMatrix bad[] = {a, short_one};
  CHECK_THROWS_AS(correlation_report(bad), Error);
}

TEST_CASE("quantile transform closed forms") {
  const ScoreVector two{kind(ScoreId::kMeanLoss), {3.0, 1.0}};
  const auto q = quantile_transform(two);
  CHECK(std::fabs(q.values[0] - 0.6744897501960817) <= 1e-9);
  CHECK(std::fabs(q.values[1] + 0.6744897501960817) <= 1e-9);

  const ScoreVector ties{kind(ScoreId::kMeanLoss), std::vector<double>(7, 4.0)};
  for (const double v : quantile_transform(ties).values) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("quantile transform moments and shape at N = 10000") {
  Rng rng(9);
  ScoreVector v{kind(ScoreId::kMeanLoss), std::vector<double>(10000)};
  for (auto& x : v.values) x = std::exp(rng.normal()) + rng.uniform();
  const auto q = quantile_transform(v);
  CHECK(std::fabs(stats::mean(q.values)) < 0.01);
  CHECK(std::fabs(stats::variance(q.values, 0) - 1.0) < 0.05);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    if (v.values[i] < v.values[i + 1]) CHECK(q.values[i] < q.values[i + 1]);
  }

  ScoreVector normal{kind(ScoreId::kMeanLoss), std::vector<double>(10000)};
  for (auto& x : normal.values) x = 3.0 + 2.0 * rng.normal();
  const double m = stats::mean(normal.values), sd = std::sqrt(stats::variance(normal.values));
  std::vector<double> standardized;
  for (const double x : normal.values) standardized.push_back((x - m) / sd);
  CHECK(ks_two_sample(quantile_transform(normal).values, standardized) < 0.05);
}

TEST_CASE("PCA degenerate and independent cases") {
  Rng rng(5);
  ScoreVector a{kind(ScoreId::kMeanLoss), std::vector<double>(500)};
  for (auto& x : a.values) x = rng.normal();
  ScoreVector b{kind(ScoreId::kVoG), a.values};
  const ScoreVector same[] = {a, b};
  const auto p = pca_scores(same);
  CHECK(std::fabs(p.explained_variance_ratio(0) - 1.0) <= 1e-9);
  CHECK(std::fabs(p.explained_variance_ratio(1)) <= 1e-9);
  CHECK(std::fabs(p.loadings(0, 0) - std::sqrt(0.5)) <= 1e-9);
  CHECK(std::fabs(p.loadings(0, 1) - std::sqrt(0.5)) <= 1e-9);

  ScoreVector x{kind(ScoreId::kMeanLoss), std::vector<double>(10000)};
  ScoreVector y{kind(ScoreId::kVoG), std::vector<double>(10000)};
  for (auto& v : x.values) v = rng.normal();
  for (auto& v : y.values) v = rng.normal();
  const ScoreVector indep[] = {x, y};
  const auto q = pca_of_transformed(indep);
  CHECK(std::fabs(q.explained_variance_ratio(0) - 0.5) < 0.05);
  CHECK(std::fabs(q.explained_variance_ratio(1) - 0.5) < 0.05);
}

TEST_CASE("PCA orthonormality, reconstruction and sign convention") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t s = 2 + rng.below(7), n = 200;
    std::vector<ScoreVector> vs;
    std::vector<double> shared(n);
    for (auto& v : shared) v = rng.normal();
    for (std::size_t j = 0; j < s; ++j) {
      ScoreVector v{ScoreKind::external("k" + std::to_string(j), 1), std::vector<double>(n)};
      const double w = rng.uniform();
      for (std::size_t i = 0; i < n; ++i) v.values[i] = w * shared[i] + rng.normal();
      vs.push_back(v);
    }
    const auto p = pca_of_transformed(vs);
    const auto& l = p.loadings;
    const Eigen::MatrixXd gram = l * l.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(s, s)).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::fabs(p.explained_variance_ratio.sum() - 1.0) <= 1e-9);
    for (Eigen::Index c = 0; c + 1 < p.eigenvalues.size(); ++c) {
      CHECK(p.eigenvalues(c) >= p.eigenvalues(c + 1));
    }
    for (Eigen::Index c = 0; c < l.rows(); ++c) {
      Eigen::Index arg = 0;
      l.row(c).cwiseAbs().maxCoeff(&arg);
      CHECK(l(c, arg) > 0);
    }

    // Covariance of the transformed vectors from loadings and eigenvalues.
    Eigen::MatrixXd data(n, s);
    for (std::size_t j = 0; j < s; ++j) {
      const auto t = quantile_transform(vs[j]);
      for (std::size_t i = 0; i < n; ++i) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.values[i];
    }
    data.rowwise() -= data.colwise().mean();
    const Eigen::MatrixXd cov = data.transpose() * data / static_cast<double>(n - 1);
    const Eigen::MatrixXd rebuilt = l.transpose() * p.eigenvalues.asDiagonal() * l;
    CHECK((cov - rebuilt).cwiseAbs().maxCoeff() <= 1e-9);

    std::vector<ScoreVector> transformed;
    for (const auto& v : vs) transformed.push_back(quantile_transform(v));
    const auto pc1 = project(p, transformed, 0);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(pc1[i] - p.pc1_scores.values[i]) <= 1e-9);
  }
}

TEST_CASE("PC1 stability") {
  const std::size_t ks[] = {1, 2, 4};
  SUBCASE("one kind equals plain stability") {
    const auto m = testutil::noisy_matrix(80, 8, 1.0, 4);
    const ScoreMatrix one[] = {m};
    const auto pc = pc1_stability(one, ks, 12, 0.5, 3);
    const auto plain = stability_curve(m, ks, 12, 0.5, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(pc.points[i].median_rank_change == plain.points[i].median_rank_change);
      CHECK(pc.points[i].p95_rank_change == plain.points[i].p95_rank_change);
      CHECK(pc.points[i].disagreement == plain.points[i].disagreement);
    }
  }
  SUBCASE("zero noise gives a zero curve") {
    auto a = testutil::noisy_matrix(40, 8, 0.0, 1);
    auto b = testutil::noisy_matrix(40, 8, 0.0, 2, kind(ScoreId::kEL2N));
    const ScoreMatrix ms[] = {a, b};
    for (const auto fit : {Pc1Fit::kPerSubset, Pc1Fit::kFullData}) {
      for (const auto& p : pc1_stability(ms, ks, 5, 0.5, 1, fit).points) {
        CHECK(p.median_rank_change == 0.0);
        CHECK(p.p95_rank_change == 0.0);
        CHECK(p.disagreement == 0.0);
      }
    }
  }
  SUBCASE("shared signal: composite within the per-score envelope") {
    Rng rng(10);
    const std::size_t n = 400, runs = 8;
    std::vector<double> signal(n);
    for (auto& v : signal) v = rng.normal();
    std::vector<ScoreMatrix> ms;
    for (const auto id : {ScoreId::kMeanLoss, ScoreId::kEL2N, ScoreId::kVoG}) {
      std::vector<std::vector<double>> rows(n, std::vector<double>(runs));
      for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : rows[i]) v = signal[i] + rng.normal();
      }
      ms.push_back(make_matrix(rows, kind(id)));
    }
    const auto pc = pc1_stability(ms, ks, 20, 0.5, 6);
    for (std::size_t i = 0; i < 3; ++i) {
      double hi = 0;
      for (const auto& m : ms) {
        hi = std::max(hi, stability_curve(m, ks, 20, 0.5, 6).points[i].median_rank_change);
      }
      // Averaging three independent noisy views can only help.
      CHECK(pc.points[i].median_rank_change <= hi);
    }
  }
}
