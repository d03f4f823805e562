#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "difflab/correlation.hpp"
#include "difflab/error.hpp"
#include "difflab/stats.hpp"

namespace difflab {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double rank_pearson(const std::vector<double>& rx, const std::vector<double>& ry) {
  const double r = stats::pearson(rx, ry);
  if (std::isnan(r)) throw Error(ErrorKind::kRuntime, "spearman: undefined correlation for constant input");
  return r;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "spearman: length mismatch");
  require(x.size() >= 2, "spearman: need at least two values");
  return rank_pearson(rank_examples(x), rank_examples(y));
}

CorrelationReport correlation_report(std::span<const ScoreMatrix> matrices) {
  require(!matrices.empty(), "correlation_report: no score matrices");
  const std::size_t n = matrices.front().n_examples;
  std::size_t runs = 0;
  for (const auto& m : matrices) {
    require(m.n_examples == n, "correlation_report: shape mismatch (" + m.kind.name() + " has " +
                                   std::to_string(m.n_examples) + " examples, expected " +
                                   std::to_string(n) + ")");
    if (m.kind.is_external() && m.n_runs == 1) continue;
    if (runs == 0) runs = m.n_runs;
    require(m.n_runs == runs, "correlation_report: shape mismatch (" + m.kind.name() +
                                  " has " + std::to_string(m.n_runs) + " runs, expected " +
                                  std::to_string(runs) + ")");
  }

  const std::size_t s = matrices.size();
  std::vector<std::vector<double>> mean_ranks(s);
  std::vector<std::vector<std::vector<double>>> run_ranks(s);
  std::vector<bool> has_runs(s);
  for (std::size_t i = 0; i < s; ++i) {
    mean_ranks[i] = rank_examples(mean_over_runs(matrices[i]).values);
    has_runs[i] = !(matrices[i].kind.is_external() && matrices[i].n_runs == 1);
    if (has_runs[i]) {
      for (std::size_t r = 0; r < runs; ++r) run_ranks[i].push_back(rank_examples(matrices[i].run_column(r)));
    }
  }

  CorrelationReport report;
  for (const auto& m : matrices) report.kinds.push_back(m.kind);
  report.mean_to_mean = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), kNaN);
  report.mean_to_run_delta = report.mean_to_mean;
  report.run_to_run_delta = report.mean_to_mean;

  for (std::size_t i = 0; i < s; ++i) {
    report.mean_to_mean(i, i) = 1.0;
    for (std::size_t j = i + 1; j < s; ++j) {
      const double rho = rank_pearson(mean_ranks[i], mean_ranks[j]);
      report.mean_to_mean(i, j) = rho;
      report.mean_to_mean(j, i) = rho;
    }
  }
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      if (!has_runs[i] || !has_runs[j]) continue;
      double mean_to_run = 0.0;
      double run_to_run = 0.0;
      for (std::size_t r = 0; r < runs; ++r) {
        mean_to_run += rank_pearson(mean_ranks[i], run_ranks[j][r]);
        run_to_run += i == j ? 1.0 : rank_pearson(run_ranks[i][r], run_ranks[j][r]);
      }
      mean_to_run /= static_cast<double>(runs);
      run_to_run /= static_cast<double>(runs);
      report.mean_to_run_delta(i, j) = mean_to_run - report.mean_to_mean(i, j);
      report.run_to_run_delta(i, j) = run_to_run - mean_to_run;
    }
  }
  return report;
}

ScoreVector quantile_transform(const ScoreVector& scores) {
  require(scores.size() >= 2, "quantile_transform: need at least two values");
  const auto ranks = rank_examples(scores.values);
  const double n = static_cast<double>(scores.size());
  ScoreVector out{scores.kind, std::vector<double>(scores.size())};
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    out.values[i] = stats::normal_quantile((ranks[i] + 0.5) / n);
  }
  return out;
}

ScoreKind pc1_kind() { return ScoreKind::external("PC1", 1); }

PCAReport pca_scores(std::span<const ScoreVector> vectors) {
  require(vectors.size() >= 2, "pca_scores: need at least two score kinds");
  const auto n = static_cast<Eigen::Index>(vectors.front().size());
  const auto s = static_cast<Eigen::Index>(vectors.size());
  require(n >= 2, "pca_scores: need at least two examples");
  Eigen::MatrixXd data(n, s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const auto& v = vectors[static_cast<std::size_t>(j)];
    require(static_cast<Eigen::Index>(v.size()) == n, "pca_scores: vector length mismatch");
    for (Eigen::Index i = 0; i < n; ++i) data(i, j) = v.values[static_cast<std::size_t>(i)];
  }
  PCAReport report;
  for (const auto& v : vectors) report.kinds.push_back(v.kind);
  report.centers = data.colwise().mean().transpose();
  data.rowwise() -= report.centers.transpose();
  const Eigen::MatrixXd cov = (data.transpose() * data) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorKind::kRuntime, "pca_scores: eigendecomposition failed");
  // Eigen sorts ascending; report descending.
  report.loadings.resize(s, s);
  report.eigenvalues.resize(s);
  for (Eigen::Index c = 0; c < s; ++c) {
    const Eigen::Index src = s - 1 - c;
    report.eigenvalues(c) = std::max(0.0, solver.eigenvalues()(src));
    Eigen::VectorXd v = solver.eigenvectors().col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    report.loadings.row(c) = v.transpose();
  }
  const double total = report.eigenvalues.sum();
  require(total > 0.0, "pca_scores: all score vectors are constant");
  report.explained_variance_ratio = report.eigenvalues / total;

  const Eigen::VectorXd pc1 = data * report.loadings.row(0).transpose();
  report.pc1_scores.kind = pc1_kind();
  report.pc1_scores.values.assign(pc1.data(), pc1.data() + pc1.size());
  return report;
}

PCAReport pca_of_transformed(std::span<const ScoreVector> mean_vectors) {
  std::vector<ScoreVector> transformed;
  transformed.reserve(mean_vectors.size());
  for (const auto& v : mean_vectors) transformed.push_back(quantile_transform(v));
  return pca_scores(transformed);
}

std::vector<double> project(const PCAReport& pca, std::span<const ScoreVector> vectors,
                            std::size_t component) {
  const auto s = static_cast<std::size_t>(pca.loadings.cols());
  require(vectors.size() == s, "project: kind count mismatch");
  require(component < s, "project: component out of range");
  const std::size_t n = vectors.front().size();
  std::vector<double> out(n, 0.0);
  for (std::size_t j = 0; j < s; ++j) {
    require(vectors[j].kind == pca.kinds[j], "project: kinds out of order");
    const double w = pca.loadings(static_cast<Eigen::Index>(component), static_cast<Eigen::Index>(j));
    const double c = pca.centers(static_cast<Eigen::Index>(j));
    for (std::size_t i = 0; i < n; ++i) out[i] += w * (vectors[j].values[i] - c);
  }
  return out;
}

StabilityCurve pc1_stability(std::span<const ScoreMatrix> matrices,
                             std::span<const std::size_t> ks, std::size_t n_trials,
                             double percentile, std::uint64_t seed, Pc1Fit fit) {
  require(!matrices.empty(), "pc1_stability: no score matrices");
  const std::size_t runs = matrices.front().n_runs;
  for (const auto& m : matrices) {
    require(m.n_runs == runs && m.n_examples == matrices.front().n_examples,
            "pc1_stability: matrices must share examples and runs");
  }

  auto transformed_means = [&](std::span<const std::size_t> subset) {
    std::vector<ScoreVector> out;
    for (const auto& m : matrices) out.push_back(quantile_transform(mean_over_runs(m, subset)));
    return out;
  };
  std::optional<PCAReport> full;
  if (fit == Pc1Fit::kFullData && matrices.size() >= 2) {
    std::vector<std::size_t> all(runs);
    for (std::size_t r = 0; r < runs; ++r) all[r] = r;
    full = pca_scores(transformed_means(all));
  }
  auto composite = [&](std::span<const std::size_t> subset) {
    const auto vectors = transformed_means(subset);
    // PCA of a single variable is the identity direction.
    if (vectors.size() == 1) return vectors.front().values;
    if (full) return project(*full, vectors, 0);
    return pca_scores(vectors).pc1_scores.values;
  };

  StabilityCurve curve{n_trials, {}};
  for (const auto k : ks) {
    const auto splits = draw_disjoint_subsets(runs, k, n_trials, seed);
    std::vector<VectorPair> pairs;
    for (const auto& [a, b] : splits) pairs.emplace_back(composite(a), composite(b));
    const auto change = rank_change(pairs);
    curve.points.push_back({k, change.median, change.p95, split_disagreement(pairs, percentile)});
  }
  return curve;
}

}  // namespace difflab
