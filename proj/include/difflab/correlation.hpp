#pragma once

// Cross-score structure: Spearman correlation matrices with mean/run
// decompositions, the normal quantile transform, and PCA of transformed
// mean scores.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "difflab/core.hpp"
#include "difflab/stability.hpp"

namespace difflab {

/// Pearson correlation of average ranks. Throws when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);
inline double spearman(const ScoreVector& x, const ScoreVector& y) {
  return spearman(x.values, y.values);
}

/// S x S matrices indexed [row kind][column kind]. Cells involving a
/// single-run external score are NaN in both delta matrices.
struct CorrelationReport {
  std::vector<ScoreKind> kinds;
  Eigen::MatrixXd mean_to_mean;
  /// mean(row) vs each run of column, averaged over runs, minus mean_to_mean.
  Eigen::MatrixXd mean_to_run_delta;
  /// Same-run correlation of row and column, averaged over runs, minus the
  /// mean-to-run correlation. The diagonal is 1 - rho.
  Eigen::MatrixXd run_to_run_delta;
};

CorrelationReport correlation_report(std::span<const ScoreMatrix> matrices);

/// Rank r (average ranks for ties) maps to the normal quantile of (r + 0.5) / N.
ScoreVector quantile_transform(const ScoreVector& scores);

struct PCAReport {
  std::vector<ScoreKind> kinds;
  /// Row c is component c; each row has its largest-magnitude entry positive.
  Eigen::MatrixXd loadings;
  Eigen::VectorXd eigenvalues;
  Eigen::VectorXd explained_variance_ratio;
  /// Column means subtracted before projecting.
  Eigen::VectorXd centers;
  ScoreVector pc1_scores;
};

/// PCA of the S x S covariance of the given (already transformed) vectors.
PCAReport pca_scores(std::span<const ScoreVector> vectors);
/// Quantile-transforms each vector, then runs pca_scores.
PCAReport pca_of_transformed(std::span<const ScoreVector> mean_vectors);

/// Projects vectors (same kinds, same order) onto component `component`.
std::vector<double> project(const PCAReport& pca, std::span<const ScoreVector> vectors,
                            std::size_t component = 0);

/// Kind tag for the composite PC1 score.
ScoreKind pc1_kind();

enum class Pc1Fit {
  kPerSubset,  // re-fit PCA on each run subset's means
  kFullData,   // fit once on all-run means, project each subset
};

/// Stability of the PC1 composite: each run subset's per-kind means are
/// transformed and projected, then compared as in stability_curve.
StabilityCurve pc1_stability(std::span<const ScoreMatrix> matrices,
                             std::span<const std::size_t> ks,
                             std::size_t n_trials = kDefaultTrials, double percentile = 0.5,
                             std::uint64_t seed = 0, Pc1Fit fit = Pc1Fit::kPerSubset);

}  // namespace difflab
