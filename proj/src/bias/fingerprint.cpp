#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "difflab/bias.hpp"
#include "difflab/error.hpp"
#include "difflab/random.hpp"

namespace difflab {
namespace {

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Negative log-likelihood of labels y under logits X beta.
double negative_log_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& beta) {
  const Eigen::VectorXd z = x * beta;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) nll += softplus(z(i)) - y(i) * z(i);
  return nll;
}

}  // namespace

std::vector<std::size_t> select_fingerprint_examples(const SensitivityRanking& ranking,
                                                     std::size_t k, SelectionMode mode,
                                                     std::uint64_t seed) {
  const std::size_t n = ranking.order.size();
  require(k >= 1, "fingerprint needs k >= 1 examples");
  require(k <= n, "k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " examples");
  switch (mode) {
    case SelectionMode::kTop:
      return {ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(k)};
    case SelectionMode::kBottom:
      return {ranking.order.end() - static_cast<std::ptrdiff_t>(k), ranking.order.end()};
    case SelectionMode::kRandom: {
      Rng rng(seed);
      return rng.sample_without_replacement(n, k);
    }
  }
  return {};
}

std::vector<double> fingerprint_features(const ScoreMatrix& matrix, std::size_t run,
                                         std::span<const std::size_t> examples) {
  require(run < matrix.n_runs, "fingerprint run index out of range");
  std::vector<double> features;
  features.reserve(examples.size());
  for (const auto i : examples) {
    require(i < matrix.n_examples, "fingerprint example id out of range");
    features.push_back(matrix.canonical(i, run));
  }
  return features;
}

double FingerprintModel::decision(std::span<const double> features) const {
  require(features.size() == weights.size(), "fingerprint feature count mismatch");
  double z = intercept;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    z += weights[j] * (features[j] - feature_mean[j]) / feature_scale[j];
  }
  return z;
}

FingerprintModel fit_fingerprint(std::span<const std::size_t> examples, const ScoreMatrix& a,
                                 std::span<const std::size_t> a_runs, const ScoreMatrix& b,
                                 std::span<const std::size_t> b_runs,
                                 const FingerprintOptions& options) {
  require(!examples.empty(), "fingerprint needs k >= 1 examples");
  require(!a_runs.empty() && !b_runs.empty(),
          "fingerprint training labels are single-class (one side has no runs)");
  require(a_runs.size() >= 2 && b_runs.size() >= 2, "fingerprint needs at least two runs per class");
  require(a.kind == b.kind, "fingerprint sides use different score kinds");
  require(a.n_examples == b.n_examples, "fingerprint sides disagree on example count");

  const std::size_t k = examples.size();
  const auto rows = static_cast<Eigen::Index>(a_runs.size() + b_runs.size());
  const auto cols = static_cast<Eigen::Index>(k + 1);

  FingerprintModel model;
  model.examples.assign(examples.begin(), examples.end());
  model.kind = a.kind;
  model.model_a = a.model;
  model.model_b = b.model;
  for (const auto r : a_runs) model.train_seeds_a.push_back(a.run_seeds.at(r));
  for (const auto r : b_runs) model.train_seeds_b.push_back(b.run_seeds.at(r));

  std::vector<std::vector<double>> raw;
  Eigen::VectorXd y(rows);
  for (const auto r : a_runs) raw.push_back(fingerprint_features(a, r, examples));
  for (const auto r : b_runs) raw.push_back(fingerprint_features(b, r, examples));
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = i < static_cast<Eigen::Index>(a_runs.size()) ? 0.0 : 1.0;

  model.feature_mean.assign(k, 0.0);
  model.feature_scale.assign(k, 1.0);
  if (options.standardize) {
    for (std::size_t j = 0; j < k; ++j) {
      double mean = 0.0;
      for (const auto& row : raw) mean += row[j];
      mean /= static_cast<double>(raw.size());
      double ss = 0.0;
      for (const auto& row : raw) ss += (row[j] - mean) * (row[j] - mean);
      const double sd = std::sqrt(ss / static_cast<double>(raw.size()));
      model.feature_mean[j] = mean;
      model.feature_scale[j] = sd > 0.0 ? sd : 1.0;
    }
  }

  // Column 0 is the intercept.
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    x(i, 0) = 1.0;
    for (std::size_t j = 0; j < k; ++j) {
      x(i, static_cast<Eigen::Index>(j + 1)) =
          (raw[static_cast<std::size_t>(i)][j] - model.feature_mean[j]) / model.feature_scale[j];
    }
  }

  // Newton-Raphson with step halving; the pseudo-inverse solve tolerates the
  // rank-deficient Hessians of constant or collinear features.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(cols);
  double nll = negative_log_likelihood(x, y, beta);
  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd z = x * beta;
    Eigen::VectorXd p(rows), w(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      p(i) = sigmoid(z(i));
      w(i) = p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd gradient = x.transpose() * (y - p);
    if (gradient.norm() <= options.gradient_tolerance) break;
    const Eigen::MatrixXd hessian = x.transpose() * w.asDiagonal() * x;
    Eigen::VectorXd step = hessian.completeOrthogonalDecomposition().solve(gradient);
    if (!step.allFinite() || step.norm() == 0.0) step = gradient;
    double scale = 1.0;
    bool improved = false;
    while (scale > 1e-12) {
      const Eigen::VectorXd candidate = beta + scale * step;
      const double candidate_nll = negative_log_likelihood(x, y, candidate);
      if (std::isfinite(candidate_nll) && candidate_nll <= nll) {
        beta = candidate;
        improved = candidate_nll < nll;
        nll = candidate_nll;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
  }
  model.iterations = iter;
  model.intercept = beta(0);
  model.weights.assign(beta.data() + 1, beta.data() + beta.size());

  std::size_t correct = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const bool predicted_b = model.decision(raw[i]) > 0.0;
    correct += predicted_b == (y(static_cast<Eigen::Index>(i)) == 1.0) ? 1 : 0;
  }
  model.train_accuracy = static_cast<double>(correct) / static_cast<double>(raw.size());
  return model;
}

double evaluate_fingerprint(const FingerprintModel& model, const ScoreMatrix& a,
                            std::span<const std::size_t> a_runs, const ScoreMatrix& b,
                            std::span<const std::size_t> b_runs) {
  require(!a_runs.empty() || !b_runs.empty(), "fingerprint evaluation needs held-out runs");
  require(a.kind == model.kind && b.kind == model.kind, "fingerprint evaluated on another score kind");
  auto check_overlap = [](const ScoreMatrix& m, std::span<const std::size_t> runs,
                          const std::vector<std::int64_t>& train, const char* side) {
    for (const auto r : runs) {
      const auto seed = m.run_seeds.at(r);
      require(std::find(train.begin(), train.end(), seed) == train.end(),
              std::string("evaluation run seed ") + std::to_string(seed) + " on side " + side +
                  " overlaps the training runs");
    }
  };
  check_overlap(a, a_runs, model.train_seeds_a, "a");
  check_overlap(b, b_runs, model.train_seeds_b, "b");

  std::size_t correct = 0;
  for (const auto r : a_runs) correct += model.decision(fingerprint_features(a, r, model.examples)) <= 0.0 ? 1 : 0;
  for (const auto r : b_runs) correct += model.decision(fingerprint_features(b, r, model.examples)) > 0.0 ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(a_runs.size() + b_runs.size());
}

}  // namespace difflab
