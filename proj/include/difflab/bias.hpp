#pragma once

// Per-example significance of score shifts between two models, aggregation
// into a sensitivity ranking, and architecture fingerprinting from the most
// sensitive examples.

#include <cstdint>
#include <span>
#include <vector>

#include "difflab/core.hpp"

namespace difflab {

/// Lower bound on reported p-values so -log p stays finite.
inline constexpr double kPValueFloor = 1e-300;

enum class TTestVariant { kWelch, kPooled };

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
  double mean_difference = 0.0;  // mean(a) - mean(b)
};

/// Two-sided unpaired t-test. When both groups have zero variance the result
/// is p = 1 for equal means and p = kPValueFloor (t = +/-inf) otherwise.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b,
                             TTestVariant variant = TTestVariant::kWelch);

struct TTestReport {
  ScoreKind kind;
  ModelConfig model_a;
  ModelConfig model_b;
  std::vector<double> t_statistic;
  std::vector<double> p_value;
  std::vector<double> mean_difference;

  std::size_t size() const noexcept { return p_value.size(); }
};

/// One test per example on the canonical per-run populations.
TTestReport ttest_per_example(const ScoreMatrix& a, const ScoreMatrix& b,
                              TTestVariant variant = TTestVariant::kWelch);

double neglog10(double p);

struct SensitivityRanking {
  std::vector<double> mean_neglog_p;  // indexed by example id
  std::vector<std::size_t> order;     // most significant first, ties by id
};

SensitivityRanking aggregate_significance(std::span<const TTestReport> reports);

double bonferroni_threshold(double alpha, std::size_t n_tests);

/// Count of examples whose p-value falls below `threshold`.
std::size_t count_significant(const TTestReport& report, double threshold);

struct ModelPairSignificance {
  ModelConfig model_a;
  ModelConfig model_b;
  double mean_neglog_p = 0.0;
};

struct SizeRatioRow {
  ModelConfig model_a;
  ModelConfig model_b;
  double size_ratio = 1.0;  // larger / smaller parameter count
  double mean_neglog_p = 0.0;
};

/// Rows sorted by size ratio (stable).
std::vector<SizeRatioRow> size_ratio_significance(std::span<const ModelPairSignificance> pairs);

enum class SelectionMode { kTop, kBottom, kRandom };

std::vector<std::size_t> select_fingerprint_examples(const SensitivityRanking& ranking,
                                                     std::size_t k, SelectionMode mode,
                                                     std::uint64_t seed = 0);

struct FingerprintOptions {
  bool standardize = false;
  double gradient_tolerance = 1e-8;
  int max_iterations = 10000;
};

/// Unregularized logistic classifier over the scores of k examples.
/// Class 0 is model_a, class 1 is model_b.
struct FingerprintModel {
  std::vector<std::size_t> examples;
  ScoreKind kind;
  ModelConfig model_a;
  ModelConfig model_b;
  std::vector<double> weights;
  double intercept = 0.0;
  std::vector<double> feature_mean;   // applied before the weights
  std::vector<double> feature_scale;
  double train_accuracy = 0.0;
  double holdout_accuracy = -1.0;     // negative until evaluated
  int iterations = 0;
  std::vector<std::int64_t> train_seeds_a;
  std::vector<std::int64_t> train_seeds_b;

  /// Log-odds of model_b.
  double decision(std::span<const double> features) const;
};

/// Canonical scores of `examples` for one run.
std::vector<double> fingerprint_features(const ScoreMatrix& matrix, std::size_t run,
                                         std::span<const std::size_t> examples);

FingerprintModel fit_fingerprint(std::span<const std::size_t> examples, const ScoreMatrix& a,
                                 std::span<const std::size_t> a_runs, const ScoreMatrix& b,
                                 std::span<const std::size_t> b_runs,
                                 const FingerprintOptions& options = {});

/// Fraction of held-out runs classified correctly. Throws when an evaluation
/// run seed was used for training on the same side.
double evaluate_fingerprint(const FingerprintModel& model, const ScoreMatrix& a,
                            std::span<const std::size_t> a_runs, const ScoreMatrix& b,
                            std::span<const std::size_t> b_runs);

}  // namespace difflab
