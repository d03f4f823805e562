#pragma once

// The eight trace-derived difficulty scores. Each single-trace function
// returns an N x 1 matrix holding raw (un-canonicalized) values.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "difflab/core.hpp"
#include "difflab/trainer.hpp"

namespace difflab {

/// Which correctness series forgetting-style scores read.
enum class LearnedSeries { kMinibatch, kEpochEval };

struct ScoreOptions {
  LearnedSeries learned_series = LearnedSeries::kMinibatch;
  /// Standardize VoG within each class, as the original method does.
  bool vog_class_normalize = false;
};

struct ScoreRequest {
  ScoreKind kind;
  std::optional<int> checkpoint_epoch;        // GraNd and EL2N only
  std::optional<double> sentinel_never_learned;  // ConsistentlyLearned; default epochs + 1
};

/// One request per computed score kind.
std::vector<ScoreRequest> default_score_requests(int checkpoint_epoch);

// Series-level definitions.
std::size_t count_forgetting(std::span<const std::uint8_t> correct);
/// Start of the final all-correct suffix, or the sentinel when the series
/// ends incorrect.
double learned_index(std::span<const std::uint8_t> correct, double sentinel);
double error_l2_norm(std::span<const double> probs, int label);
/// Mean over input dimensions of the population variance across snapshots.
double mean_gradient_variance(std::span<const std::span<const double>> snapshots);

ScoreMatrix mean_loss(const TraceStore& trace);
ScoreMatrix mean_accuracy(const TraceStore& trace);
ScoreMatrix area_under_margin(const TraceStore& trace);
ScoreMatrix forgetting_count(const TraceStore& trace,
                             LearnedSeries series = LearnedSeries::kMinibatch);
ScoreMatrix consistently_learned(const TraceStore& trace, std::optional<double> sentinel = {},
                                 LearnedSeries series = LearnedSeries::kMinibatch);
ScoreMatrix el2n(const TraceStore& trace, const LabelSet& labels, int checkpoint_epoch);
ScoreMatrix grand(const TraceStore& trace, int checkpoint_epoch);
ScoreMatrix vog(const TraceStore& trace, const LabelSet* labels = nullptr,
                const ScoreOptions& options = {});

/// Evaluates one request on one trace.
ScoreMatrix compute_score(const TraceStore& trace, const LabelSet& labels,
                          const ScoreRequest& request, const ScoreOptions& options = {});

/// One N x R matrix per request, runs in trace order.
std::vector<ScoreMatrix> compute_all(std::span<const TraceStore> traces, const LabelSet& labels,
                                     std::span<const ScoreRequest> requests,
                                     const ScoreOptions& options = {});

}  // namespace difflab
