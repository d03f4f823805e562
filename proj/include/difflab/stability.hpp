#pragma once

// How per-run noise propagates into rankings and percentile splits of
// run-averaged scores.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "difflab/core.hpp"

namespace difflab {

struct BandBin {
  double position = 0.0;  // mean sorted position of the bin's examples
  double lower = 0.0;
  double upper = 0.0;
  double mean = 0.0;
};

/// Examples sorted by mean canonical score, cut into consecutive bins; per bin
/// the pooled per-run values are summarized by quantiles at (1 -/+ ci) / 2.
struct BandSummary {
  std::size_t bin_size = 0;
  double ci_level = 0.0;
  std::vector<BandBin> bins;
};

BandSummary confidence_bands(const ScoreMatrix& matrix, std::size_t bin_size, double ci_level);

/// Two disjoint run subsets of equal size.
using RunSplit = std::pair<std::vector<std::size_t>, std::vector<std::size_t>>;

/// n_trials draws of two disjoint k-run subsets; trial t uses its own stream
/// derived from (seed, t).
std::vector<RunSplit> draw_disjoint_subsets(std::size_t n_runs, std::size_t k,
                                            std::size_t n_trials, std::uint64_t seed);

using VectorPair = std::pair<std::vector<double>, std::vector<double>>;

struct RankChange {
  double median = 0.0;
  double p95 = 0.0;
};

/// |rank difference| pooled over examples and pairs.
RankChange rank_change(std::span<const VectorPair> pairs);
RankChange rank_change(const ScoreMatrix& matrix, std::span<const RunSplit> splits);
RankChange rank_change(const ScoreMatrix& matrix, std::size_t k, std::size_t n_trials,
                       std::uint64_t seed);

/// true for examples on the harder side of the split at `percentile`.
/// The threshold is the sorted value at floor(percentile * N); ties with it
/// go to the harder side.
std::vector<bool> percentile_split(std::span<const double> values, double percentile);

/// Mean fraction of examples whose side differs between the two vectors.
double split_disagreement(std::span<const VectorPair> pairs, double percentile);
double threshold_split_disagreement(const ScoreMatrix& matrix, std::span<const RunSplit> splits,
                                    double percentile);
double threshold_split_disagreement(const ScoreMatrix& matrix, std::size_t k, double percentile,
                                    std::size_t n_trials, std::uint64_t seed);

struct StabilityPoint {
  std::size_t k = 0;
  double median_rank_change = 0.0;
  double p95_rank_change = 0.0;
  double disagreement = 0.0;
};

struct StabilityCurve {
  std::size_t n_trials = 0;
  std::vector<StabilityPoint> points;
};

inline constexpr std::size_t kDefaultTrials = 50;

/// Rank change and split disagreement for each k; each k draws its subsets
/// from the same seed.
StabilityCurve stability_curve(const ScoreMatrix& matrix, std::span<const std::size_t> ks,
                               std::size_t n_trials = kDefaultTrials, double percentile = 0.5,
                               std::uint64_t seed = 0);

}  // namespace difflab
