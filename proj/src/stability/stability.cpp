#include <algorithm>
#include <cmath>
#include <numeric>

#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "difflab/stability.hpp"
#include "difflab/stats.hpp"

namespace difflab {

BandSummary confidence_bands(const ScoreMatrix& matrix, std::size_t bin_size, double ci_level) {
  require(matrix.n_runs >= 2, "confidence bands need at least two runs");
  require(bin_size >= 1 && bin_size <= matrix.n_examples,
          "bin_size " + std::to_string(bin_size) + " exceeds the " +
              std::to_string(matrix.n_examples) + " examples");
  require(ci_level >= 0.0 && ci_level < 1.0, "ci_level must lie in [0, 1)");

  const auto means = mean_over_runs(matrix);
  std::vector<std::size_t> order(matrix.n_examples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return means.values[a] < means.values[b]; });

  BandSummary summary{bin_size, ci_level, {}};
  std::vector<double> pooled;
  for (std::size_t start = 0; start < order.size(); start += bin_size) {
    const std::size_t stop = std::min(order.size(), start + bin_size);
    pooled.clear();
    for (std::size_t p = start; p < stop; ++p) {
      for (std::size_t r = 0; r < matrix.n_runs; ++r) pooled.push_back(matrix.canonical(order[p], r));
    }
    std::sort(pooled.begin(), pooled.end());
    BandBin bin;
    bin.position = 0.5 * static_cast<double>(start + stop - 1);
    bin.lower = stats::quantile_sorted(pooled, 0.5 * (1.0 - ci_level));
    bin.upper = stats::quantile_sorted(pooled, 0.5 * (1.0 + ci_level));
    bin.mean = stats::mean(pooled);
    summary.bins.push_back(bin);
  }
  return summary;
}

std::vector<RunSplit> draw_disjoint_subsets(std::size_t n_runs, std::size_t k,
                                            std::size_t n_trials, std::uint64_t seed) {
  require(k >= 1, "subset size k must be positive");
  require(2 * k <= n_runs, "two disjoint subsets of " + std::to_string(k) + " runs need 2k <= R (R = " +
                               std::to_string(n_runs) + ")");
  require(n_trials >= 1, "n_trials must be positive");
  std::vector<RunSplit> splits;
  splits.reserve(n_trials);
  for (std::size_t t = 0; t < n_trials; ++t) {
    Rng rng(derive_seed(seed, t));
    const auto drawn = rng.sample_without_replacement(n_runs, 2 * k);
    RunSplit split;
    split.first.assign(drawn.begin(), drawn.begin() + static_cast<std::ptrdiff_t>(k));
    split.second.assign(drawn.begin() + static_cast<std::ptrdiff_t>(k), drawn.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

namespace {

std::vector<VectorPair> mean_pairs(const ScoreMatrix& matrix, std::span<const RunSplit> splits) {
  std::vector<VectorPair> pairs;
  pairs.reserve(splits.size());
  for (const auto& [a, b] : splits) {
    pairs.emplace_back(mean_over_runs(matrix, a).values, mean_over_runs(matrix, b).values);
  }
  return pairs;
}

}  // namespace

RankChange rank_change(std::span<const VectorPair> pairs) {
  require(!pairs.empty(), "rank_change: no trials");
  std::vector<double> changes;
  for (const auto& [a, b] : pairs) {
    require(a.size() == b.size() && !a.empty(), "rank_change: vector length mismatch");
    const auto ra = rank_examples(a);
    const auto rb = rank_examples(b);
    for (std::size_t i = 0; i < ra.size(); ++i) changes.push_back(std::fabs(ra[i] - rb[i]));
  }
  std::sort(changes.begin(), changes.end());
  return RankChange{stats::quantile_sorted(changes, 0.5), stats::quantile_sorted(changes, 0.95)};
}

RankChange rank_change(const ScoreMatrix& matrix, std::span<const RunSplit> splits) {
  const auto pairs = mean_pairs(matrix, splits);
  return rank_change(pairs);
}

RankChange rank_change(const ScoreMatrix& matrix, std::size_t k, std::size_t n_trials,
                       std::uint64_t seed) {
  const auto splits = draw_disjoint_subsets(matrix.n_runs, k, n_trials, seed);
  return rank_change(matrix, splits);
}

std::vector<bool> percentile_split(std::span<const double> values, double percentile) {
  require(percentile > 0.0 && percentile < 1.0, "split percentile must lie in (0, 1)");
  require(!values.empty(), "percentile_split: empty vector");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto cut = static_cast<std::size_t>(std::floor(percentile * static_cast<double>(sorted.size())));
  const double threshold = sorted[std::min(cut, sorted.size() - 1)];
  std::vector<bool> hard(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) hard[i] = values[i] >= threshold;
  return hard;
}

double split_disagreement(std::span<const VectorPair> pairs, double percentile) {
  require(!pairs.empty(), "split_disagreement: no trials");
  double total = 0.0;
  for (const auto& [a, b] : pairs) {
    require(a.size() == b.size() && !a.empty(), "split_disagreement: vector length mismatch");
    const auto sa = percentile_split(a, percentile);
    const auto sb = percentile_split(b, percentile);
    std::size_t differ = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) differ += sa[i] != sb[i] ? 1 : 0;
    total += static_cast<double>(differ) / static_cast<double>(sa.size());
  }
  return total / static_cast<double>(pairs.size());
}

double threshold_split_disagreement(const ScoreMatrix& matrix, std::span<const RunSplit> splits,
                                    double percentile) {
  const auto pairs = mean_pairs(matrix, splits);
  return split_disagreement(pairs, percentile);
}

double threshold_split_disagreement(const ScoreMatrix& matrix, std::size_t k, double percentile,
                                    std::size_t n_trials, std::uint64_t seed) {
  const auto splits = draw_disjoint_subsets(matrix.n_runs, k, n_trials, seed);
  return threshold_split_disagreement(matrix, splits, percentile);
}

StabilityCurve stability_curve(const ScoreMatrix& matrix, std::span<const std::size_t> ks,
                               std::size_t n_trials, double percentile, std::uint64_t seed) {
  StabilityCurve curve{n_trials, {}};
  for (const auto k : ks) {
    const auto splits = draw_disjoint_subsets(matrix.n_runs, k, n_trials, seed);
    const auto pairs = mean_pairs(matrix, splits);
    const auto change = rank_change(pairs);
    curve.points.push_back({k, change.median, change.p95, split_disagreement(pairs, percentile)});
  }
  return curve;
}

}  // namespace difflab
