#include <cmath>
#include <string>

#include "difflab/core.hpp"
#include "difflab/error.hpp"

namespace difflab {

std::vector<double> ScoreMatrix::run_column(std::size_t run) const {
  require(run < n_runs, "run index " + std::to_string(run) + " out of range");
  std::vector<double> column(n_examples);
  for (std::size_t i = 0; i < n_examples; ++i) column[i] = canonical(i, run);
  return column;
}

void validate(const ScoreMatrix& matrix) {
  const std::string label = matrix.kind.name();
  require(matrix.n_examples > 0 && matrix.n_runs > 0, label + ": empty score matrix");
  require(matrix.values.size() == matrix.n_examples * matrix.n_runs,
          label + ": value count does not match shape");
  require(matrix.run_seeds.size() == matrix.n_runs, label + ": one seed per run required");
  for (std::size_t i = 0; i < matrix.n_examples; ++i) {
    for (std::size_t r = 0; r < matrix.n_runs; ++r) {
      if (!std::isfinite(matrix.at(i, r))) {
        fail(label + ": non-finite value at (" + std::to_string(i) + ", " + std::to_string(r) +
             ")");
      }
    }
  }
}

ScoreVector mean_over_runs(const ScoreMatrix& matrix, std::span<const std::size_t> runs) {
  require(!runs.empty(), "mean_over_runs: empty run subset");
  for (const auto r : runs) {
    require(r < matrix.n_runs, "mean_over_runs: run index " + std::to_string(r) +
                                   " out of range for " + std::to_string(matrix.n_runs) + " runs");
  }
  ScoreVector out{matrix.kind, std::vector<double>(matrix.n_examples)};
  const double count = static_cast<double>(runs.size());
  for (std::size_t i = 0; i < matrix.n_examples; ++i) {
    double sum = 0.0;
    for (const auto r : runs) sum += matrix.at(i, r);
    out.values[i] = matrix.kind.canonicalize(sum / count);
  }
  return out;
}

ScoreVector mean_over_runs(const ScoreMatrix& matrix) {
  std::vector<std::size_t> all(matrix.n_runs);
  for (std::size_t r = 0; r < all.size(); ++r) all[r] = r;
  return mean_over_runs(matrix, all);
}

ScoreVector run_vector(const ScoreMatrix& matrix, std::size_t run) {
  return ScoreVector{matrix.kind, matrix.run_column(run)};
}

ScoreMatrix select_runs(const ScoreMatrix& matrix, std::span<const std::size_t> runs) {
  require(!runs.empty(), "select_runs: empty run subset");
  ScoreMatrix out = matrix;
  out.n_runs = runs.size();
  out.values.assign(matrix.n_examples * runs.size(), 0.0);
  out.run_seeds.clear();
  for (const auto r : runs) {
    require(r < matrix.n_runs, "select_runs: run index out of range");
    out.run_seeds.push_back(matrix.run_seeds[r]);
  }
  for (std::size_t i = 0; i < matrix.n_examples; ++i) {
    for (std::size_t j = 0; j < runs.size(); ++j) {
      out.values[i * out.n_runs + j] = matrix.at(i, runs[j]);
    }
  }
  return out;
}

ScoreMatrix concat_runs(std::span<const ScoreMatrix> parts) {
  require(!parts.empty(), "concat_runs: nothing to concatenate");
  ScoreMatrix out = parts.front();
  out.n_runs = 0;
  out.run_seeds.clear();
  for (const auto& part : parts) {
    require(part.kind == out.kind && part.n_examples == out.n_examples &&
                part.model.same_architecture(out.model),
            "concat_runs: matrices disagree on kind, model or example count");
    out.n_runs += part.n_runs;
    out.run_seeds.insert(out.run_seeds.end(), part.run_seeds.begin(), part.run_seeds.end());
  }
  out.values.assign(out.n_examples * out.n_runs, 0.0);
  std::size_t offset = 0;
  for (const auto& part : parts) {
    for (std::size_t i = 0; i < out.n_examples; ++i) {
      for (std::size_t r = 0; r < part.n_runs; ++r) {
        out.values[i * out.n_runs + offset + r] = part.at(i, r);
      }
    }
    offset += part.n_runs;
  }
  return out;
}

}  // namespace difflab
