#pragma once

// Domain types shared by every analysis: score kinds and their polarity,
// model identity, the per-example x per-run score matrix, persistence, and
// the run-averaging / ranking primitives.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace difflab {

enum class ScoreId {
  kMeanLoss,
  kMeanAccuracy,
  kAreaUnderMargin,
  kForgetting,
  kConsistentlyLearned,
  kGraNd,
  kEL2N,
  kVoG,
  kExternal,
};

/// A score together with the sign that maps raw values onto the
/// higher-is-harder orientation.
class ScoreKind {
 public:
  ScoreKind() = default;

  /// Built-in kind with its fixed polarity.
  static ScoreKind builtin(ScoreId id);
  /// Imported kind; the caller declares the polarity (+1 or -1).
  static ScoreKind external(std::string name, int polarity);
  /// Parses a built-in name such as "EL2N" or "MeanLoss".
  static ScoreKind parse(std::string_view name);

  ScoreId id() const noexcept { return id_; }
  int polarity() const noexcept { return polarity_; }
  bool is_external() const noexcept { return id_ == ScoreId::kExternal; }
  std::string name() const;

  double canonicalize(double raw) const noexcept { return polarity_ * raw; }

  friend bool operator==(const ScoreKind&, const ScoreKind&) = default;

 private:
  ScoreId id_ = ScoreId::kMeanLoss;
  int polarity_ = 1;
  std::string external_name_;
};

/// The eight scores computed from training traces, in reporting order.
const std::vector<ScoreKind>& computed_score_kinds();

enum class ModelFamily { kMlp, kCnn };

std::string family_name(ModelFamily family);
ModelFamily parse_family(std::string_view name);

/// Identifies an inductive bias: architecture family plus width and depth.
struct ModelConfig {
  ModelFamily family = ModelFamily::kMlp;
  double width_multiplier = 1.0;
  int depth = 1;
  std::size_t param_count = 0;  // filled in by build_model

  /// Short filesystem-safe tag, e.g. "mlp-w1-d2".
  std::string tag() const;

  /// Architecture identity; param_count is derived and not compared.
  bool same_architecture(const ModelConfig& other) const noexcept {
    return family == other.family && width_multiplier == other.width_multiplier &&
           depth == other.depth;
  }
};

/// Parses "1", "0.25" or "1/4".
double parse_width_multiplier(std::string_view text);

/// Scores for N examples over R runs, stored example-major. Raw values;
/// polarity is applied by the accessors that say so.
struct ScoreMatrix {
  ScoreKind kind;
  ModelConfig model;
  std::string dataset_name;
  std::size_t n_examples = 0;
  std::size_t n_runs = 0;
  std::vector<double> values;
  std::vector<std::int64_t> run_seeds;
  std::optional<int> checkpoint_epoch;

  double at(std::size_t example, std::size_t run) const { return values[example * n_runs + run]; }
  double canonical(std::size_t example, std::size_t run) const {
    return kind.canonicalize(at(example, run));
  }
  std::vector<double> run_column(std::size_t run) const;  // canonical
};

/// Throws unless shape, seeds and values are consistent and finite, and
/// the dense/single-run policy for the kind holds.
void validate(const ScoreMatrix& matrix);

struct ScoreVector {
  ScoreKind kind;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

// Persistence. The data file is `example_id,run_id,value` in example-major
// order; metadata lives in a JSON sidecar at `<path>.meta.json`.
std::filesystem::path metadata_path(const std::filesystem::path& data_path);
void save_matrix(const ScoreMatrix& matrix, const std::filesystem::path& path);
ScoreMatrix load_matrix(const std::filesystem::path& path);

/// Reads `example_id,value` rows into a single-run External matrix.
ScoreMatrix import_external_scores(const std::filesystem::path& path, const std::string& kind_name,
                                   int polarity);

/// Per-example mean over the selected runs, polarity applied.
ScoreVector mean_over_runs(const ScoreMatrix& matrix, std::span<const std::size_t> runs);
ScoreVector mean_over_runs(const ScoreMatrix& matrix);
/// One run as a canonical vector.
ScoreVector run_vector(const ScoreMatrix& matrix, std::size_t run);

/// Restricts a matrix to the given runs, in the given order.
ScoreMatrix select_runs(const ScoreMatrix& matrix, std::span<const std::size_t> runs);
/// Concatenates run columns of matrices that share kind, model and N.
ScoreMatrix concat_runs(std::span<const ScoreMatrix> parts);

/// 0-based ranks in ascending value order; ties share their average rank.
std::vector<double> rank_examples(std::span<const double> values);
inline std::vector<double> rank_examples(const ScoreVector& scores) {
  return rank_examples(scores.values);
}

}  // namespace difflab
