#pragma once

// Config-driven orchestration of the train -> score -> analysis pipeline,
// the run manifest that makes stages idempotent, and SVG figure rendering.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "difflab/bias.hpp"
#include "difflab/core.hpp"
#include "difflab/correlation.hpp"
#include "difflab/error.hpp"
#include "difflab/scores.hpp"
#include "difflab/trainer.hpp"

namespace difflab::cli {

enum class DatasetSource { kSynthetic, kImageBinary };

struct DatasetConfig {
  DatasetSource source = DatasetSource::kSynthetic;
  std::string name = "synthetic";
  SyntheticSpec synthetic;
  std::vector<std::filesystem::path> files;  // image-binary batches
  std::size_t limit = 5000;
  std::size_t n_classes = 10;
};

struct ModelEntry {
  ModelConfig model;
  double learning_rate = 0.1;
  std::int64_t base_seed = 0;
};

struct PipelineConfig {
  std::string experiment_id;
  DatasetConfig dataset;
  std::vector<ModelEntry> models;

  std::size_t n_runs = 20;
  int epochs = 20;
  std::size_t batch_size = 8;
  int checkpoint_epoch = 3;
  int vog_interval = 1;
  VogTarget vog_target = VogTarget::kLoss;

  std::vector<ScoreKind> score_kinds;
  ScoreOptions score_options;
  std::optional<double> sentinel_never_learned;

  std::vector<std::size_t> stability_ks{1, 2, 5, 10};
  std::size_t trials = kDefaultTrials;
  double percentile = 0.5;
  std::size_t bin_size = 500;
  double ci_level = 0.9;
  std::uint64_t analysis_seed = 0;
  Pc1Fit pc1_fit = Pc1Fit::kPerSubset;

  TTestVariant ttest_variant = TTestVariant::kWelch;
  double alpha = 0.01;

  std::string fingerprint_model_a;
  std::string fingerprint_model_b;
  std::size_t fingerprint_train_runs = 10;
  std::size_t fingerprint_k = 8;
  std::vector<std::size_t> fingerprint_ks{1, 2, 4, 8, 16};
  std::size_t fingerprint_random_draws = 10;
  FingerprintOptions fingerprint_options;

  /// Normalized JSON of every setting; the config hash is taken over it.
  std::string canonical;

  const ModelEntry& model_by_tag(const std::string& tag) const;
};

/// Parses and validates a config document. `origin` names the source in
/// diagnostics; syntax errors report line and column.
PipelineConfig parse_config(std::string_view text, const std::string& origin = "config");
PipelineConfig load_config(const std::filesystem::path& path);

Dataset build_dataset(const DatasetConfig& config);
ExperimentConfig experiment_for(const PipelineConfig& config, const ModelEntry& entry,
                                std::size_t n_examples, std::int64_t seed_offset = 0);

/// 16 hex digits of FNV-1a over the canonical config and the seed offset.
std::string config_digest(const PipelineConfig& config, std::int64_t seed_offset);

struct StageRecord {
  std::string config_hash;
  std::vector<std::string> artifacts;  // relative to the experiment root
};

struct RunManifest {
  std::string experiment_id;
  std::string config_hash;
  std::map<std::string, StageRecord> stages;

  /// Stage finished under `hash` and every artifact it listed still exists.
  bool complete(const std::string& stage, const std::string& hash,
                const std::filesystem::path& root) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& root);
RunManifest load_manifest(const std::filesystem::path& root);
void save_manifest(const RunManifest& manifest, const std::filesystem::path& root);

struct Context {
  PipelineConfig config;
  std::filesystem::path root;  // <out>/<experiment_id>
  std::size_t workers = 1;
  std::int64_t seed_offset = 0;
  bool force = false;
  std::ostream* log = nullptr;
};

/// Output root: the flag when given, else $DIFFLAB_OUT, else ./difflab-out.
std::filesystem::path resolve_output_root(const std::optional<std::filesystem::path>& flag);

// Each stage returns false when it was already up to date.
bool cmd_train(const Context& ctx);
bool cmd_score(const Context& ctx);
bool cmd_stability(const Context& ctx);
bool cmd_corr(const Context& ctx);
bool cmd_pca(const Context& ctx);
bool cmd_bias(const Context& ctx);
bool cmd_fingerprint(const Context& ctx);
/// Adds an external single-run score for one configured model; invalidates
/// the correlation stage so the next `corr` picks it up.
void cmd_import_scores(const Context& ctx, const std::filesystem::path& file,
                       const std::string& name, int polarity, const std::string& model_tag);

enum class FigureKind { kHeatmap, kStability, kPca, kNegLogP, kSizeRatio, kFingerprint, kBands };

FigureKind parse_figure_kind(std::string_view name);
std::string figure_kind_name(FigureKind kind);

/// Renders a tabular artifact as SVG. Throws when the artifact's header does
/// not match the figure kind.
void render_figure(const std::filesystem::path& artifact, FigureKind kind,
                   const std::filesystem::path& output);

/// 0 success, 1 validation, 2 missing upstream artifact, 3 runtime failure.
int exit_code(ErrorKind kind);

}  // namespace difflab::cli
