#pragma once

// Desk-scale instrumented training: a small model zoo with hand-written
// forward/backward passes, plain SGD over replicate runs, and the per-example
// traces every difficulty score is computed from.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "difflab/core.hpp"
#include "difflab/random.hpp"

namespace difflab {

struct InputShape {
  std::size_t channels = 1;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const noexcept { return channels * height * width; }
};

/// Class index per example; at least two classes, each present.
struct LabelSet {
  std::size_t n_classes = 0;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

void validate(const LabelSet& labels);

struct Dataset {
  std::string name;
  InputShape shape;
  std::vector<double> features;  // example-major, shape.size() per example
  LabelSet labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t input_dim() const noexcept { return shape.size(); }
  std::span<const double> example(std::size_t i) const {
    return {features.data() + i * input_dim(), input_dim()};
  }
};

/// Class-prototype images with per-example ambiguity, shifts, pixel noise and
/// optionally flipped labels. Fully determined by the seed.
struct SyntheticSpec {
  std::size_t n_examples = 5000;
  std::size_t n_classes = 10;
  std::size_t image_size = 8;
  double noise = 1.5;
  double max_mix = 0.3;      // largest weight given to a distractor class
  double label_noise = 0.0;  // fraction of labels flipped to another class
  std::uint64_t seed = 0;
};

Dataset make_synthetic_dataset(const SyntheticSpec& spec);

/// Reads CIFAR-style binary batches (1 label byte + 3x32x32 bytes per
/// record), keeping the first `limit` records (0 = all). Pixels map to [0, 1].
Dataset load_image_binary(std::span<const std::filesystem::path> files, std::size_t limit,
                          std::size_t n_classes = 10);

/// One differentiable stage of a sequential network. Parameters live in the
/// model's flat vector; a layer only sees its own slice.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::size_t in_size() const = 0;
  virtual std::size_t out_size() const = 0;
  virtual std::size_t param_size() const = 0;
  virtual void init(std::span<double> params, Rng& rng) const = 0;
  virtual void forward(std::span<const double> params, std::span<const double> in,
                       std::span<double> out) const = 0;
  /// Accumulates into grad_params when non-empty; overwrites grad_in when
  /// non-empty.
  virtual void backward(std::span<const double> params, std::span<const double> in,
                        std::span<const double> out, std::span<const double> grad_out,
                        std::span<double> grad_params, std::span<double> grad_in) const = 0;
};

std::shared_ptr<const Layer> make_dense(std::size_t in, std::size_t out);
std::shared_ptr<const Layer> make_relu(std::size_t size);
std::shared_ptr<const Layer> make_conv3x3(InputShape in, std::size_t out_channels);
std::shared_ptr<const Layer> make_avg_pool2(InputShape in);

/// Scratch buffers for one forward/backward pass; one per thread.
struct Workspace {
  std::vector<std::vector<double>> activations;  // [0] is the input
  std::vector<std::vector<double>> gradients;
  std::vector<double> probs;
};

class Model {
 public:
  Model(ModelConfig config, InputShape shape, std::size_t n_classes,
        std::vector<std::shared_ptr<const Layer>> layers);

  const ModelConfig& config() const noexcept { return config_; }
  const InputShape& input_shape() const noexcept { return shape_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> mutable_params() noexcept { return params_; }

  Workspace make_workspace() const;

  /// Runs the network; softmax probabilities end up in ws.probs.
  void forward(std::span<const double> input, Workspace& ws) const;
  /// Back-propagates d(objective)/d(logits) through the last forward pass.
  void backward(Workspace& ws, std::span<const double> grad_logits,
                std::span<double> grad_params, std::span<double> grad_input) const;

  void init_params(std::uint64_t seed);

 private:
  ModelConfig config_;
  InputShape shape_;
  std::size_t n_classes_;
  std::vector<std::shared_ptr<const Layer>> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

/// Hidden width of the MLP family at multiplier 1 and channel count of the
/// CNN family at multiplier 1.
inline constexpr std::size_t kMlpBaseWidth = 32;
inline constexpr std::size_t kCnnBaseChannels = 8;

/// MLP: `depth` ReLU hidden layers of round(32 * width) units.
/// CNN: `depth` (1-4) 3x3 ReLU conv layers of round(8 * width) channels, a 2x2
/// average pool when the spatial size is even, then a dense classifier.
Model build_model(const ModelConfig& config, InputShape shape, std::size_t n_classes,
                  std::uint64_t seed);

/// Cross-entropy loss of the last forward pass plus its gradients.
double loss_gradients(const Model& model, Workspace& ws, std::span<const double> input, int label,
                      std::span<double> grad_params, std::span<double> grad_input);

enum class VogTarget { kLoss, kTrueLogit };

struct ExperimentConfig {
  std::string dataset_name = "synthetic";
  std::size_t n_examples = 0;
  ModelConfig model;
  std::size_t n_runs = 1;
  int epochs = 20;
  std::size_t batch_size = 8;
  double learning_rate = 0.1;
  int checkpoint_epoch = 3;  // ceil(epochs / 8)
  int vog_interval = 1;
  std::int64_t base_seed = 0;
  VogTarget vog_target = VogTarget::kLoss;

  std::int64_t run_seed(std::size_t run) const { return base_seed + static_cast<std::int64_t>(run); }
};

void validate(const ExperimentConfig& exp);

struct EvalPoint {
  double loss = 0.0;
  double true_prob = 0.0;
  double max_other_prob = 0.0;
  bool correct = false;
};

/// Everything recorded during one run.
struct TraceStore {
  std::string dataset_name;
  ModelConfig model;
  std::size_t run_index = 0;
  std::int64_t seed = 0;
  std::size_t n_examples = 0;
  std::size_t n_classes = 0;
  std::size_t input_dim = 0;
  int epochs = 0;

  std::vector<EvalPoint> eval;  // [epoch][example], epochs 1..E at index 0..E-1
  std::vector<std::uint8_t> minibatch_correct;  // [example][use]

  int checkpoint_epoch = 0;
  std::vector<double> checkpoint_probs;  // [example][class]
  std::vector<double> checkpoint_grad_norm;

  std::vector<int> vog_epochs;
  std::vector<double> vog_gradients;  // [snapshot][example][input dim]

  const EvalPoint& eval_at(int epoch_index, std::size_t example) const {
    return eval[static_cast<std::size_t>(epoch_index) * n_examples + example];
  }
  std::span<const std::uint8_t> minibatch_series(std::size_t example) const {
    return {minibatch_correct.data() + example * static_cast<std::size_t>(epochs),
            static_cast<std::size_t>(epochs)};
  }
  std::span<const double> checkpoint_prob_vector(std::size_t example) const {
    return {checkpoint_probs.data() + example * n_classes, n_classes};
  }
  std::span<const double> vog_gradient(std::size_t snapshot, std::size_t example) const {
    return {vog_gradients.data() + (snapshot * n_examples + example) * input_dim, input_dim};
  }
};

/// Trains run `run_index` of the experiment. Pure in (exp, dataset, run_index).
TraceStore run_training(const ExperimentConfig& exp, const Dataset& dataset,
                        std::size_t run_index = 0);

/// All n_runs runs, scheduled across `workers` threads.
std::vector<TraceStore> run_replicates(const ExperimentConfig& exp, const Dataset& dataset,
                                       std::size_t workers = 1);

/// One directory per run: eval.csv, minibatch.csv, checkpoint.csv, vog.csv
/// and trace.json.
void save_trace(const TraceStore& trace, const std::filesystem::path& dir);
TraceStore load_trace(const std::filesystem::path& dir);

void save_labels(const LabelSet& labels, const std::filesystem::path& path);
LabelSet load_labels(const std::filesystem::path& path);

}  // namespace difflab
