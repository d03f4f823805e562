#include <algorithm>
#include <cmath>

#include "difflab/error.hpp"
#include "difflab/trainer.hpp"

namespace difflab {

Model::Model(ModelConfig config, InputShape shape, std::size_t n_classes,
             std::vector<std::shared_ptr<const Layer>> layers)
    : config_(config), shape_(shape), n_classes_(n_classes), layers_(std::move(layers)) {
  require(!layers_.empty(), "model without layers");
  require(layers_.front()->in_size() == shape_.size(), "first layer does not match input shape");
  require(layers_.back()->out_size() == n_classes_, "last layer does not match class count");
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) {
      require(layers_[l]->in_size() == layers_[l - 1]->out_size(), "layer sizes do not chain");
    }
    offsets_.push_back(total);
    total += layers_[l]->param_size();
  }
  params_.assign(total, 0.0);
  config_.param_count = total;
}

void Model::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l]->init(std::span<double>(params_).subspan(offsets_[l], layers_[l]->param_size()),
                     rng);
  }
}

Workspace Model::make_workspace() const {
  Workspace ws;
  ws.activations.emplace_back(shape_.size());
  ws.gradients.emplace_back(shape_.size());
  for (const auto& layer : layers_) {
    ws.activations.emplace_back(layer->out_size());
    ws.gradients.emplace_back(layer->out_size());
  }
  ws.probs.resize(n_classes_);
  return ws;
}

void Model::forward(std::span<const double> input, Workspace& ws) const {
  std::copy(input.begin(), input.end(), ws.activations[0].begin());
  const std::span<const double> all(params_);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l]->forward(all.subspan(offsets_[l], layers_[l]->param_size()), ws.activations[l],
                        ws.activations[l + 1]);
  }
  const auto& logits = ws.activations.back();
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes_; ++c) {
    ws.probs[c] = std::exp(logits[c] - top);
    sum += ws.probs[c];
  }
  for (double& p : ws.probs) p /= sum;
}

void Model::backward(Workspace& ws, std::span<const double> grad_logits,
                     std::span<double> grad_params, std::span<double> grad_input) const {
  std::copy(grad_logits.begin(), grad_logits.end(), ws.gradients.back().begin());
  const std::span<const double> all(params_);
  const bool want_input = !grad_input.empty();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto slice = all.subspan(offsets_[l], layers_[l]->param_size());
    std::span<double> gp;
    if (!grad_params.empty()) gp = grad_params.subspan(offsets_[l], layers_[l]->param_size());
    std::span<double> gin;
    if (l > 0 || want_input) gin = ws.gradients[l];
    // Skip the whole pass once nothing further upstream is needed.
    if (gp.empty() && gin.empty()) break;
    layers_[l]->backward(slice, ws.activations[l], ws.activations[l + 1], ws.gradients[l + 1],
                         gp, gin);
  }
  if (want_input) std::copy(ws.gradients[0].begin(), ws.gradients[0].end(), grad_input.begin());
}

Model build_model(const ModelConfig& config, InputShape shape, std::size_t n_classes,
                  std::uint64_t seed) {
  require(shape.size() > 0, "input shape has zero size");
  require(n_classes >= 2, "need at least two classes");
  require(config.depth >= 1, "model depth must be positive");
  require(config.width_multiplier > 0.0, "width multiplier must be positive");
  std::vector<std::shared_ptr<const Layer>> layers;
  if (config.family == ModelFamily::kMlp) {
    const auto width = static_cast<std::size_t>(
        std::llround(static_cast<double>(kMlpBaseWidth) * config.width_multiplier));
    require(width > 0, "width multiplier " + std::to_string(config.width_multiplier) +
                           " gives a zero-size hidden layer");
    std::size_t in = shape.size();
    for (int d = 0; d < config.depth; ++d) {
      layers.push_back(make_dense(in, width));
      layers.push_back(make_relu(width));
      in = width;
    }
    layers.push_back(make_dense(in, n_classes));
  } else {
    require(config.depth <= 4, "cnn family supports 1 to 4 conv layers");
    const auto channels = static_cast<std::size_t>(
        std::llround(static_cast<double>(kCnnBaseChannels) * config.width_multiplier));
    require(channels > 0, "width multiplier " + std::to_string(config.width_multiplier) +
                              " gives zero conv channels");
    InputShape current = shape;
    for (int d = 0; d < config.depth; ++d) {
      layers.push_back(make_conv3x3(current, channels));
      current.channels = channels;
      layers.push_back(make_relu(current.size()));
    }
    if (current.height % 2 == 0 && current.width % 2 == 0) {
      layers.push_back(make_avg_pool2(current));
      current.height /= 2;
      current.width /= 2;
    }
    layers.push_back(make_dense(current.size(), n_classes));
  }
  Model model(config, shape, n_classes, std::move(layers));
  model.init_params(seed);
  return model;
}

double loss_gradients(const Model& model, Workspace& ws, std::span<const double> input, int label,
                      std::span<double> grad_params, std::span<double> grad_input) {
  model.forward(input, ws);
  const auto y = static_cast<std::size_t>(label);
  std::vector<double> grad_logits(ws.probs);
  grad_logits[y] -= 1.0;
  // log-softmax from the logits keeps tiny probabilities finite
  const auto& logits = ws.activations.back();
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (const double z : logits) sum += std::exp(z - top);
  const double loss = top + std::log(sum) - logits[y];
  if (!grad_params.empty() || !grad_input.empty()) {
    model.backward(ws, grad_logits, grad_params, grad_input);
  }
  return loss;
}

}  // namespace difflab
