#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "difflab/error.hpp"
#include "difflab/trainer.hpp"

namespace difflab {
namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr double kDivergenceLoss = 1e6;

std::size_t argmax(std::span<const double> xs) {
  return static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

}  // namespace

void validate(const ExperimentConfig& exp) {
  require(exp.n_examples > 0, "n_examples must be positive");
  require(exp.n_runs >= 1, "n_runs must be at least 1");
  require(exp.epochs >= 1, "epochs must be positive");
  require(exp.batch_size >= 1, "batch_size must be positive");
  require(std::isfinite(exp.learning_rate) && exp.learning_rate >= 0.0,
          "learning_rate must be a finite non-negative number");
  require(exp.checkpoint_epoch >= 1 && exp.checkpoint_epoch <= exp.epochs,
          "checkpoint_epoch (" + std::to_string(exp.checkpoint_epoch) +
              ") must lie in [1, epochs] (epochs = " + std::to_string(exp.epochs) + ")");
  require(exp.vog_interval >= 1, "vog_interval must be positive");
}

TraceStore run_training(const ExperimentConfig& exp, const Dataset& dataset,
                        std::size_t run_index) {
  validate(exp);
  validate(dataset.labels);
  require(dataset.size() == exp.n_examples,
          "dataset has " + std::to_string(dataset.size()) + " examples but n_examples = " +
              std::to_string(exp.n_examples));

  const std::int64_t seed = exp.run_seed(run_index);
  const auto useed = static_cast<std::uint64_t>(seed);
  Model model = build_model(exp.model, dataset.shape, dataset.labels.n_classes,
                            derive_seed(useed, kInitStream));
  Rng shuffle_rng(derive_seed(useed, kShuffleStream));

  const std::size_t n = dataset.size();
  const std::size_t n_classes = dataset.labels.n_classes;
  const std::size_t dim = dataset.input_dim();
  const std::size_t n_params = model.param_count();
  const auto epochs = static_cast<std::size_t>(exp.epochs);

  TraceStore trace;
  trace.dataset_name = exp.dataset_name;
  trace.model = model.config();
  trace.run_index = run_index;
  trace.seed = seed;
  trace.n_examples = n;
  trace.n_classes = n_classes;
  trace.input_dim = dim;
  trace.epochs = exp.epochs;
  trace.eval.resize(epochs * n);
  trace.minibatch_correct.assign(n * epochs, 0);
  trace.checkpoint_epoch = exp.checkpoint_epoch;
  for (int e = exp.vog_interval; e <= exp.epochs; e += exp.vog_interval) trace.vog_epochs.push_back(e);
  trace.vog_gradients.reserve(trace.vog_epochs.size() * n * dim);

  Workspace ws = model.make_workspace();
  std::vector<double> batch_grad(n_params);
  std::vector<double> example_grad(n_params);
  std::vector<double> input_grad(dim);
  std::vector<double> dlogits(n_classes);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto diverged = [&](int epoch, double loss) {
    throw Error(ErrorKind::kRuntime,
                "training diverged in run " + std::to_string(run_index) + " (seed " +
                    std::to_string(seed) + ") at epoch " + std::to_string(epoch) +
                    ": mean loss " + std::to_string(loss));
  };

  for (int epoch = 1; epoch <= exp.epochs; ++epoch) {
    const auto use = static_cast<std::size_t>(epoch - 1);
    shuffle_rng.shuffle(order);
    double train_loss = 0.0;
    for (std::size_t start = 0; start < n; start += exp.batch_size) {
      const std::size_t stop = std::min(n, start + exp.batch_size);
      std::fill(batch_grad.begin(), batch_grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const int y = dataset.labels.labels[i];
        train_loss += loss_gradients(model, ws, dataset.example(i), y, batch_grad, {});
        trace.minibatch_correct[i * epochs + use] =
            argmax(ws.probs) == static_cast<std::size_t>(y) ? 1 : 0;
      }
      const double step = exp.learning_rate / static_cast<double>(stop - start);
      auto params = model.mutable_params();
      for (std::size_t p = 0; p < n_params; ++p) params[p] -= step * batch_grad[p];
    }
    train_loss /= static_cast<double>(n);
    if (!std::isfinite(train_loss) || train_loss > kDivergenceLoss) diverged(epoch, train_loss);

    const bool vog_snapshot = epoch % exp.vog_interval == 0;
    const bool checkpoint = epoch == exp.checkpoint_epoch;
    if (checkpoint) {
      trace.checkpoint_probs.resize(n * n_classes);
      trace.checkpoint_grad_norm.resize(n);
    }
    double eval_loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = dataset.labels.labels[i];
      const auto yi = static_cast<std::size_t>(y);
      EvalPoint& point = trace.eval[use * n + i];
      if (checkpoint) {
        std::fill(example_grad.begin(), example_grad.end(), 0.0);
        point.loss = loss_gradients(model, ws, dataset.example(i), y, example_grad, {});
        double ss = 0.0;
        for (const double g : example_grad) ss += g * g;
        trace.checkpoint_grad_norm[i] = std::sqrt(ss);
        std::copy(ws.probs.begin(), ws.probs.end(), trace.checkpoint_probs.begin() +
                                                        static_cast<std::ptrdiff_t>(i * n_classes));
      } else {
        point.loss = loss_gradients(model, ws, dataset.example(i), y, {}, {});
      }
      point.true_prob = ws.probs[yi];
      double other = 0.0;
      for (std::size_t c = 0; c < n_classes; ++c) {
        if (c != yi) other = std::max(other, ws.probs[c]);
      }
      point.max_other_prob = other;
      point.correct = argmax(ws.probs) == yi;
      eval_loss += point.loss;

      if (vog_snapshot) {
        // ws still holds this example's forward pass
        if (exp.vog_target == VogTarget::kLoss) {
          std::copy(ws.probs.begin(), ws.probs.end(), dlogits.begin());
          dlogits[yi] -= 1.0;
        } else {
          std::fill(dlogits.begin(), dlogits.end(), 0.0);
          dlogits[yi] = 1.0;
        }
        model.backward(ws, dlogits, {}, input_grad);
        trace.vog_gradients.insert(trace.vog_gradients.end(), input_grad.begin(),
                                   input_grad.end());
      }
    }
    eval_loss /= static_cast<double>(n);
    if (!std::isfinite(eval_loss) || eval_loss > kDivergenceLoss) diverged(epoch, eval_loss);
  }
  return trace;
}

std::vector<TraceStore> run_replicates(const ExperimentConfig& exp, const Dataset& dataset,
                                       std::size_t workers) {
  validate(exp);
  std::vector<TraceStore> traces(exp.n_runs);
  std::vector<std::exception_ptr> errors(exp.n_runs);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < exp.n_runs; r = next++) {
      try {
        traces[r] = run_training(exp, dataset, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(workers, exp.n_runs));
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& thread : pool) thread.join();
  }
  for (std::size_t r = 0; r < exp.n_runs; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const Error& e) {
      throw Error(e.kind(), "run " + std::to_string(r) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kRuntime, "run " + std::to_string(r) + ": " + e.what());
    }
  }
  return traces;
}

}  // namespace difflab
