#include <cmath>
#include <string>

#include "difflab/error.hpp"
#include "difflab/scores.hpp"

namespace difflab {
namespace {

ScoreMatrix single_run(const TraceStore& trace, ScoreId id) {
  ScoreMatrix m;
  m.kind = ScoreKind::builtin(id);
  m.model = trace.model;
  m.dataset_name = trace.dataset_name;
  m.n_examples = trace.n_examples;
  m.n_runs = 1;
  m.values.assign(trace.n_examples, 0.0);
  m.run_seeds = {trace.seed};
  return m;
}

void require_eval(const TraceStore& trace) {
  require(trace.epochs >= 1 &&
              trace.eval.size() == trace.n_examples * static_cast<std::size_t>(trace.epochs),
          "trace has an incomplete eval series");
}

std::vector<std::uint8_t> correctness_series(const TraceStore& trace, std::size_t example,
                                             LearnedSeries series) {
  if (series == LearnedSeries::kMinibatch) {
    require(trace.minibatch_correct.size() ==
                trace.n_examples * static_cast<std::size_t>(trace.epochs),
            "trace has an incomplete minibatch series");
    const auto s = trace.minibatch_series(example);
    return {s.begin(), s.end()};
  }
  require_eval(trace);
  std::vector<std::uint8_t> out(static_cast<std::size_t>(trace.epochs));
  for (int e = 0; e < trace.epochs; ++e) out[static_cast<std::size_t>(e)] = trace.eval_at(e, example).correct;
  return out;
}

void require_capture(const TraceStore& trace, int checkpoint_epoch) {
  require(checkpoint_epoch >= 1 && checkpoint_epoch <= trace.epochs,
          "checkpoint epoch " + std::to_string(checkpoint_epoch) + " is beyond the " +
              std::to_string(trace.epochs) + " trained epochs");
  require(trace.checkpoint_epoch == checkpoint_epoch && !trace.checkpoint_grad_norm.empty(),
          "missing checkpoint capture at epoch " + std::to_string(checkpoint_epoch) +
              " (trace captured epoch " + std::to_string(trace.checkpoint_epoch) + ")");
}

}  // namespace

std::vector<ScoreRequest> default_score_requests(int checkpoint_epoch) {
  std::vector<ScoreRequest> requests;
  for (const auto& kind : computed_score_kinds()) {
    ScoreRequest request{kind, {}, {}};
    if (kind.id() == ScoreId::kGraNd || kind.id() == ScoreId::kEL2N) {
      request.checkpoint_epoch = checkpoint_epoch;
    }
    requests.push_back(request);
  }
  return requests;
}

std::size_t count_forgetting(std::span<const std::uint8_t> correct) {
  std::size_t events = 0;
  for (std::size_t t = 1; t < correct.size(); ++t) {
    if (correct[t - 1] && !correct[t]) ++events;
  }
  return events;
}

double learned_index(std::span<const std::uint8_t> correct, double sentinel) {
  if (correct.empty() || !correct.back()) return sentinel;
  std::size_t start = correct.size();
  while (start > 0 && correct[start - 1]) --start;
  return static_cast<double>(start);
}

double error_l2_norm(std::span<const double> probs, int label) {
  require(label >= 0 && static_cast<std::size_t>(label) < probs.size(), "label outside class range");
  double ss = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    const double target = c == static_cast<std::size_t>(label) ? 1.0 : 0.0;
    ss += (probs[c] - target) * (probs[c] - target);
  }
  return std::sqrt(ss);
}

double mean_gradient_variance(std::span<const std::span<const double>> snapshots) {
  require(snapshots.size() >= 2, "VoG needs at least two gradient snapshots");
  const std::size_t dims = snapshots.front().size();
  require(dims > 0, "VoG snapshots are empty");
  const double count = static_cast<double>(snapshots.size());
  double total = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (const auto& s : snapshots) mean += s[d];
    mean /= count;
    double ss = 0.0;
    for (const auto& s : snapshots) ss += (s[d] - mean) * (s[d] - mean);
    total += ss / count;
  }
  return total / static_cast<double>(dims);
}

ScoreMatrix mean_loss(const TraceStore& trace) {
  require_eval(trace);
  auto m = single_run(trace, ScoreId::kMeanLoss);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    double sum = 0.0;
    for (int e = 0; e < trace.epochs; ++e) sum += trace.eval_at(e, i).loss;
    m.values[i] = sum / trace.epochs;
  }
  return m;
}

ScoreMatrix mean_accuracy(const TraceStore& trace) {
  require_eval(trace);
  auto m = single_run(trace, ScoreId::kMeanAccuracy);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    double sum = 0.0;
    for (int e = 0; e < trace.epochs; ++e) sum += trace.eval_at(e, i).correct ? 1.0 : 0.0;
    m.values[i] = sum / trace.epochs;
  }
  return m;
}

ScoreMatrix area_under_margin(const TraceStore& trace) {
  require_eval(trace);
  auto m = single_run(trace, ScoreId::kAreaUnderMargin);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    double sum = 0.0;
    for (int e = 0; e < trace.epochs; ++e) {
      const auto& p = trace.eval_at(e, i);
      sum += p.true_prob - p.max_other_prob;
    }
    m.values[i] = sum / trace.epochs;
  }
  return m;
}

ScoreMatrix forgetting_count(const TraceStore& trace, LearnedSeries series) {
  auto m = single_run(trace, ScoreId::kForgetting);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    m.values[i] = static_cast<double>(count_forgetting(correctness_series(trace, i, series)));
  }
  return m;
}

ScoreMatrix consistently_learned(const TraceStore& trace, std::optional<double> sentinel,
                                 LearnedSeries series) {
  const double never = sentinel.value_or(static_cast<double>(trace.epochs + 1));
  require(std::isfinite(never), "never-learned sentinel must be finite");
  auto m = single_run(trace, ScoreId::kConsistentlyLearned);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    m.values[i] = learned_index(correctness_series(trace, i, series), never);
  }
  return m;
}

ScoreMatrix el2n(const TraceStore& trace, const LabelSet& labels, int checkpoint_epoch) {
  require_capture(trace, checkpoint_epoch);
  require(labels.size() == trace.n_examples && labels.n_classes == trace.n_classes,
          "label set does not match the trace");
  auto m = single_run(trace, ScoreId::kEL2N);
  m.checkpoint_epoch = checkpoint_epoch;
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    m.values[i] = error_l2_norm(trace.checkpoint_prob_vector(i), labels.labels[i]);
  }
  return m;
}

ScoreMatrix grand(const TraceStore& trace, int checkpoint_epoch) {
  require_capture(trace, checkpoint_epoch);
  auto m = single_run(trace, ScoreId::kGraNd);
  m.checkpoint_epoch = checkpoint_epoch;
  m.values = trace.checkpoint_grad_norm;
  return m;
}

ScoreMatrix vog(const TraceStore& trace, const LabelSet* labels, const ScoreOptions& options) {
  const std::size_t snapshots = trace.vog_epochs.size();
  require(snapshots >= 2, "VoG needs at least two gradient snapshots, trace has " +
                              std::to_string(snapshots));
  require(trace.vog_gradients.size() == snapshots * trace.n_examples * trace.input_dim,
          "trace has incomplete VoG snapshots");
  auto m = single_run(trace, ScoreId::kVoG);
  std::vector<std::span<const double>> views(snapshots);
  for (std::size_t i = 0; i < trace.n_examples; ++i) {
    for (std::size_t s = 0; s < snapshots; ++s) views[s] = trace.vog_gradient(s, i);
    m.values[i] = mean_gradient_variance(views);
  }
  if (options.vog_class_normalize) {
    require(labels != nullptr && labels->size() == trace.n_examples,
            "class-normalized VoG needs the label set");
    for (std::size_t c = 0; c < labels->n_classes; ++c) {
      double sum = 0.0, count = 0.0;
      for (std::size_t i = 0; i < trace.n_examples; ++i) {
        if (static_cast<std::size_t>(labels->labels[i]) == c) { sum += m.values[i]; count += 1.0; }
      }
      if (count == 0.0) continue;
      const double mu = sum / count;
      double ss = 0.0;
      for (std::size_t i = 0; i < trace.n_examples; ++i) {
        if (static_cast<std::size_t>(labels->labels[i]) == c) ss += (m.values[i] - mu) * (m.values[i] - mu);
      }
      const double sd = std::sqrt(ss / count);
      for (std::size_t i = 0; i < trace.n_examples; ++i) {
        if (static_cast<std::size_t>(labels->labels[i]) == c) {
          m.values[i] = sd > 0.0 ? (m.values[i] - mu) / sd : 0.0;
        }
      }
    }
  }
  return m;
}

ScoreMatrix compute_score(const TraceStore& trace, const LabelSet& labels,
                          const ScoreRequest& request, const ScoreOptions& options) {
  const ScoreId id = request.kind.id();
  const bool needs_checkpoint = id == ScoreId::kGraNd || id == ScoreId::kEL2N;
  require(needs_checkpoint == request.checkpoint_epoch.has_value(),
          request.kind.name() + ": checkpoint_epoch is required for GraNd/EL2N and only for them");
  switch (id) {
    case ScoreId::kMeanLoss: return mean_loss(trace);
    case ScoreId::kMeanAccuracy: return mean_accuracy(trace);
    case ScoreId::kAreaUnderMargin: return area_under_margin(trace);
    case ScoreId::kForgetting: return forgetting_count(trace, options.learned_series);
    case ScoreId::kConsistentlyLearned:
      return consistently_learned(trace, request.sentinel_never_learned, options.learned_series);
    case ScoreId::kGraNd: return grand(trace, *request.checkpoint_epoch);
    case ScoreId::kEL2N: return el2n(trace, labels, *request.checkpoint_epoch);
    case ScoreId::kVoG: return vog(trace, &labels, options);
    case ScoreId::kExternal: break;
  }
  fail("external scores are imported, not computed");
}

std::vector<ScoreMatrix> compute_all(std::span<const TraceStore> traces, const LabelSet& labels,
                                     std::span<const ScoreRequest> requests,
                                     const ScoreOptions& options) {
  std::vector<ScoreMatrix> out;
  if (requests.empty()) return out;
  require(!traces.empty(), "compute_all: no traces");
  for (const auto& trace : traces) {
    require(trace.model.same_architecture(traces.front().model) &&
                trace.n_examples == traces.front().n_examples &&
                trace.epochs == traces.front().epochs &&
                trace.dataset_name == traces.front().dataset_name,
            "compute_all: traces come from different experiments");
  }
  for (const auto& request : requests) {
    try {
      std::vector<ScoreMatrix> columns;
      columns.reserve(traces.size());
      for (const auto& trace : traces) columns.push_back(compute_score(trace, labels, request, options));
      out.push_back(concat_runs(columns));
    } catch (const Error& e) {
      throw Error(e.kind(), request.kind.name() + ": " + e.what());
    }
  }
  return out;
}

}  // namespace difflab
