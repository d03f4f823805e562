#include <doctest.h>

#include <cmath>
#include <vector>

#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "difflab/scores.hpp"
#include "difflab/trainer.hpp"

using namespace difflab;

namespace {

using Bits = std::vector<std::uint8_t>;

// A trace of n examples over `epochs` epochs with every field sized and zeroed.
TraceStore blank_trace(std::size_t n, int epochs, std::size_t classes = 2, std::size_t dim = 1) {
  TraceStore t;
  t.dataset_name = "constructed";
  t.n_examples = n;
  t.n_classes = classes;
  t.input_dim = dim;
  t.epochs = epochs;
  t.eval.resize(n * static_cast<std::size_t>(epochs));
  t.minibatch_correct.assign(n * static_cast<std::size_t>(epochs), 0);
  t.checkpoint_epoch = 1;
  t.checkpoint_probs.assign(n * classes, 1.0 / static_cast<double>(classes));
  t.checkpoint_grad_norm.assign(n, 0.0);
  return t;
}

EvalPoint& point(TraceStore& t, int epoch, std::size_t i) {
  return t.eval[static_cast<std::size_t>(epoch) * t.n_examples + i];
}

void set_minibatch(TraceStore& t, std::size_t i, const Bits& bits) {
  for (std::size_t e = 0; e < bits.size(); ++e) {
    t.minibatch_correct[i * static_cast<std::size_t>(t.epochs) + e] = bits[e];
  }
}

Bits bits_of(unsigned mask, std::size_t length) {
  Bits b(length);
  for (std::size_t i = 0; i < length; ++i) b[i] = (mask >> i) & 1u;
  return b;
}

// Independent transition counters.
std::size_t count_transitions(const Bits& s, std::uint8_t from, std::uint8_t to) {
  std::size_t n = 0;
  for (std::size_t t = 0; t + 1 < s.size(); ++t) n += s[t] == from && s[t + 1] == to;
  return n;
}

LabelSet labels_of(std::vector<int> y, std::size_t classes) {
  LabelSet l;
  l.n_classes = classes;
  l.labels = std::move(y);
  return l;
}

}  // namespace

TEST_CASE("mean loss") {
  auto t = blank_trace(3, 3);
  const double losses[3][3] = {{0, 0, 0}, {1.0, 0.5, 0.25}, {0.7, 0.7, 0.7}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (int e = 0; e < 3; ++e) point(t, e, i).loss = losses[i][e];
  }
  const auto m = mean_loss(t);
  CHECK(m.values[0] == 0.0);
  CHECK(std::fabs(m.values[1] - 1.75 / 3.0) <= 1e-10);
  CHECK(std::fabs(m.values[2] - 0.7) <= 1e-10);
  CHECK(m.n_runs == 1);
}

TEST_CASE("mean accuracy") {
  auto t = blank_trace(3, 4);
  const bool flags[3][4] = {{1, 1, 1, 1}, {1, 0, 1, 0}, {0, 0, 0, 0}};
  for (std::size_t i = 0; i < 3; ++i) {
    for (int e = 0; e < 4; ++e) point(t, e, i).correct = flags[i][e];
  }
  const auto m = mean_accuracy(t);
  CHECK(m.values == std::vector<double>{1.0, 0.5, 0.0});
}

TEST_CASE("area under margin") {
  auto t = blank_trace(2, 2, 10);
  for (int e = 0; e < 2; ++e) {
    point(t, e, 0) = {0.0, 1.0, 0.0, true};
    point(t, e, 1) = {0.0, 0.1, 0.1, false};
  }
  const auto m = area_under_margin(t);
  CHECK(m.values[0] == 1.0);
  CHECK(std::fabs(m.values[1]) <= 1e-10);

  auto single = blank_trace(1, 1, 3);
  point(single, 0, 0) = {0.0, 0.2, 0.5, false};
  CHECK(std::fabs(area_under_margin(single).values[0] + 0.3) <= 1e-10);
}

TEST_CASE("forgetting counts") {
  CHECK(count_forgetting(Bits{0, 1, 1, 1}) == 0);
  CHECK(count_forgetting(Bits{1, 0, 1, 0}) == 2);
  CHECK(count_forgetting(Bits{0, 0, 0}) == 0);
  CHECK(count_forgetting(Bits{}) == 0);

  auto t = blank_trace(2, 4);
  set_minibatch(t, 0, {1, 0, 1, 0});
  set_minibatch(t, 1, {0, 1, 1, 1});
  const auto m = forgetting_count(t);
  CHECK(m.values == std::vector<double>{2, 0});

  // The per-epoch series is a separate source.
  for (int e = 0; e < 4; ++e) point(t, e, 1).correct = e % 2 == 0;
  CHECK(forgetting_count(t, LearnedSeries::kEpochEval).values[1] == 2);
}

TEST_CASE("forgetting agrees with a transition counter on every sequence up to length 10") {
  for (std::size_t length = 0; length <= 10; ++length) {
    for (unsigned mask = 0; mask < (1u << length); ++mask) {
      const auto s = bits_of(mask, length);
      const auto down = count_transitions(s, 1, 0);
      const auto up = count_transitions(s, 0, 1);
      const auto f = count_forgetting(s);
      CHECK(f == down);
      CHECK(f <= length / 2);
      if (length > 0) {
        // Transition counts differ by the endpoint states.
        const long diff = static_cast<long>(up) - static_cast<long>(down);
        CHECK(diff == static_cast<long>(s.back()) - static_cast<long>(s.front()));
      }
    }
  }
}

TEST_CASE("consistently learned") {
  const double sentinel = 99;
  CHECK(learned_index(Bits{1, 1, 1}, sentinel) == 0);
  CHECK(learned_index(Bits{0, 1, 0, 1}, sentinel) == 3);
  CHECK(learned_index(Bits{1, 1, 0}, sentinel) == sentinel);

  auto t = blank_trace(2, 3);
  set_minibatch(t, 0, {0, 1, 1});
  set_minibatch(t, 1, {1, 1, 0});
  const auto m = consistently_learned(t);
  CHECK(m.values == std::vector<double>{1, 4});  // default sentinel epochs + 1
  CHECK(consistently_learned(t, -1.0).values[1] == -1.0);
}

TEST_CASE("consistently learned properties over all short sequences") {
  for (std::size_t length = 1; length <= 10; ++length) {
    const double sentinel = static_cast<double>(length + 1);
    for (unsigned mask = 0; mask < (1u << length); ++mask) {
      const auto s = bits_of(mask, length);
      const double idx = learned_index(s, sentinel);
      CHECK((idx <= static_cast<double>(length) || idx == sentinel));
      if (s.back()) {
        CHECK(idx < static_cast<double>(length));
        for (std::size_t t = static_cast<std::size_t>(idx); t < length; ++t) CHECK(s[t] == 1);
        if (idx > 0) CHECK(s[static_cast<std::size_t>(idx) - 1] == 0);
      }
      if (count_forgetting(s) == 0 && s.back()) {
        std::size_t first = 0;
        while (!s[first]) ++first;
        CHECK(idx == static_cast<double>(first));
      }
    }
  }
}

TEST_CASE("error l2 norm") {
  const double onehot[] = {0, 1, 0};
  CHECK(error_l2_norm(onehot, 1) == 0.0);
  const double half[] = {0.5, 0.5};
  CHECK(std::fabs(error_l2_norm(half, 0) - std::sqrt(0.5)) <= 1e-10);
  const double p[] = {0.6, 0.3, 0.1};
  CHECK(std::fabs(error_l2_norm(p, 1) - std::sqrt(0.86)) <= 1e-10);
  CHECK(std::fabs(error_l2_norm(p, 1) - 0.92736) <= 1e-5);
  CHECK_THROWS_AS(error_l2_norm(p, 3), Error);

  // Off-true mass on one class: sqrt(2) (1 - p_true).
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const double pt = rng.uniform();
    std::vector<double> q(5, 0.0);
    q[2] = pt;
    q[rng.below(2) == 0 ? 0 : 4] = 1.0 - pt;
    CHECK(std::fabs(error_l2_norm(q, 2) - std::sqrt(2.0) * (1.0 - pt)) <= 1e-12);
  }
}

TEST_CASE("EL2N and GraNd read the checkpoint capture") {
  auto t = blank_trace(2, 3, 3);
  t.checkpoint_epoch = 2;
  const double probs[] = {0.6, 0.3, 0.1, 0.0, 1.0, 0.0};
  t.checkpoint_probs.assign(std::begin(probs), std::end(probs));
  t.checkpoint_grad_norm = {0.0, 2.5};
  const auto labels = labels_of({1, 1}, 3);
  const auto e = el2n(t, labels, 2);
  CHECK(std::fabs(e.values[0] - std::sqrt(0.86)) <= 1e-10);
  CHECK(e.values[1] == 0.0);
  CHECK(e.checkpoint_epoch == 2);
  CHECK(grand(t, 2).values == std::vector<double>{0.0, 2.5});
  CHECK_THROWS_AS(grand(t, 4), Error);
  CHECK_THROWS_AS(grand(t, 1), Error);
}

TEST_CASE("GraNd equals the finite-difference gradient norm at the checkpoint") {
  SyntheticSpec spec;
  spec.n_examples = 12;
  spec.n_classes = 2;
  spec.image_size = 2;
  spec.seed = 4;
  const auto data = make_synthetic_dataset(spec);

  ExperimentConfig exp;
  exp.n_examples = data.size();
  exp.model.family = ModelFamily::kMlp;
  exp.model.width_multiplier = 1.0 / 8;
  exp.epochs = 1;
  exp.checkpoint_epoch = 1;
  exp.learning_rate = 0.0;  // checkpoint parameters equal the initialization
  exp.base_seed = 9;
  const auto trace = run_training(exp, data);
  const auto scores = grand(trace, 1);

  Model model = build_model(exp.model, data.shape, 2, derive_seed(9, 1));
  REQUIRE(model.param_count() <= 100);
  auto ws = model.make_workspace();
  const double h = 1e-5;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.labels.labels[i];
    double ss = 0.0;
    auto params = model.mutable_params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double keep = params[p];
      params[p] = keep + h;
      const double up = loss_gradients(model, ws, data.example(i), y, {}, {});
      params[p] = keep - h;
      const double down = loss_gradients(model, ws, data.example(i), y, {}, {});
      params[p] = keep;
      const double g = (up - down) / (2 * h);
      ss += g * g;
    }
    const double fd = std::sqrt(ss);
    CHECK(std::fabs(fd - scores.values[i]) <= 1e-4 * std::max(fd, 1e-6));
  }
}

TEST_CASE("gradient variance") {
  const double g[] = {0.3, -1.0, 2.0};
  const std::span<const double> same[] = {g, g, g};
  CHECK(mean_gradient_variance(same) == 0.0);

  const std::size_t d = 5;
  std::vector<double> a(d, 1.0), b(d, 1.0);
  a[2] = 0.0;
  b[2] = 2.0;
  const std::span<const double> two[] = {a, b};
  CHECK(std::fabs(mean_gradient_variance(two) - 1.0 / d) <= 1e-12);

  const std::span<const double> one[] = {a};
  CHECK_THROWS_AS(mean_gradient_variance(one), Error);
}

TEST_CASE("gradient variance matches a two-pass oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::vector<double>> snaps(3, std::vector<double>(4));
    for (auto& s : snaps) {
      for (auto& v : s) v = rng.normal(0.0, 3.0);
    }
    double total = 0.0;
    for (std::size_t p = 0; p < 4; ++p) {
      const double mean = (snaps[0][p] + snaps[1][p] + snaps[2][p]) / 3.0;
      double var = 0.0;
      for (const auto& s : snaps) var += (s[p] - mean) * (s[p] - mean);
      total += var / 3.0;
    }
    const std::span<const double> views[] = {snaps[0], snaps[1], snaps[2]};
    CHECK(std::fabs(mean_gradient_variance(views) - total / 4.0) <= 1e-10);
  }
}

TEST_CASE("VoG over trace snapshots and class normalization") {
  auto t = blank_trace(4, 2, 2, 2);
  t.vog_epochs = {1, 2};
  // snapshot-major: [snapshot][example][dim]
  t.vog_gradients = {0, 0, 1, 1, 0, 0, 2, 0,  //
                     0, 0, 3, 1, 4, 0, 2, 0};
  const auto labels = labels_of({0, 0, 1, 1}, 2);
  const auto raw = vog(t);
  CHECK(raw.values == std::vector<double>{0.0, 0.5, 2.0, 0.0});

  ScoreOptions opts;
  opts.vog_class_normalize = true;
  const auto norm = vog(t, &labels, opts);
  CHECK(std::fabs(norm.values[0] + 1.0) <= 1e-12);
  CHECK(std::fabs(norm.values[1] - 1.0) <= 1e-12);
  CHECK(std::fabs(norm.values[2] - 1.0) <= 1e-12);
  CHECK(std::fabs(norm.values[3] + 1.0) <= 1e-12);
  CHECK_THROWS_AS(vog(t, nullptr, opts), Error);

  t.vog_epochs = {2};
  t.vog_gradients.resize(8);
  CHECK_THROWS_AS(vog(t), Error);
}

TEST_CASE("compute_all shapes, ranges and run-order invariance") {
  SyntheticSpec spec;
  spec.n_examples = 40;
  spec.n_classes = 3;
  spec.image_size = 4;
  spec.seed = 2;
  const auto data = make_synthetic_dataset(spec);
  ExperimentConfig exp;
  exp.n_examples = data.size();
  exp.model.family = ModelFamily::kCnn;
  exp.model.width_multiplier = 0.5;
  exp.n_runs = 2;
  exp.epochs = 5;
  exp.checkpoint_epoch = 2;
  exp.base_seed = 50;
  const auto traces = run_replicates(exp, data);
  const auto requests = default_score_requests(2);
  const auto all = compute_all(traces, data.labels, requests);
  REQUIRE(all.size() == 8);
  for (const auto& m : all) {
    CHECK(m.n_examples == 40);
    CHECK(m.n_runs == 2);
    CHECK(m.run_seeds == std::vector<std::int64_t>{50, 51});
    for (const double v : m.values) {
      switch (m.kind.id()) {
        case ScoreId::kMeanAccuracy: CHECK((v >= 0 && v <= 1)); break;
        case ScoreId::kAreaUnderMargin: CHECK((v >= -1 && v <= 1)); break;
        case ScoreId::kEL2N: CHECK((v >= 0 && v <= std::sqrt(2.0))); break;
        case ScoreId::kForgetting: CHECK((v >= 0 && v <= 2)); break;
        case ScoreId::kConsistentlyLearned: CHECK((v >= 0 && v <= 6)); break;
        default: CHECK(v >= 0); break;
      }
    }
  }

  const TraceStore reversed[] = {traces[1], traces[0]};
  const auto swapped = compute_all(reversed, data.labels, requests);
  for (std::size_t k = 0; k < all.size(); ++k) {
    for (std::size_t i = 0; i < 40; ++i) {
      CHECK(swapped[k].at(i, 0) == all[k].at(i, 1));
      CHECK(swapped[k].at(i, 1) == all[k].at(i, 0));
    }
  }

  CHECK(compute_all(traces, data.labels, std::span<const ScoreRequest>{}).empty());
  ScoreRequest late{ScoreKind::builtin(ScoreId::kGraNd), 9, {}};
  CHECK_THROWS_AS(compute_score(traces[0], data.labels, late), Error);
  ScoreRequest missing{ScoreKind::builtin(ScoreId::kEL2N), {}, {}};
  CHECK_THROWS_AS(compute_score(traces[0], data.labels, missing), Error);
}
