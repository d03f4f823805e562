#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "difflab/trainer.hpp"
#include "test_util.hpp"

using namespace difflab;

namespace {

ModelConfig mlp(double width, int depth = 1) {
  ModelConfig m;
  m.family = ModelFamily::kMlp;
  m.width_multiplier = width;
  m.depth = depth;
  return m;
}

ModelConfig cnn(double width, int depth = 1) {
  ModelConfig m = mlp(width, depth);
  m.family = ModelFamily::kCnn;
  return m;
}

// Two Gaussian clouds in the plane, centres 4 units apart.
Dataset blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.name = "blobs";
  d.shape = {1, 1, 2};
  d.labels.n_classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    const double c = y == 0 ? -2.0 : 2.0;
    d.features.push_back(c + rng.normal() * 0.7);
    d.features.push_back(-c + rng.normal() * 0.7);
    d.labels.labels.push_back(y);
  }
  return d;
}

ExperimentConfig small_experiment(const Dataset& d, ModelConfig model) {
  ExperimentConfig exp;
  exp.dataset_name = d.name;
  exp.n_examples = d.size();
  exp.model = model;
  exp.epochs = 4;
  exp.batch_size = 8;
  exp.learning_rate = 0.1;
  exp.checkpoint_epoch = 2;
  exp.vog_interval = 1;
  return exp;
}

Dataset tiny_synthetic(std::size_t n = 60, std::uint64_t seed = 3) {
  SyntheticSpec spec;
  spec.n_examples = n;
  spec.n_classes = 3;
  spec.image_size = 4;
  spec.seed = seed;
  return make_synthetic_dataset(spec);
}

double relative_error(double a, double b) {
  const double scale = std::max({std::fabs(a), std::fabs(b), 1e-6});
  return std::fabs(a - b) / scale;
}

// Central differences of the loss against analytic parameter and input
// gradients at random points.
void check_gradients(const ModelConfig& config, InputShape shape, std::size_t classes,
                     std::uint64_t seed) {
  Model model = build_model(config, shape, classes, seed);
  REQUIRE(model.param_count() <= 100);
  Rng rng(seed + 1);
  // Biases start at exactly 0, which puts dead-input units on the ReLU kink.
  for (auto& v : model.mutable_params()) v += 0.1 * rng.normal();
  auto ws = model.make_workspace();
  const double h = 1e-5;
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> x(shape.size());
    for (auto& v : x) v = rng.normal();
    const int y = static_cast<int>(rng.below(classes));

    std::vector<double> gp(model.param_count(), 0.0), gx(shape.size(), 0.0);
    loss_gradients(model, ws, x, y, gp, gx);

    auto params = model.mutable_params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      const double keep = params[p];
      params[p] = keep + h;
      const double up = loss_gradients(model, ws, x, y, {}, {});
      params[p] = keep - h;
      const double down = loss_gradients(model, ws, x, y, {}, {});
      params[p] = keep;
      const double fd = (up - down) / (2 * h);
      CHECK_MESSAGE(relative_error(fd, gp[p]) <= 1e-4,
                    config.tag() << " param " << p << " fd " << fd << " an " << gp[p]);
    }
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double keep = x[d];
      x[d] = keep + h;
      const double up = loss_gradients(model, ws, x, y, {}, {});
      x[d] = keep - h;
      const double down = loss_gradients(model, ws, x, y, {}, {});
      x[d] = keep;
      const double fd = (up - down) / (2 * h);
      CHECK_MESSAGE(relative_error(fd, gx[d]) <= 1e-4,
                    config.tag() << " input " << d << " fd " << fd << " an " << gx[d]);
    }
  }
}

std::string serialized(const TraceStore& trace, const std::filesystem::path& dir) {
  save_trace(trace, dir);
  std::string all;
  for (const char* name : {"eval.csv", "minibatch.csv", "checkpoint.csv", "vog.csv", "trace.json"}) {
    all += testutil::read_text(dir / name);
  }
  return all;
}

}  // namespace

TEST_CASE("parameter count of a 10-4-2 MLP") {
  const auto model = build_model(mlp(1.0 / 8), {1, 1, 10}, 2, 0);
  CHECK(model.param_count() == 10 * 4 + 4 + 4 * 2 + 2);
  CHECK(model.config().param_count == 54);
}

TEST_CASE("parameter count grows with width and depth") {
  const InputShape shape{1, 8, 8};
  const auto p1 = build_model(mlp(1), shape, 10, 0).param_count();
  const auto p4 = build_model(mlp(4), shape, 10, 0).param_count();
  const auto deep = build_model(mlp(1, 3), shape, 10, 0).param_count();
  CHECK(p4 > p1);
  CHECK(deep > p1);
  const auto c1 = build_model(cnn(1), shape, 10, 0).param_count();
  const auto c2 = build_model(cnn(2), shape, 10, 0).param_count();
  CHECK(c2 > c1);
  CHECK_THROWS_AS(build_model(cnn(1, 5), shape, 10, 0), Error);
}

TEST_CASE("same seed gives bitwise-identical initial parameters") {
  const auto a = build_model(cnn(1, 2), {1, 8, 8}, 10, 42);
  const auto b = build_model(cnn(1, 2), {1, 8, 8}, 10, 42);
  const auto c = build_model(cnn(1, 2), {1, 8, 8}, 10, 43);
  CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  CHECK_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST_CASE("MLP gradients match finite differences") {
  check_gradients(mlp(1.0 / 8), {1, 1, 10}, 2, 11);
  check_gradients(mlp(1.0 / 16, 3), {1, 1, 6}, 3, 12);
}

TEST_CASE("CNN gradients match finite differences") {
  check_gradients(cnn(1.0 / 8), {1, 4, 4}, 2, 13);
  check_gradients(cnn(1.0 / 8, 2), {1, 4, 4}, 3, 14);
  check_gradients(cnn(2.0 / 8), {1, 3, 3}, 2, 15);
}

TEST_CASE("one epoch with a single batch gives one minibatch entry per example") {
  const auto d = tiny_synthetic(30);
  auto exp = small_experiment(d, mlp(0.25));
  exp.epochs = 1;
  exp.checkpoint_epoch = 1;
  exp.batch_size = d.size();
  const auto trace = run_training(exp, d);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(trace.minibatch_series(i).size() == 1);
}

TEST_CASE("zero learning rate keeps the evaluation series constant") {
  const auto d = tiny_synthetic(40);
  auto exp = small_experiment(d, cnn(0.5));
  exp.learning_rate = 0.0;
  const auto trace = run_training(exp, d);
  for (int e = 1; e < exp.epochs; ++e) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(trace.eval_at(e, i).loss == trace.eval_at(0, i).loss);
      CHECK(trace.eval_at(e, i).correct == trace.eval_at(0, i).correct);
    }
  }
}

TEST_CASE("separable blobs are learned") {
  const auto d = blobs(200, 5);

  // Reference: a linear classifier w = mean difference through the midpoint.
  double m0[2] = {0, 0}, m1[2] = {0, 0};
  for (std::size_t i = 0; i < d.size(); ++i) {
    auto* m = d.labels.labels[i] == 0 ? m0 : m1;
    m[0] += d.example(i)[0] / 100.0;
    m[1] += d.example(i)[1] / 100.0;
  }
  std::size_t linear_correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.example(i);
    const double s = (m1[0] - m0[0]) * (x[0] - (m0[0] + m1[0]) / 2) +
                     (m1[1] - m0[1]) * (x[1] - (m0[1] + m1[1]) / 2);
    linear_correct += (s > 0 ? 1 : 0) == d.labels.labels[i];
  }
  REQUIRE(linear_correct >= 190);

  auto exp = small_experiment(d, mlp(0.25));
  exp.epochs = 20;
  const auto trace = run_training(exp, d);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += trace.eval_at(exp.epochs - 1, i).correct;
  CHECK(static_cast<double>(correct) / static_cast<double>(d.size()) >= 0.95);
}

TEST_CASE("trace coverage and probability validity") {
  const auto d = tiny_synthetic(50);
  auto exp = small_experiment(d, cnn(0.5));
  exp.vog_interval = 2;
  const auto trace = run_training(exp, d);
  CHECK(trace.eval.size() == static_cast<std::size_t>(exp.epochs) * d.size());
  CHECK(trace.vog_epochs == std::vector<int>{2, 4});
  CHECK(trace.vog_gradients.size() == 2 * d.size() * d.input_dim());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(trace.minibatch_series(i).size() == static_cast<std::size_t>(exp.epochs));
    const auto p = trace.checkpoint_prob_vector(i);
    double sum = 0.0;
    for (const double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::fabs(sum - 1.0) <= 1e-6);
    CHECK(trace.checkpoint_grad_norm[i] >= 0.0);
    for (int e = 0; e < exp.epochs; ++e) {
      const auto& pt = trace.eval_at(e, i);
      CHECK(pt.true_prob >= 0.0);
      CHECK(pt.true_prob + pt.max_other_prob <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("training is deterministic and runs are independent") {
  testutil::TempDir dir("trainer");
  const auto d = tiny_synthetic(40);
  auto exp = small_experiment(d, mlp(0.25, 2));
  exp.n_runs = 5;
  exp.base_seed = 100;

  const auto first = run_replicates(exp, d, 1);
  const auto second = run_replicates(exp, d, 3);
  REQUIRE(first.size() == 5);
  for (std::size_t r = 0; r < 5; ++r) {
    CHECK(first[r].seed == 100 + static_cast<std::int64_t>(r));
    CHECK(serialized(first[r], dir / "a") == serialized(second[r], dir / "b"));
  }
  const auto standalone = run_training(exp, d, 3);
  CHECK(serialized(standalone, dir / "c") == serialized(first[3], dir / "d"));
  CHECK(serialized(first[0], dir / "e") != serialized(first[1], dir / "f"));

  exp.n_runs = 1;
  const auto single = run_replicates(exp, d);
  REQUIRE(single.size() == 1);
  CHECK(serialized(single[0], dir / "g") == serialized(run_training(exp, d, 0), dir / "h"));
}

TEST_CASE("trace save and load round trip") {
  testutil::TempDir dir("trainer");
  const auto d = tiny_synthetic(20);
  const auto trace = run_training(small_experiment(d, cnn(0.5)), d);
  const auto text = serialized(trace, dir / "run");
  const auto back = load_trace(dir / "run");
  CHECK(back.n_examples == trace.n_examples);
  CHECK(back.minibatch_correct == trace.minibatch_correct);
  CHECK(back.checkpoint_probs == trace.checkpoint_probs);
  CHECK(back.vog_gradients == trace.vog_gradients);
  CHECK(back.model.same_architecture(trace.model));
  CHECK(serialized(back, dir / "again") == text);
  CHECK_THROWS_AS(load_trace(dir / "missing"), Error);
}

TEST_CASE("labels round trip") {
  testutil::TempDir dir("trainer");
  const auto d = tiny_synthetic(30);
  save_labels(d.labels, dir / "labels.csv");
  const auto back = load_labels(dir / "labels.csv");
  CHECK(back.labels == d.labels.labels);
  CHECK(back.n_classes == d.labels.n_classes);
}

TEST_CASE("synthetic dataset is seed-determined") {
  const auto a = tiny_synthetic(50, 9);
  const auto b = tiny_synthetic(50, 9);
  const auto c = tiny_synthetic(50, 10);
  CHECK(a.features == b.features);
  CHECK(a.labels.labels == b.labels.labels);
  CHECK(a.features != c.features);
  CHECK_NOTHROW(validate(a.labels));
}

TEST_CASE("divergence aborts with a runtime error") {
  auto d = blobs(40, 1);
  for (auto& v : d.features) v *= 1e4;
  auto exp = small_experiment(d, mlp(1));
  exp.learning_rate = 1e6;
  try {
    run_training(exp, d);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kRuntime);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("invalid experiments are rejected") {
  const auto d = tiny_synthetic(30);
  auto exp = small_experiment(d, mlp(1));
  exp.checkpoint_epoch = exp.epochs + 1;
  CHECK_THROWS_AS(run_training(exp, d), Error);
  exp = small_experiment(d, mlp(1));
  exp.n_examples = 31;
  CHECK_THROWS_AS(run_training(exp, d), Error);
  exp = small_experiment(d, mlp(1));
  exp.batch_size = 0;
  CHECK_THROWS_AS(validate(exp), Error);
}
