#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "difflab/core.hpp"
#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "test_util.hpp"

using namespace difflab;
using testutil::make_matrix;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("polarity table") {
  CHECK(ScoreKind::builtin(ScoreId::kMeanLoss).polarity() == 1);
  CHECK(ScoreKind::builtin(ScoreId::kMeanAccuracy).polarity() == -1);
  CHECK(ScoreKind::builtin(ScoreId::kAreaUnderMargin).polarity() == -1);
  CHECK(ScoreKind::builtin(ScoreId::kForgetting).polarity() == 1);
  CHECK(ScoreKind::builtin(ScoreId::kConsistentlyLearned).polarity() == 1);
  CHECK(ScoreKind::builtin(ScoreId::kGraNd).polarity() == 1);
  CHECK(ScoreKind::builtin(ScoreId::kEL2N).polarity() == 1);
  CHECK(ScoreKind::builtin(ScoreId::kVoG).polarity() == 1);
  CHECK(computed_score_kinds().size() == 8);
}

TEST_CASE("score kind names round trip through parse") {
  for (const auto& kind : computed_score_kinds()) {
    CHECK(ScoreKind::parse(kind.name()) == kind);
  }
  CHECK_THROWS_AS(ScoreKind::parse("Entropy"), Error);
  const auto ext = ScoreKind::external("agreement", -1);
  CHECK(ext.is_external());
  CHECK(ext.name() == "agreement");
  CHECK(ext.polarity() == -1);
  CHECK_THROWS_AS(ScoreKind::external("", 1), Error);
  CHECK_THROWS_AS(ScoreKind::external("x", 0), Error);
}

TEST_CASE("polarity canonicalization is an involution") {
  Rng rng(5);
  for (const auto& kind : computed_score_kinds()) {
    for (int i = 0; i < 50; ++i) {
      const double v = rng.normal(0.0, 10.0);
      CHECK(kind.canonicalize(kind.canonicalize(v)) == v);
    }
  }
}

TEST_CASE("width multiplier parsing") {
  CHECK(parse_width_multiplier("1") == 1.0);
  CHECK(parse_width_multiplier("0.25") == 0.25);
  CHECK(parse_width_multiplier("1/4") == 0.25);
  CHECK_THROWS_AS(parse_width_multiplier("0"), Error);
  CHECK_THROWS_AS(parse_width_multiplier("1/0"), Error);
  CHECK_THROWS_AS(parse_width_multiplier("wide"), Error);
}

TEST_CASE("model tags and family names") {
  ModelConfig m;
  m.family = ModelFamily::kCnn;
  m.width_multiplier = 0.25;
  m.depth = 2;
  CHECK(parse_family(family_name(ModelFamily::kMlp)) == ModelFamily::kMlp);
  CHECK(parse_family("cnn") == ModelFamily::kCnn);
  CHECK_THROWS_AS(parse_family("resnet"), Error);
  CHECK(m.tag().find("cnn") == 0);
  ModelConfig other = m;
  other.param_count = 99;
  CHECK(m.same_architecture(other));
}

TEST_CASE("2x2 matrix save and reload") {
  testutil::TempDir dir("core");
  auto m = make_matrix({{1, 2}, {3, 4}});
  m.checkpoint_epoch = 3;
  const auto path = dir / "m.csv";
  save_matrix(m, path);
  const auto text = testutil::read_text(path);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);  // header + 4 rows
  const auto back = load_matrix(path);
  CHECK(back.values == m.values);
  CHECK(back.n_examples == 2);
  CHECK(back.n_runs == 2);
  CHECK(back.kind == m.kind);
  CHECK(back.run_seeds == m.run_seeds);
  CHECK(back.checkpoint_epoch == 3);
}

TEST_CASE("data row count is N times R") {
  testutil::TempDir dir("core");
  for (std::size_t n : {1u, 3u, 7u}) {
    for (std::size_t r : {1u, 2u, 5u}) {
      const auto m = testutil::noisy_matrix(n, r, 1.0, n * 10 + r);
      const auto path = dir / ("m" + std::to_string(n) + "_" + std::to_string(r) + ".csv");
      save_matrix(m, path);
      const auto text = testutil::read_text(path);
      std::size_t lines = 0;
      for (char c : text) lines += c == '\n';
      CHECK(lines - 1 == n * r);
    }
  }
}

TEST_CASE("round trip is the identity on random finite matrices") {
  testutil::TempDir dir("core");
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(12), r = 1 + rng.below(5);
    auto m = testutil::noisy_matrix(n, r, 1.0 + rng.uniform(), rng.next_u64(),
                                    computed_score_kinds()[rng.below(8)]);
    for (auto& v : m.values) v *= std::pow(10.0, rng.uniform(-30, 30));
    const auto path = dir / "rt.csv";
    save_matrix(m, path);
    const auto back = load_matrix(path);
    CHECK(back.values == m.values);
    CHECK(back.kind == m.kind);
  }
}

TEST_CASE("non-finite value is rejected") {
  testutil::TempDir dir("core");
  auto m = make_matrix({{1, 2}, {3, std::numeric_limits<double>::quiet_NaN()}});
  const auto msg = error_of([&] { save_matrix(m, dir / "nan.csv"); });
  CHECK(msg.find("non-finite value at (1, 1)") != std::string::npos);
}

TEST_CASE("load errors") {
  testutil::TempDir dir("core");
  const auto path = dir / "m.csv";
  save_matrix(make_matrix({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {1, 1, 1}}), path);
  const auto original = testutil::read_text(path);

  SUBCASE("duplicate cell") {
    testutil::write_text(path, original + "3,1,5\n");
    CHECK(error_of([&] { load_matrix(path); }).find("duplicate cell (example 3, run 1)") !=
          std::string::npos);
  }
  SUBCASE("missing cell") {
    std::string text;
    std::istringstream in(original);
    for (std::string line; std::getline(in, line);) {
      if (line.rfind("2,2,", 0) != 0) text += line + "\n";
    }
    testutil::write_text(path, text);
    CHECK(error_of([&] { load_matrix(path); }).find("missing cell (example 2, run 2)") !=
          std::string::npos);
  }
  SUBCASE("missing file") {
    try {
      load_matrix(dir / "absent.csv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMissingArtifact);
    }
  }
  SUBCASE("bad header") {
    testutil::write_text(path, "id,run,value\n0,0,1\n");
    CHECK_THROWS_AS(load_matrix(path), Error);
  }
}

TEST_CASE("external import") {
  testutil::TempDir dir("core");
  std::string text = "example_id,value\n";
  for (int i = 0; i < 10; ++i) text += std::to_string(i) + "," + std::to_string(i / 10.0) + "\n";
  testutil::write_text(dir / "ext.csv", text);

  const auto m = import_external_scores(dir / "ext.csv", "agreement", -1);
  CHECK(m.n_examples == 10);
  CHECK(m.n_runs == 1);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(m.canonical(i, 0) == doctest::Approx(-static_cast<double>(i) / 10.0));
  }

  std::string gap = "example_id,value\n";
  for (int i = 0; i < 10; ++i) {
    if (i != 7) gap += std::to_string(i) + ",0.5\n";
  }
  testutil::write_text(dir / "gap.csv", gap);
  CHECK(error_of([&] { import_external_scores(dir / "gap.csv", "agreement", 1); })
            .find("example 7 is missing") != std::string::npos);
}

TEST_CASE("computed kinds must be dense, externals may be single-run") {
  auto m = make_matrix({{1}, {2}});
  CHECK_NOTHROW(validate(m));
  m.kind = ScoreKind::external("x", 1);
  CHECK_NOTHROW(validate(m));
  m.values.pop_back();
  CHECK_THROWS_AS(validate(m), Error);
}

TEST_CASE("mean over runs") {
  const auto m = make_matrix({{1, 2, 3}, {4, 4, 4}});
  CHECK(mean_over_runs(m).values == std::vector<double>{2, 4});
  const std::size_t one[] = {1};
  CHECK(mean_over_runs(m, one).values == m.run_column(1));

  auto acc = make_matrix({{0.8}}, ScoreKind::builtin(ScoreId::kMeanAccuracy));
  CHECK(mean_over_runs(acc).values[0] == -0.8);
  CHECK(run_vector(acc, 0).values[0] == -0.8);
  CHECK_THROWS_AS(mean_over_runs(m, std::span<const std::size_t>{}), Error);
}

TEST_CASE("mean over runs is linear") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(10), r = 1 + rng.below(6);
    const auto x = testutil::noisy_matrix(n, r, 1.0, rng.next_u64());
    const auto y = testutil::noisy_matrix(n, r, 1.0, rng.next_u64());
    const double a = rng.normal(), b = rng.normal();
    auto z = x;
    for (std::size_t i = 0; i < z.values.size(); ++i) z.values[i] = a * x.values[i] + b * y.values[i];
    const auto mx = mean_over_runs(x), my = mean_over_runs(y), mz = mean_over_runs(z);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(mz.values[i] == doctest::Approx(a * mx.values[i] + b * my.values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("select and concatenate runs") {
  const auto m = make_matrix({{1, 2, 3}, {4, 5, 6}});
  const std::size_t pick[] = {2, 0};
  const auto s = select_runs(m, pick);
  CHECK(s.n_runs == 2);
  CHECK(s.values == std::vector<double>{3, 1, 6, 4});
  CHECK(s.run_seeds == std::vector<std::int64_t>{2, 0});

  const std::size_t first[] = {0}, rest[] = {1, 2};
  const ScoreMatrix parts[] = {select_runs(m, first), select_runs(m, rest)};
  const auto joined = concat_runs(parts);
  CHECK(joined.values == m.values);
  CHECK(joined.run_seeds == m.run_seeds);

  auto other = m;
  other.kind = ScoreKind::builtin(ScoreId::kVoG);
  const ScoreMatrix mismatched[] = {m, other};
  CHECK_THROWS_AS(concat_runs(mismatched), Error);
}

TEST_CASE("rank examples") {
  const double a[] = {0.1, 0.3, 0.2};
  CHECK(rank_examples(a) == std::vector<double>{0, 2, 1});
  const double ties[] = {7, 7, 7, 7};
  CHECK(rank_examples(ties) == std::vector<double>{1.5, 1.5, 1.5, 1.5});
  const double rev[] = {0.2, 0.3, 0.1};
  CHECK(rank_examples(rev) == std::vector<double>{1, 2, 0});
}

TEST_CASE("rank properties on random vectors") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> v(n);
    const bool discrete = trial % 2 == 0;
    for (auto& x : v) x = discrete ? static_cast<double>(rng.below(4)) : rng.normal();
    const auto ranks = rank_examples(v);
    const double sum = std::accumulate(ranks.begin(), ranks.end(), 0.0);
    CHECK(sum == doctest::Approx(n * (n - 1) / 2.0));
    if (!discrete) {
      auto sorted = ranks;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t i = 0; i < n; ++i) CHECK(sorted[i] == static_cast<double>(i));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (v[i] < v[j]) CHECK(ranks[i] < ranks[j]);
        if (v[i] == v[j]) CHECK(ranks[i] == ranks[j]);
      }
    }
  }
}
