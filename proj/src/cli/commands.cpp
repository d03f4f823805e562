#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "difflab/cli.hpp"
#include "difflab/error.hpp"
#include "difflab/random.hpp"
#include "difflab/stability.hpp"
#include "difflab/tabular.hpp"

namespace difflab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::mutex log_mutex;

void note(const Context& ctx, const std::string& line) {
  if (ctx.log == nullptr) return;
  const std::lock_guard lock(log_mutex);
  *ctx.log << line << '\n';
  ctx.log->flush();
}

// Runs fn(0..n-1) on up to `workers` threads. If any job throws, the error of
// the lowest job index is rethrown with `label(i)` prepended.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn,
                  const std::function<std::string(std::size_t)>& label) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(workers, n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw Error(e.kind(), label(i) + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kRuntime, label(i) + ": " + e.what());
    }
  }
}

struct Stage {
  const Context& ctx;
  std::string name;
  std::string hash;
  bool skip = false;
  std::vector<std::string> artifacts;

  std::string rel(const fs::path& path) const {
    return path.lexically_relative(ctx.root).generic_string();
  }
  fs::path file(const fs::path& relative) {
    const auto path = ctx.root / relative;
    fs::create_directories(path.parent_path());
    artifacts.push_back(relative.generic_string());
    return path;
  }
};

Stage begin_stage(const Context& ctx, const std::string& name,
                  const std::vector<std::string>& upstream) {
  Stage stage{ctx, name, config_digest(ctx.config, ctx.seed_offset), false, {}};
  const auto manifest = load_manifest(ctx.root);
  if (!manifest.experiment_id.empty()) {
    require(manifest.experiment_id == ctx.config.experiment_id,
            "output directory " + ctx.root.string() + " belongs to experiment '" +
                manifest.experiment_id + "'");
  }
  for (const auto& up : upstream) {
    if (!manifest.complete(up, stage.hash, ctx.root)) {
      throw Error(ErrorKind::kMissingArtifact,
                  name + ": " + up + " artifacts for this config are missing or stale; run " + up +
                      " first");
    }
  }
  stage.skip = !ctx.force && manifest.complete(name, stage.hash, ctx.root);
  if (stage.skip) note(ctx, name + ": up to date");
  return stage;
}

void finish_stage(Stage& stage) {
  auto manifest = load_manifest(stage.ctx.root);
  manifest.experiment_id = stage.ctx.config.experiment_id;
  manifest.config_hash = stage.hash;
  std::sort(stage.artifacts.begin(), stage.artifacts.end());
  stage.artifacts.erase(std::unique(stage.artifacts.begin(), stage.artifacts.end()),
                        stage.artifacts.end());
  manifest.stages[stage.name] = StageRecord{stage.hash, stage.artifacts};
  save_manifest(manifest, stage.ctx.root);
  note(stage.ctx, stage.name + ": wrote " + std::to_string(stage.artifacts.size()) + " artifacts");
}

fs::path labels_rel() { return fs::path("dataset") / "labels.csv"; }

fs::path trace_rel(const ModelConfig& model, std::size_t run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", run);
  return fs::path("traces") / model.tag() / buf;
}

fs::path score_rel(const ModelConfig& model, const ScoreKind& kind) {
  return fs::path("scores") / model.tag() / (kind.name() + ".csv");
}

fs::path external_dir(const Context& ctx, const ModelConfig& model) {
  return ctx.root / "scores" / model.tag() / "external";
}

std::vector<ScoreMatrix> load_scores(const Context& ctx, const ModelEntry& entry) {
  std::vector<ScoreMatrix> matrices;
  for (const auto& kind : ctx.config.score_kinds) {
    matrices.push_back(load_matrix(ctx.root / score_rel(entry.model, kind)));
  }
  return matrices;
}

std::vector<ScoreMatrix> load_externals(const Context& ctx, const ModelEntry& entry) {
  std::vector<ScoreMatrix> matrices;
  const auto dir = external_dir(ctx, entry.model);
  if (!fs::exists(dir)) return matrices;
  std::vector<fs::path> files;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (item.path().extension() == ".csv") files.push_back(item.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) matrices.push_back(load_matrix(f));
  return matrices;
}

void write_curve(const fs::path& path, const std::vector<std::pair<std::string, StabilityCurve>>& curves) {
  auto out = open_for_write(path);
  out << "score_kind,k,median_rank_change,p95_rank_change,disagreement\n";
  for (const auto& [name, curve] : curves) {
    for (const auto& p : curve.points) {
      out << name << ',' << p.k << ',' << format_double(p.median_rank_change) << ','
          << format_double(p.p95_rank_change) << ',' << format_double(p.disagreement) << '\n';
    }
  }
}

void write_square(const fs::path& path, const std::vector<ScoreKind>& kinds,
                  const Eigen::MatrixXd& values) {
  auto out = open_for_write(path);
  out << "kind";
  for (const auto& k : kinds) out << ',' << k.name();
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << kinds[static_cast<std::size_t>(i)].name();
    for (Eigen::Index j = 0; j < values.cols(); ++j) out << ',' << format_double(values(i, j));
    out << '\n';
  }
}

void write_ranking(const fs::path& path, const SensitivityRanking& ranking) {
  std::vector<std::size_t> position(ranking.order.size());
  for (std::size_t r = 0; r < ranking.order.size(); ++r) position[ranking.order[r]] = r;
  auto out = open_for_write(path);
  out << "example_id,mean_neglog_p,rank\n";
  for (std::size_t i = 0; i < ranking.mean_neglog_p.size(); ++i) {
    out << i << ',' << format_double(ranking.mean_neglog_p[i]) << ',' << position[i] << '\n';
  }
}

void figure(Stage& stage, const fs::path& artifact_rel, FigureKind kind, const std::string& stem) {
  const auto out = stage.file(fs::path("figures") / (stem + ".svg"));
  render_figure(stage.ctx.root / artifact_rel, kind, out);
}

ordered_json fingerprint_json(const FingerprintModel& m) {
  auto model_json = [](const ModelConfig& c) {
    return ordered_json{{"tag", c.tag()}, {"param_count", c.param_count}};
  };
  return ordered_json{{"score_kind", m.kind.name()},
                      {"model_a", model_json(m.model_a)},
                      {"model_b", model_json(m.model_b)},
                      {"examples", m.examples},
                      {"weights", m.weights},
                      {"intercept", m.intercept},
                      {"feature_mean", m.feature_mean},
                      {"feature_scale", m.feature_scale},
                      {"train_accuracy", m.train_accuracy},
                      {"holdout_accuracy", m.holdout_accuracy},
                      {"iterations", m.iterations},
                      {"train_seeds_a", m.train_seeds_a},
                      {"train_seeds_b", m.train_seeds_b}};
}

std::vector<std::size_t> iota_runs(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> runs(end - begin);
  std::iota(runs.begin(), runs.end(), begin);
  return runs;
}

}  // namespace

bool cmd_train(const Context& ctx) {
  auto stage = begin_stage(ctx, "train", {});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  const Dataset dataset = build_dataset(cfg.dataset);
  note(ctx, "train: dataset '" + dataset.name + "' with " + std::to_string(dataset.size()) +
                " examples, " + std::to_string(dataset.labels.n_classes) + " classes");
  save_labels(dataset.labels, stage.file(labels_rel()));

  const std::size_t n_jobs = cfg.models.size() * cfg.n_runs;
  std::vector<fs::path> trace_files(n_jobs);
  for (std::size_t j = 0; j < n_jobs; ++j) {
    const auto& entry = cfg.models[j / cfg.n_runs];
    trace_files[j] = stage.file(trace_rel(entry.model, j % cfg.n_runs) / "trace.json");
  }
  parallel_for(
      n_jobs, ctx.workers,
      [&](std::size_t j) {
        const auto& entry = cfg.models[j / cfg.n_runs];
        const std::size_t run = j % cfg.n_runs;
        const auto exp = experiment_for(cfg, entry, dataset.size(), ctx.seed_offset);
        const auto trace = run_training(exp, dataset, run);
        save_trace(trace, trace_files[j].parent_path());
        note(ctx, "train: " + entry.model.tag() + " run " + std::to_string(run) + " (seed " +
                      std::to_string(trace.seed) + ") done");
      },
      [&](std::size_t j) {
        return "train " + cfg.models[j / cfg.n_runs].model.tag() + " run " +
               std::to_string(j % cfg.n_runs);
      });
  finish_stage(stage);
  return true;
}

bool cmd_score(const Context& ctx) {
  auto stage = begin_stage(ctx, "score", {"train"});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  const LabelSet labels = load_labels(ctx.root / labels_rel());

  std::vector<ScoreRequest> requests;
  for (const auto& kind : cfg.score_kinds) {
    ScoreRequest request{kind, {}, {}};
    if (kind.id() == ScoreId::kGraNd || kind.id() == ScoreId::kEL2N) {
      request.checkpoint_epoch = cfg.checkpoint_epoch;
    }
    if (kind.id() == ScoreId::kConsistentlyLearned) {
      request.sentinel_never_learned = cfg.sentinel_never_learned;
    }
    requests.push_back(request);
  }

  for (const auto& entry : cfg.models) {
    std::vector<std::vector<ScoreMatrix>> per_run(cfg.n_runs);
    parallel_for(
        cfg.n_runs, ctx.workers,
        [&](std::size_t r) {
          const auto trace = load_trace(ctx.root / trace_rel(entry.model, r));
          for (const auto& request : requests) {
            try {
              per_run[r].push_back(compute_score(trace, labels, request, cfg.score_options));
            } catch (const Error& e) {
              throw Error(e.kind(), request.kind.name() + ": " + e.what());
            }
          }
        },
        [&](std::size_t r) { return "score " + entry.model.tag() + " run " + std::to_string(r); });
    for (std::size_t s = 0; s < requests.size(); ++s) {
      std::vector<ScoreMatrix> parts;
      for (auto& run : per_run) parts.push_back(std::move(run[s]));
      const auto matrix = concat_runs(parts);
      save_matrix(matrix, stage.file(score_rel(entry.model, requests[s].kind)));
      stage.artifacts.push_back(stage.rel(metadata_path(ctx.root / score_rel(entry.model, requests[s].kind))));
    }
    note(ctx, "score: " + entry.model.tag() + " done");
  }
  finish_stage(stage);
  return true;
}

bool cmd_stability(const Context& ctx) {
  auto stage = begin_stage(ctx, "stability", {"score"});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  for (const auto& entry : cfg.models) {
    const auto tag = entry.model.tag();
    const auto matrices = load_scores(ctx, entry);
    std::vector<std::pair<std::string, StabilityCurve>> curves;
    for (const auto& m : matrices) {
      curves.emplace_back(m.kind.name(), stability_curve(m, cfg.stability_ks, cfg.trials,
                                                          cfg.percentile, cfg.analysis_seed));
      const auto bands = confidence_bands(m, cfg.bin_size, cfg.ci_level);
      const auto bands_rel = fs::path("stability") / tag / ("bands_" + m.kind.name() + ".csv");
      {
        auto out = open_for_write(stage.file(bands_rel));
        out << "bin,position,lower,mean,upper\n";
        for (std::size_t b = 0; b < bands.bins.size(); ++b) {
          const auto& bin = bands.bins[b];
          out << b << ',' << format_double(bin.position) << ',' << format_double(bin.lower) << ','
              << format_double(bin.mean) << ',' << format_double(bin.upper) << '\n';
        }
      }
      figure(stage, bands_rel, FigureKind::kBands, "bands_" + tag + "_" + m.kind.name());
    }
    const auto curve_rel = fs::path("stability") / tag / "curve.csv";
    write_curve(stage.file(curve_rel), curves);
    figure(stage, curve_rel, FigureKind::kStability, "stability_" + tag);
    note(ctx, "stability: " + tag + " done");
  }
  finish_stage(stage);
  return true;
}

bool cmd_corr(const Context& ctx) {
  auto stage = begin_stage(ctx, "corr", {"score"});
  if (stage.skip) return false;
  for (const auto& entry : ctx.config.models) {
    const auto tag = entry.model.tag();
    auto matrices = load_scores(ctx, entry);
    for (auto& external : load_externals(ctx, entry)) matrices.push_back(std::move(external));
    const auto report = correlation_report(matrices);
    const std::pair<const char*, const Eigen::MatrixXd*> tables[] = {
        {"mean_to_mean", &report.mean_to_mean},
        {"mean_to_run_delta", &report.mean_to_run_delta},
        {"run_to_run_delta", &report.run_to_run_delta}};
    for (const auto& [name, values] : tables) {
      const auto rel = fs::path("corr") / tag / (std::string(name) + ".csv");
      write_square(stage.file(rel), report.kinds, *values);
      figure(stage, rel, FigureKind::kHeatmap, "corr_" + tag + "_" + name);
    }
    note(ctx, "corr: " + tag + " done");
  }
  finish_stage(stage);
  return true;
}

bool cmd_pca(const Context& ctx) {
  auto stage = begin_stage(ctx, "pca", {"score"});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  require(cfg.score_kinds.size() >= 2, "pca needs at least two score kinds");
  for (const auto& entry : cfg.models) {
    const auto tag = entry.model.tag();
    const auto matrices = load_scores(ctx, entry);
    std::vector<ScoreVector> means;
    for (const auto& m : matrices) means.push_back(mean_over_runs(m));
    const auto pca = pca_of_transformed(means);

    const auto loadings_rel = fs::path("pca") / tag / "loadings.csv";
    {
      auto out = open_for_write(stage.file(loadings_rel));
      out << "component,eigenvalue,explained_variance_ratio";
      for (const auto& k : pca.kinds) out << ',' << k.name();
      out << '\n';
      for (Eigen::Index c = 0; c < pca.loadings.rows(); ++c) {
        out << c + 1 << ',' << format_double(pca.eigenvalues(c)) << ','
            << format_double(pca.explained_variance_ratio(c));
        for (Eigen::Index j = 0; j < pca.loadings.cols(); ++j) out << ',' << format_double(pca.loadings(c, j));
        out << '\n';
      }
    }
    figure(stage, loadings_rel, FigureKind::kPca, "pca_" + tag);

    ScoreMatrix pc1;
    pc1.kind = pc1_kind();
    pc1.model = matrices.front().model;
    pc1.dataset_name = matrices.front().dataset_name;
    pc1.n_examples = pca.pc1_scores.size();
    pc1.n_runs = 1;
    pc1.values = pca.pc1_scores.values;
    pc1.run_seeds = {0};
    const auto pc1_rel = fs::path("pca") / tag / "pc1.csv";
    save_matrix(pc1, stage.file(pc1_rel));
    stage.artifacts.push_back(stage.rel(metadata_path(ctx.root / pc1_rel)));

    const auto curve = pc1_stability(matrices, cfg.stability_ks, cfg.trials, cfg.percentile,
                                     cfg.analysis_seed, cfg.pc1_fit);
    const auto curve_rel = fs::path("pca") / tag / "pc1_stability.csv";
    write_curve(stage.file(curve_rel), {{pc1_kind().name(), curve}});
    figure(stage, curve_rel, FigureKind::kStability, "pc1_stability_" + tag);
    note(ctx, "pca: " + tag + " done");
  }
  finish_stage(stage);
  return true;
}

bool cmd_bias(const Context& ctx) {
  auto stage = begin_stage(ctx, "bias", {"score"});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  require(cfg.models.size() >= 2, "bias needs at least two configured models");

  std::vector<std::vector<ScoreMatrix>> scores;
  for (const auto& entry : cfg.models) scores.push_back(load_scores(ctx, entry));

  std::vector<TTestReport> all_reports;
  std::vector<ModelPairSignificance> pair_rows;
  const auto pairs_rel = fs::path("bias") / "pairs.csv";
  auto pairs_out = open_for_write(stage.file(pairs_rel));
  pairs_out << "model_a,model_b,score_kind,n_significant,mean_neglog_p\n";
  for (std::size_t a = 0; a < cfg.models.size(); ++a) {
    for (std::size_t b = a + 1; b < cfg.models.size(); ++b) {
      const auto& ma = scores[a].front().model;
      const auto& mb = scores[b].front().model;
      const auto pair_dir = fs::path("bias") / (ma.tag() + "__vs__" + mb.tag());
      double pair_sum = 0.0;
      for (std::size_t s = 0; s < cfg.score_kinds.size(); ++s) {
        const auto report = ttest_per_example(scores[a][s], scores[b][s], cfg.ttest_variant);
        const auto rel = pair_dir / (report.kind.name() + ".csv");
        {
          auto out = open_for_write(stage.file(rel));
          out << "example_id,t_statistic,p_value,mean_difference\n";
          for (std::size_t i = 0; i < report.size(); ++i) {
            out << i << ',' << format_double(report.t_statistic[i]) << ','
                << format_double(report.p_value[i]) << ','
                << format_double(report.mean_difference[i]) << '\n';
          }
        }
        figure(stage, rel, FigureKind::kNegLogP,
               "neglogp_" + ma.tag() + "__vs__" + mb.tag() + "_" + report.kind.name());
        double sum = 0.0;
        for (const double p : report.p_value) sum += neglog10(p);
        const double mean_neglog = sum / static_cast<double>(report.size());
        pair_sum += mean_neglog;
        const auto n_sig =
            count_significant(report, bonferroni_threshold(cfg.alpha, report.size()));
        pairs_out << ma.tag() << ',' << mb.tag() << ',' << report.kind.name() << ',' << n_sig << ','
                  << format_double(mean_neglog) << '\n';
        all_reports.push_back(report);
      }
      pair_rows.push_back({ma, mb, pair_sum / static_cast<double>(cfg.score_kinds.size())});
    }
  }
  pairs_out.close();

  write_ranking(stage.file(fs::path("bias") / "sensitivity.csv"),
                aggregate_significance(all_reports));

  const auto ratio_rel = fs::path("bias") / "size_ratio.csv";
  {
    auto out = open_for_write(stage.file(ratio_rel));
    out << "model_a,model_b,param_count_a,param_count_b,size_ratio,mean_neglog_p\n";
    for (const auto& row : size_ratio_significance(pair_rows)) {
      out << row.model_a.tag() << ',' << row.model_b.tag() << ',' << row.model_a.param_count << ','
          << row.model_b.param_count << ',' << format_double(row.size_ratio) << ','
          << format_double(row.mean_neglog_p) << '\n';
    }
  }
  figure(stage, ratio_rel, FigureKind::kSizeRatio, "size_ratio");
  finish_stage(stage);
  return true;
}

bool cmd_fingerprint(const Context& ctx) {
  auto stage = begin_stage(ctx, "fingerprint", {"score"});
  if (stage.skip) return false;
  const auto& cfg = ctx.config;
  require(!cfg.fingerprint_model_b.empty(), "fingerprint needs two models (fingerprint.model_b)");
  require(cfg.fingerprint_model_a != cfg.fingerprint_model_b,
          "fingerprint.model_a and fingerprint.model_b must differ");
  const auto& entry_a = cfg.model_by_tag(cfg.fingerprint_model_a);
  const auto& entry_b = cfg.model_by_tag(cfg.fingerprint_model_b);
  const std::size_t n_train = cfg.fingerprint_train_runs;
  require(n_train >= 2 && n_train < cfg.n_runs,
          "fingerprint.train_runs (" + std::to_string(n_train) +
              ") must leave held-out runs: need 2 <= train_runs < training.n_runs (" +
              std::to_string(cfg.n_runs) + ")");
  const auto train = iota_runs(0, n_train);
  const auto holdout = iota_runs(n_train, cfg.n_runs);

  const auto a = load_scores(ctx, entry_a);
  const auto b = load_scores(ctx, entry_b);

  // Sensitivity ranking from the training runs only; held-out runs stay unseen.
  std::vector<TTestReport> reports;
  for (std::size_t s = 0; s < a.size(); ++s) {
    reports.push_back(ttest_per_example(select_runs(a[s], train), select_runs(b[s], train),
                                        cfg.ttest_variant));
  }
  const auto ranking = aggregate_significance(reports);
  write_ranking(stage.file(fs::path("fingerprint") / "ranking.csv"), ranking);

  const std::pair<SelectionMode, const char*> modes[] = {
      {SelectionMode::kTop, "top"}, {SelectionMode::kBottom, "bottom"}, {SelectionMode::kRandom, "random"}};
  const auto table_rel = fs::path("fingerprint") / "accuracy.csv";
  auto table = open_for_write(stage.file(table_rel));
  table << "score_kind,mode,k,holdout_accuracy,train_accuracy\n";
  const std::size_t n_examples = a.front().n_examples;
  for (const auto& [mode, mode_name] : modes) {
    ordered_json models = ordered_json::array();
    for (const auto k : cfg.fingerprint_ks) {
      if (k > n_examples) continue;
      for (std::size_t s = 0; s < a.size(); ++s) {
        const std::size_t draws = mode == SelectionMode::kRandom ? cfg.fingerprint_random_draws : 1;
        double holdout_sum = 0.0, train_sum = 0.0;
        for (std::size_t d = 0; d < draws; ++d) {
          const auto examples =
              select_fingerprint_examples(ranking, k, mode, derive_seed(cfg.analysis_seed, d));
          auto model = fit_fingerprint(examples, a[s], train, b[s], train, cfg.fingerprint_options);
          model.holdout_accuracy = evaluate_fingerprint(model, a[s], holdout, b[s], holdout);
          holdout_sum += model.holdout_accuracy;
          train_sum += model.train_accuracy;
          if (k == cfg.fingerprint_k && d == 0) models.push_back(fingerprint_json(model));
        }
        table << a[s].kind.name() << ',' << mode_name << ',' << k << ','
              << format_double(holdout_sum / static_cast<double>(draws)) << ','
              << format_double(train_sum / static_cast<double>(draws)) << '\n';
      }
    }
    auto out = open_for_write(stage.file(fs::path("fingerprint") / (std::string("model_") + mode_name + ".json")));
    out << models.dump(2) << '\n';
  }
  table.close();
  figure(stage, table_rel, FigureKind::kFingerprint, "fingerprint_accuracy");
  finish_stage(stage);
  return true;
}

void cmd_import_scores(const Context& ctx, const fs::path& file, const std::string& name,
                       int polarity, const std::string& model_tag) {
  require(polarity == 1 || polarity == -1, "polarity must be +1 or -1");
  require(!name.empty() && name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-") ==
                               std::string::npos,
          "score name '" + name + "' must use letters, digits, '_' or '-'");
  for (const auto& kind : computed_score_kinds()) {
    require(kind.name() != name, "score name '" + name + "' collides with a computed score");
  }
  const auto& entry = ctx.config.model_by_tag(model_tag);
  auto matrix = import_external_scores(file, name, polarity);
  matrix.model = entry.model;
  matrix.dataset_name = ctx.config.dataset.name;
  const auto labels_path = ctx.root / labels_rel();
  if (fs::exists(labels_path)) {
    const auto labels = load_labels(labels_path);
    require(labels.size() == matrix.n_examples,
            file.string() + ": has " + std::to_string(matrix.n_examples) +
                " examples but the dataset has " + std::to_string(labels.size()));
  }
  const auto dir = external_dir(ctx, entry.model);
  fs::create_directories(dir);
  save_matrix(matrix, dir / (name + ".csv"));

  auto manifest = load_manifest(ctx.root);
  if (manifest.stages.erase("corr") > 0) save_manifest(manifest, ctx.root);
  note(ctx, "import-scores: " + name + " added for " + model_tag + "; rerun corr to include it");
}

}  // namespace difflab::cli
