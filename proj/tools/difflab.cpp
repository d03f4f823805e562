// difflab: train replicate runs, compute difficulty scores and analyze their
// stability, correlation structure and architecture sensitivity.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "difflab/cli.hpp"
#include "difflab/error.hpp"

namespace cli = difflab::cli;

int main(int argc, char** argv) {
  CLI::App app{"Example difficulty score analysis"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::size_t workers = 1;
  std::string out_dir;
  std::int64_t seed_offset = 0;
  bool force = false;
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--workers", workers, "Worker threads for per-run jobs")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output root (default: $DIFFLAB_OUT or ./difflab-out)");
  app.add_option("--seed-offset", seed_offset, "Added to every run seed");
  app.add_flag("--force", force, "Rerun stages that are up to date");

  struct Stage {
    const char* name;
    const char* help;
    bool (*run)(const cli::Context&);
  };
  const Stage stages[] = {
      {"train", "Train every configured model for n_runs runs and save traces", cli::cmd_train},
      {"score", "Compute difficulty scores from saved traces", cli::cmd_score},
      {"stability", "Variance bands, rank change and split disagreement", cli::cmd_stability},
      {"corr", "Spearman correlation matrices between scores", cli::cmd_corr},
      {"pca", "PCA of quantile-transformed mean scores", cli::cmd_pca},
      {"bias", "Per-example t-tests between models", cli::cmd_bias},
      {"fingerprint", "Classify architectures from sensitive examples", cli::cmd_fingerprint},
  };
  for (const auto& s : stages) app.add_subcommand(s.name, s.help);

  auto* plot = app.add_subcommand("plot", "Render a tabular artifact as an SVG figure");
  std::string artifact, figure_kind, output;
  plot->add_option("--artifact", artifact, "Tabular artifact")->required();
  plot->add_option("--kind", figure_kind,
                   "heatmap, stability, pca, neglogp, size-ratio, fingerprint or bands")
      ->required();
  plot->add_option("--output", output, "SVG path (default: artifact path with .svg)");

  auto* import = app.add_subcommand("import-scores", "Add a precomputed single-run score");
  std::string import_file, import_name, import_model;
  int polarity = 1;
  import->add_option("--file", import_file, "CSV with header example_id,value")->required();
  import->add_option("--name", import_name, "Score name")->required();
  import->add_option("--polarity", polarity, "+1 if higher means harder, else -1");
  import->add_option("--model", import_model, "Model tag the score belongs to")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (plot->parsed()) {
      std::filesystem::path target = output;
      if (output.empty()) target = std::filesystem::path(artifact).replace_extension(".svg");
      cli::render_figure(artifact, cli::parse_figure_kind(figure_kind), target);
      std::cout << "plot: wrote " << target.string() << '\n';
      return 0;
    }

    difflab::require(!config_path.empty(), "--config is required for this command");
    cli::Context ctx;
    ctx.config = cli::load_config(config_path);
    std::optional<std::filesystem::path> out_flag;
    if (!out_dir.empty()) out_flag = out_dir;
    ctx.root = cli::resolve_output_root(out_flag) / ctx.config.experiment_id;
    ctx.workers = workers;
    ctx.seed_offset = seed_offset;
    ctx.force = force;
    ctx.log = &std::cout;

    if (import->parsed()) {
      cli::cmd_import_scores(ctx, import_file, import_name, polarity, import_model);
      return 0;
    }
    for (const auto& s : stages) {
      if (app.got_subcommand(s.name)) s.run(ctx);
    }
    return 0;
  } catch (const difflab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code(difflab::ErrorKind::kRuntime);
  }
}
