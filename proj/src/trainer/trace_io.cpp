#include <algorithm>

#include <json.hpp>

#include "difflab/error.hpp"
#include "difflab/tabular.hpp"
#include "difflab/trainer.hpp"

namespace difflab {
namespace {

using nlohmann::ordered_json;

std::string header_with_columns(const std::string& prefix, const char* stem, std::size_t count) {
  std::string header = prefix;
  for (std::size_t c = 0; c < count; ++c) header += "," + std::string(stem) + std::to_string(c);
  return header;
}

std::size_t as_index(std::string_view field, const std::string& context, std::size_t bound) {
  const auto value = parse_int(field, context);
  require(value >= 0 && static_cast<std::size_t>(value) < bound,
          context + ": index " + std::string(field) + " out of range");
  return static_cast<std::size_t>(value);
}

}  // namespace

void save_trace(const TraceStore& trace, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::size_t n = trace.n_examples;
  {
    auto out = open_for_write(dir / "eval.csv");
    out << "epoch,example_id,loss,true_prob,max_other_prob,correct\n";
    for (int e = 0; e < trace.epochs; ++e) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& p = trace.eval_at(e, i);
        out << e + 1 << ',' << i << ',' << format_double(p.loss) << ','
            << format_double(p.true_prob) << ',' << format_double(p.max_other_prob) << ','
            << (p.correct ? 1 : 0) << '\n';
      }
    }
  }
  {
    auto out = open_for_write(dir / "minibatch.csv");
    out << "example_id,epoch,correct\n";
    for (std::size_t i = 0; i < n; ++i) {
      const auto series = trace.minibatch_series(i);
      for (std::size_t t = 0; t < series.size(); ++t) {
        out << i << ',' << t + 1 << ',' << static_cast<int>(series[t]) << '\n';
      }
    }
  }
  {
    auto out = open_for_write(dir / "checkpoint.csv");
    out << header_with_columns("example_id,grad_norm", "p", trace.n_classes) << '\n';
    if (!trace.checkpoint_grad_norm.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        out << i << ',' << format_double(trace.checkpoint_grad_norm[i]);
        for (const double p : trace.checkpoint_prob_vector(i)) out << ',' << format_double(p);
        out << '\n';
      }
    }
  }
  {
    auto out = open_for_write(dir / "vog.csv");
    out << header_with_columns("epoch,example_id", "g", trace.input_dim) << '\n';
    for (std::size_t s = 0; s < trace.vog_epochs.size(); ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        out << trace.vog_epochs[s] << ',' << i;
        for (const double g : trace.vog_gradient(s, i)) out << ',' << format_double(g);
        out << '\n';
      }
    }
  }
  ordered_json meta{{"dataset_name", trace.dataset_name},
                    {"model_config",
                     {{"family", family_name(trace.model.family)},
                      {"width_multiplier", trace.model.width_multiplier},
                      {"depth", trace.model.depth},
                      {"param_count", trace.model.param_count}}},
                    {"run_index", trace.run_index},
                    {"seed", trace.seed},
                    {"n_examples", trace.n_examples},
                    {"n_classes", trace.n_classes},
                    {"input_dim", trace.input_dim},
                    {"epochs", trace.epochs},
                    {"checkpoint_epoch", trace.checkpoint_epoch},
                    {"vog_epochs", trace.vog_epochs}};
  auto out = open_for_write(dir / "trace.json");
  out << meta.dump(2) << '\n';
}

TraceStore load_trace(const std::filesystem::path& dir) {
  TraceStore trace;
  {
    auto in = open_for_read(dir / "trace.json");
    ordered_json meta;
    try {
      meta = ordered_json::parse(in);
      trace.dataset_name = meta.at("dataset_name").get<std::string>();
      const auto& m = meta.at("model_config");
      trace.model.family = parse_family(m.at("family").get<std::string>());
      trace.model.width_multiplier = m.at("width_multiplier").get<double>();
      trace.model.depth = m.at("depth").get<int>();
      trace.model.param_count = m.at("param_count").get<std::size_t>();
      trace.run_index = meta.at("run_index").get<std::size_t>();
      trace.seed = meta.at("seed").get<std::int64_t>();
      trace.n_examples = meta.at("n_examples").get<std::size_t>();
      trace.n_classes = meta.at("n_classes").get<std::size_t>();
      trace.input_dim = meta.at("input_dim").get<std::size_t>();
      trace.epochs = meta.at("epochs").get<int>();
      trace.checkpoint_epoch = meta.at("checkpoint_epoch").get<int>();
      trace.vog_epochs = meta.at("vog_epochs").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      fail((dir / "trace.json").string() + ": " + e.what());
    }
  }
  const std::size_t n = trace.n_examples;
  const auto epochs = static_cast<std::size_t>(trace.epochs);
  const std::string where = dir.string();

  {
    const auto rows = read_table(dir / "eval.csv",
                                 "epoch,example_id,loss,true_prob,max_other_prob,correct");
    require(rows.size() == n * epochs, where + "/eval.csv: expected " +
                                           std::to_string(n * epochs) + " rows");
    trace.eval.resize(n * epochs);
    for (const auto& row : rows) {
      const auto f = split_fields(row);
      require(f.size() == 6, where + "/eval.csv: malformed row");
      const auto e = as_index(f[0], where + "/eval.csv", epochs + 1);
      require(e >= 1, where + "/eval.csv: epoch must be >= 1");
      const auto i = as_index(f[1], where + "/eval.csv", n);
      auto& p = trace.eval[(e - 1) * n + i];
      p.loss = parse_double(f[2], "eval.csv");
      p.true_prob = parse_double(f[3], "eval.csv");
      p.max_other_prob = parse_double(f[4], "eval.csv");
      p.correct = parse_int(f[5], "eval.csv") != 0;
    }
  }
  {
    const auto rows = read_table(dir / "minibatch.csv", "example_id,epoch,correct");
    require(rows.size() == n * epochs, where + "/minibatch.csv: expected " +
                                           std::to_string(n * epochs) + " rows");
    trace.minibatch_correct.assign(n * epochs, 0);
    for (const auto& row : rows) {
      const auto f = split_fields(row);
      require(f.size() == 3, where + "/minibatch.csv: malformed row");
      const auto i = as_index(f[0], where + "/minibatch.csv", n);
      const auto t = as_index(f[1], where + "/minibatch.csv", epochs + 1);
      require(t >= 1, where + "/minibatch.csv: epoch must be >= 1");
      trace.minibatch_correct[i * epochs + t - 1] = parse_int(f[2], "minibatch.csv") != 0;
    }
  }
  {
    const auto rows = read_table(dir / "checkpoint.csv",
                                 header_with_columns("example_id,grad_norm", "p", trace.n_classes));
    if (!rows.empty()) {
      require(rows.size() == n, where + "/checkpoint.csv: expected one row per example");
      trace.checkpoint_grad_norm.resize(n);
      trace.checkpoint_probs.resize(n * trace.n_classes);
      for (const auto& row : rows) {
        const auto f = split_fields(row);
        require(f.size() == 2 + trace.n_classes, where + "/checkpoint.csv: malformed row");
        const auto i = as_index(f[0], where + "/checkpoint.csv", n);
        trace.checkpoint_grad_norm[i] = parse_double(f[1], "checkpoint.csv");
        for (std::size_t c = 0; c < trace.n_classes; ++c) {
          trace.checkpoint_probs[i * trace.n_classes + c] = parse_double(f[2 + c], "checkpoint.csv");
        }
      }
    }
  }
  {
    const auto rows = read_table(dir / "vog.csv",
                                 header_with_columns("epoch,example_id", "g", trace.input_dim));
    const std::size_t snapshots = trace.vog_epochs.size();
    require(rows.size() == snapshots * n, where + "/vog.csv: expected " +
                                              std::to_string(snapshots * n) + " rows");
    trace.vog_gradients.assign(snapshots * n * trace.input_dim, 0.0);
    for (const auto& row : rows) {
      const auto f = split_fields(row);
      require(f.size() == 2 + trace.input_dim, where + "/vog.csv: malformed row");
      const auto epoch = parse_int(f[0], "vog.csv");
      const auto it = std::find(trace.vog_epochs.begin(), trace.vog_epochs.end(), epoch);
      require(it != trace.vog_epochs.end(), where + "/vog.csv: unexpected snapshot epoch");
      const auto s = static_cast<std::size_t>(it - trace.vog_epochs.begin());
      const auto i = as_index(f[1], where + "/vog.csv", n);
      for (std::size_t d = 0; d < trace.input_dim; ++d) {
        trace.vog_gradients[(s * n + i) * trace.input_dim + d] = parse_double(f[2 + d], "vog.csv");
      }
    }
  }
  return trace;
}

void save_labels(const LabelSet& labels, const std::filesystem::path& path) {
  validate(labels);
  auto out = open_for_write(path);
  out << "example_id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels.labels[i] << '\n';
}

LabelSet load_labels(const std::filesystem::path& path) {
  const auto rows = read_table(path, "example_id,label");
  LabelSet labels;
  labels.labels.assign(rows.size(), -1);
  int top = -1;
  for (const auto& row : rows) {
    const auto f = split_fields(row);
    require(f.size() == 2, path.string() + ": malformed row");
    const auto i = as_index(f[0], path.string(), rows.size());
    const auto y = parse_int(f[1], path.string());
    require(y >= 0, path.string() + ": negative label");
    labels.labels[i] = static_cast<int>(y);
    top = std::max(top, static_cast<int>(y));
  }
  labels.n_classes = static_cast<std::size_t>(top + 1);
  validate(labels);
  return labels;
}

}  // namespace difflab
