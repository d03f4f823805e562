#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "difflab/cli.hpp"
#include "difflab/error.hpp"
#include "difflab/tabular.hpp"

namespace difflab::cli {
namespace {

using nlohmann::json;

// Typed access to one JSON object that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    require(node_.is_object(), path_ + ": expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key) && !node_.at(key).is_null(); }

  void mark(const std::string& key) { seen_.insert(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return node_.at(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) return Section(empty_, field(key));
    return Section(node_.at(key), field(key));
  }

  std::string text(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    require(v.is_string(), field(key) + ": expected a string");
    return v.get<std::string>();
  }

  double number(const std::string& key, double fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    require(v.is_number(), field(key) + ": expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    require(v.is_number_integer(), field(key) + ": expected an integer");
    return v.get<std::int64_t>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) {
    const auto v = integer(key, static_cast<std::int64_t>(fallback));
    require(v >= 0, field(key) + ": must not be negative");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key, bool fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    require(v.is_boolean(), field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::vector<std::size_t> counts(const std::string& key, std::vector<std::size_t> fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    const auto& v = node_.at(key);
    require(v.is_array(), field(key) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& item : v) {
      require(item.is_number_integer() && item.get<std::int64_t>() > 0,
              field(key) + ": expected positive integers");
      out.push_back(item.get<std::size_t>());
    }
    return out;
  }

  std::string field(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      require(seen_.count(key) > 0, path_ + ": unknown key '" + key + "'");
    }
  }

 private:
  static inline const json empty_ = json::object();
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string line_diagnostic(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

DatasetConfig parse_dataset(Section s) {
  DatasetConfig d;
  const auto source = s.text("source", "synthetic");
  d.name = s.text("name", source == "synthetic" ? "synthetic" : "images");
  d.n_classes = s.count("n_classes", 10);
  if (source == "synthetic") {
    d.source = DatasetSource::kSynthetic;
    d.synthetic.n_examples = s.count("n_examples", d.synthetic.n_examples);
    d.synthetic.n_classes = d.n_classes;
    d.synthetic.image_size = s.count("image_size", d.synthetic.image_size);
    d.synthetic.noise = s.number("noise", d.synthetic.noise);
    d.synthetic.max_mix = s.number("max_mix", d.synthetic.max_mix);
    d.synthetic.label_noise = s.number("label_noise", d.synthetic.label_noise);
    d.synthetic.seed = static_cast<std::uint64_t>(s.integer("seed", 0));
  } else if (source == "image_binary") {
    d.source = DatasetSource::kImageBinary;
    const auto& files = s.raw("files");
    require(files.is_array() && !files.empty(), s.field("files") + ": expected a non-empty array");
    for (const auto& f : files) {
      require(f.is_string(), s.field("files") + ": expected file paths");
      d.files.emplace_back(f.get<std::string>());
    }
    d.limit = s.count("limit", d.limit);
  } else {
    fail(s.field("source") + ": unknown dataset source '" + source +
         "' (expected synthetic or image_binary)");
  }
  s.finish();
  return d;
}

double parse_width(Section& s) {
  s.mark("width");
  if (!s.has("width")) return 1.0;
  const auto& v = s.raw("width");
  if (v.is_number()) return v.get<double>();
  require(v.is_string(), s.field("width") + ": expected a number or a fraction such as \"1/4\"");
  return parse_width_multiplier(v.get<std::string>());
}

}  // namespace

const ModelEntry& PipelineConfig::model_by_tag(const std::string& tag) const {
  for (const auto& entry : models) {
    if (entry.model.tag() == tag) return entry;
  }
  fail("no configured model has tag '" + tag + "'");
}

PipelineConfig parse_config(std::string_view text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    const auto pos = what.find("syntax error");
    fail(origin + ": " + line_diagnostic(text, e.byte) + ": " +
         (pos == std::string::npos ? what : what.substr(pos)));
  }

  PipelineConfig c;
  Section top(doc, origin);
  c.experiment_id = top.text("experiment_id", "");
  require(!c.experiment_id.empty(), origin + ".experiment_id: required");
  require(c.experiment_id.find_first_of("/\\") == std::string::npos && c.experiment_id != "." &&
              c.experiment_id != "..",
          origin + ".experiment_id: must be a plain name");
  c.analysis_seed = static_cast<std::uint64_t>(top.integer("seed", 0));
  c.dataset = parse_dataset(top.child("dataset"));

  auto training = top.child("training");
  c.n_runs = training.count("n_runs", c.n_runs);
  c.epochs = static_cast<int>(training.integer("epochs", c.epochs));
  c.batch_size = training.count("batch_size", c.batch_size);
  const double default_lr = training.number("learning_rate", 0.1);
  c.checkpoint_epoch = static_cast<int>(
      training.integer("checkpoint_epoch", std::max(1, (c.epochs + 7) / 8)));
  c.vog_interval = static_cast<int>(training.integer("vog_interval", c.vog_interval));
  const auto target = training.text("vog_target", "loss");
  require(target == "loss" || target == "true_logit",
          training.field("vog_target") + ": expected loss or true_logit");
  c.vog_target = target == "loss" ? VogTarget::kLoss : VogTarget::kTrueLogit;
  training.finish();

  require(c.n_runs >= 1, origin + ".training.n_runs: must be at least 1");
  require(c.epochs >= 1, origin + ".training.epochs: must be positive");
  require(c.batch_size >= 1, origin + ".training.batch_size: must be positive");
  require(c.checkpoint_epoch >= 1, origin + ".training.checkpoint_epoch: must be positive");
  require(c.checkpoint_epoch <= c.epochs,
          origin + ".training.checkpoint_epoch (" + std::to_string(c.checkpoint_epoch) +
              ") exceeds training.epochs (" + std::to_string(c.epochs) + ")");
  require(c.vog_interval >= 1, origin + ".training.vog_interval: must be positive");
  require(c.epochs / c.vog_interval >= 2, origin + ".training.vog_interval (" +
                                              std::to_string(c.vog_interval) +
                                              ") leaves fewer than two VoG snapshots in " +
                                              std::to_string(c.epochs) + " epochs");

  require(top.has("models"), origin + ".models: required");
  const auto& models = top.raw("models");
  require(models.is_array() && !models.empty(), origin + ".models: expected a non-empty array");
  for (std::size_t m = 0; m < models.size(); ++m) {
    Section s(models[m], origin + ".models[" + std::to_string(m) + "]");
    ModelEntry entry;
    entry.model.family = parse_family(s.text("family", "mlp"));
    entry.model.width_multiplier = parse_width(s);
    require(entry.model.width_multiplier > 0.0 && std::isfinite(entry.model.width_multiplier),
            s.field("width") + ": must be positive");
    entry.model.depth = static_cast<int>(s.integer("depth", 1));
    require(entry.model.depth >= 1, s.field("depth") + ": must be positive");
    entry.learning_rate = s.number("learning_rate", default_lr);
    require(entry.learning_rate > 0.0, s.field("learning_rate") + ": must be positive");
    entry.base_seed = s.integer("seed", static_cast<std::int64_t>(1000 * m));
    s.finish();
    for (const auto& other : c.models) {
      require(!other.model.same_architecture(entry.model),
              origin + ".models: duplicate architecture " + entry.model.tag());
    }
    c.models.push_back(entry);
  }

  auto scores = top.child("scores");
  if (scores.has("kinds")) {
    const auto& kinds = scores.raw("kinds");
    require(kinds.is_array() && !kinds.empty(), scores.field("kinds") + ": expected names");
    for (const auto& k : kinds) {
      require(k.is_string(), scores.field("kinds") + ": expected names");
      const auto kind = ScoreKind::parse(k.get<std::string>());
      require(std::find(c.score_kinds.begin(), c.score_kinds.end(), kind) == c.score_kinds.end(),
              scores.field("kinds") + ": duplicate " + kind.name());
      c.score_kinds.push_back(kind);
    }
  } else {
    scores.mark("kinds");
    c.score_kinds = computed_score_kinds();
  }
  const auto series = scores.text("learned_series", "minibatch");
  require(series == "minibatch" || series == "epoch_eval",
          scores.field("learned_series") + ": expected minibatch or epoch_eval");
  c.score_options.learned_series =
      series == "minibatch" ? LearnedSeries::kMinibatch : LearnedSeries::kEpochEval;
  c.score_options.vog_class_normalize = scores.flag("vog_class_normalize", false);
  if (scores.has("sentinel_never_learned")) {
    c.sentinel_never_learned = scores.number("sentinel_never_learned", 0.0);
  } else {
    scores.mark("sentinel_never_learned");
  }
  scores.finish();

  auto stability = top.child("stability");
  c.stability_ks = stability.counts("ks", c.stability_ks);
  c.trials = stability.count("trials", c.trials);
  c.percentile = stability.number("percentile", c.percentile);
  c.bin_size = stability.count("bin_size", c.bin_size);
  c.ci_level = stability.number("ci_level", c.ci_level);
  const auto fit = stability.text("pc1_fit", "per_subset");
  require(fit == "per_subset" || fit == "full_data",
          stability.field("pc1_fit") + ": expected per_subset or full_data");
  c.pc1_fit = fit == "per_subset" ? Pc1Fit::kPerSubset : Pc1Fit::kFullData;
  stability.finish();
  require(!c.stability_ks.empty(), origin + ".stability.ks: must not be empty");
  for (const auto k : c.stability_ks) {
    require(2 * k <= c.n_runs, origin + ".stability.ks: k = " + std::to_string(k) +
                                   " needs 2k <= training.n_runs (" + std::to_string(c.n_runs) + ")");
  }
  require(c.trials >= 1, origin + ".stability.trials: must be positive");
  require(c.percentile > 0.0 && c.percentile < 1.0, origin + ".stability.percentile: must be in (0, 1)");
  require(c.bin_size >= 1, origin + ".stability.bin_size: must be positive");
  require(c.ci_level >= 0.0 && c.ci_level < 1.0, origin + ".stability.ci_level: must be in [0, 1)");

  auto bias = top.child("bias");
  const auto variant = bias.text("variant", "welch");
  require(variant == "welch" || variant == "pooled", bias.field("variant") + ": expected welch or pooled");
  c.ttest_variant = variant == "welch" ? TTestVariant::kWelch : TTestVariant::kPooled;
  c.alpha = bias.number("alpha", c.alpha);
  require(c.alpha > 0.0 && c.alpha < 1.0, bias.field("alpha") + ": must be in (0, 1)");
  bias.finish();

  auto fp = top.child("fingerprint");
  c.fingerprint_model_a = fp.text("model_a", c.models.front().model.tag());
  c.fingerprint_model_b =
      fp.text("model_b", c.models.size() > 1 ? c.models[1].model.tag() : std::string());
  c.fingerprint_train_runs = fp.count("train_runs", c.n_runs / 2);
  c.fingerprint_k = fp.count("k", c.fingerprint_k);
  c.fingerprint_ks = fp.counts("ks", c.fingerprint_ks);
  c.fingerprint_random_draws = fp.count("random_draws", c.fingerprint_random_draws);
  c.fingerprint_options.standardize = fp.flag("standardize", false);
  fp.finish();
  if (std::find(c.fingerprint_ks.begin(), c.fingerprint_ks.end(), c.fingerprint_k) ==
      c.fingerprint_ks.end()) {
    c.fingerprint_ks.push_back(c.fingerprint_k);
  }
  std::sort(c.fingerprint_ks.begin(), c.fingerprint_ks.end());
  require(c.fingerprint_k >= 1, origin + ".fingerprint.k: must be positive");
  require(c.fingerprint_random_draws >= 1, origin + ".fingerprint.random_draws: must be positive");
  top.finish();

  // Canonical form: every effective setting, keys sorted by the json object.
  json canon;
  canon["experiment_id"] = c.experiment_id;
  canon["seed"] = c.analysis_seed;
  const auto& d = c.dataset;
  canon["dataset"] = {{"source", d.source == DatasetSource::kSynthetic ? "synthetic" : "image_binary"},
                      {"name", d.name},
                      {"n_classes", d.n_classes}};
  if (d.source == DatasetSource::kSynthetic) {
    canon["dataset"]["n_examples"] = d.synthetic.n_examples;
    canon["dataset"]["image_size"] = d.synthetic.image_size;
    canon["dataset"]["noise"] = d.synthetic.noise;
    canon["dataset"]["max_mix"] = d.synthetic.max_mix;
    canon["dataset"]["label_noise"] = d.synthetic.label_noise;
    canon["dataset"]["seed"] = d.synthetic.seed;
  } else {
    std::vector<std::string> files;
    for (const auto& f : d.files) files.push_back(f.string());
    canon["dataset"]["files"] = files;
    canon["dataset"]["limit"] = d.limit;
  }
  for (const auto& m : c.models) {
    canon["models"].push_back({{"family", family_name(m.model.family)},
                               {"width", m.model.width_multiplier},
                               {"depth", m.model.depth},
                               {"learning_rate", m.learning_rate},
                               {"seed", m.base_seed}});
  }
  canon["training"] = {{"n_runs", c.n_runs},           {"epochs", c.epochs},
                       {"batch_size", c.batch_size},   {"checkpoint_epoch", c.checkpoint_epoch},
                       {"vog_interval", c.vog_interval}, {"vog_target", target}};
  std::vector<std::string> kind_names;
  for (const auto& k : c.score_kinds) kind_names.push_back(k.name());
  canon["scores"] = {{"kinds", kind_names},
                     {"learned_series", series},
                     {"vog_class_normalize", c.score_options.vog_class_normalize},
                     {"sentinel_never_learned", c.sentinel_never_learned
                                                    ? json(*c.sentinel_never_learned)
                                                    : json(nullptr)}};
  canon["stability"] = {{"ks", c.stability_ks},         {"trials", c.trials},
                        {"percentile", c.percentile},   {"bin_size", c.bin_size},
                        {"ci_level", c.ci_level},       {"pc1_fit", fit}};
  canon["bias"] = {{"variant", variant}, {"alpha", c.alpha}};
  canon["fingerprint"] = {{"model_a", c.fingerprint_model_a},
                          {"model_b", c.fingerprint_model_b},
                          {"train_runs", c.fingerprint_train_runs},
                          {"k", c.fingerprint_k},
                          {"ks", c.fingerprint_ks},
                          {"random_draws", c.fingerprint_random_draws},
                          {"standardize", c.fingerprint_options.standardize}};
  c.canonical = canon.dump();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  auto in = open_for_read(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.string());
}

Dataset build_dataset(const DatasetConfig& config) {
  Dataset dataset;
  if (config.source == DatasetSource::kSynthetic) {
    dataset = make_synthetic_dataset(config.synthetic);
  } else {
    dataset = load_image_binary(config.files, config.limit, config.n_classes);
  }
  dataset.name = config.name;
  return dataset;
}

ExperimentConfig experiment_for(const PipelineConfig& config, const ModelEntry& entry,
                                std::size_t n_examples, std::int64_t seed_offset) {
  ExperimentConfig exp;
  exp.dataset_name = config.dataset.name;
  exp.n_examples = n_examples;
  exp.model = entry.model;
  exp.n_runs = config.n_runs;
  exp.epochs = config.epochs;
  exp.batch_size = config.batch_size;
  exp.learning_rate = entry.learning_rate;
  exp.checkpoint_epoch = config.checkpoint_epoch;
  exp.vog_interval = config.vog_interval;
  exp.base_seed = entry.base_seed + seed_offset;
  exp.vog_target = config.vog_target;
  return exp;
}

std::string config_digest(const PipelineConfig& config, std::int64_t seed_offset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view bytes) {
    for (const unsigned char ch : bytes) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
  };
  feed(config.canonical);
  feed("|seed_offset=" + std::to_string(seed_offset));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace difflab::cli
