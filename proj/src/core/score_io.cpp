#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "difflab/core.hpp"
#include "difflab/error.hpp"
#include "difflab/tabular.hpp"

namespace difflab {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(std::string_view field, std::string_view context) {
  if (field == "nan") return std::nan("");
  if (field == "inf") return HUGE_VAL;
  if (field == "-inf") return -HUGE_VAL;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(std::string(context) + ": non-numeric value '" + std::string(field) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view field, std::string_view context) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(std::string(context) + ": invalid integer '" + std::string(field) + "'");
  }
  return value;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingArtifact, "cannot read '" + path.string() + "'");
  return in;
}

std::vector<std::string> read_table(const std::filesystem::path& path,
                                    std::string_view expected_header) {
  auto in = open_for_read(path);
  std::vector<std::string> lines;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      require(line == expected_header, path.string() + ": expected header '" +
                                           std::string(expected_header) + "', found '" + line +
                                           "'");
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    lines.push_back(line);
  }
  require(header_seen, path.string() + ": empty file");
  return lines;
}

namespace {

using nlohmann::ordered_json;

ordered_json model_to_json(const ModelConfig& model) {
  return ordered_json{{"family", family_name(model.family)},
                      {"width_multiplier", model.width_multiplier},
                      {"depth", model.depth},
                      {"param_count", model.param_count}};
}

ModelConfig model_from_json(const ordered_json& j) {
  ModelConfig model;
  model.family = parse_family(j.at("family").get<std::string>());
  model.width_multiplier = j.at("width_multiplier").get<double>();
  model.depth = j.at("depth").get<int>();
  model.param_count = j.at("param_count").get<std::size_t>();
  return model;
}

}  // namespace

std::filesystem::path metadata_path(const std::filesystem::path& data_path) {
  return std::filesystem::path(data_path.string() + ".meta.json");
}

void save_matrix(const ScoreMatrix& matrix, const std::filesystem::path& path) {
  validate(matrix);
  {
    auto out = open_for_write(path);
    out << "example_id,run_id,value\n";
    std::string row;
    for (std::size_t i = 0; i < matrix.n_examples; ++i) {
      for (std::size_t r = 0; r < matrix.n_runs; ++r) {
        row.clear();
        row += std::to_string(i);
        row += ',';
        row += std::to_string(r);
        row += ',';
        row += format_double(matrix.at(i, r));
        row += '\n';
        out << row;
      }
    }
    if (!out) fail("write failed for '" + path.string() + "'");
  }
  ordered_json meta{{"score_kind", matrix.kind.name()},
                    {"external", matrix.kind.is_external()},
                    {"polarity", matrix.kind.polarity()},
                    {"model_config", model_to_json(matrix.model)},
                    {"dataset_name", matrix.dataset_name},
                    {"n_examples", matrix.n_examples},
                    {"n_runs", matrix.n_runs},
                    {"run_seeds", matrix.run_seeds}};
  if (matrix.checkpoint_epoch) meta["checkpoint_epoch"] = *matrix.checkpoint_epoch;
  auto out = open_for_write(metadata_path(path));
  out << meta.dump(2) << '\n';
}

ScoreMatrix load_matrix(const std::filesystem::path& path) {
  const auto meta_file = metadata_path(path);
  if (!std::filesystem::exists(meta_file)) {
    throw Error(ErrorKind::kMissingArtifact,
                "missing metadata sidecar '" + meta_file.string() + "'");
  }
  ordered_json meta;
  try {
    auto in = open_for_read(meta_file);
    meta = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(meta_file.string() + ": " + e.what());
  }

  ScoreMatrix matrix;
  try {
    const auto name = meta.at("score_kind").get<std::string>();
    const int polarity = meta.at("polarity").get<int>();
    matrix.kind = meta.value("external", false) ? ScoreKind::external(name, polarity)
                                                : ScoreKind::parse(name);
    require(matrix.kind.polarity() == polarity,
            meta_file.string() + ": polarity disagrees with the built-in table");
    matrix.model = model_from_json(meta.at("model_config"));
    matrix.dataset_name = meta.at("dataset_name").get<std::string>();
    matrix.run_seeds = meta.at("run_seeds").get<std::vector<std::int64_t>>();
    if (meta.contains("checkpoint_epoch")) {
      matrix.checkpoint_epoch = meta.at("checkpoint_epoch").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(meta_file.string() + ": " + e.what());
  }

  const auto rows = read_table(path, "example_id,run_id,value");
  std::map<std::pair<std::int64_t, std::int64_t>, double> cells;
  std::set<std::int64_t> examples;
  std::set<std::int64_t> runs;
  for (std::size_t line = 0; line < rows.size(); ++line) {
    const auto context = path.string() + ":" + std::to_string(line + 2);
    const auto fields = split_fields(rows[line]);
    require(fields.size() == 3, context + ": malformed row (expected 3 fields)");
    const auto example = parse_int(fields[0], context);
    const auto run = parse_int(fields[1], context);
    require(example >= 0 && run >= 0, context + ": negative id");
    const double value = parse_double(fields[2], context);
    const auto [it, inserted] = cells.emplace(std::pair{example, run}, value);
    require(inserted, context + ": duplicate cell (example " + std::to_string(example) +
                          ", run " + std::to_string(run) + ")");
    examples.insert(example);
    runs.insert(run);
  }
  require(!cells.empty(), path.string() + ": no data rows");

  matrix.n_examples = static_cast<std::size_t>(*examples.rbegin() + 1);
  matrix.n_runs = static_cast<std::size_t>(*runs.rbegin() + 1);
  matrix.values.assign(matrix.n_examples * matrix.n_runs, 0.0);
  for (std::size_t i = 0; i < matrix.n_examples; ++i) {
    for (std::size_t r = 0; r < matrix.n_runs; ++r) {
      const auto it = cells.find({static_cast<std::int64_t>(i), static_cast<std::int64_t>(r)});
      require(it != cells.end(), path.string() + ": missing cell (example " + std::to_string(i) +
                                     ", run " + std::to_string(r) + ")");
      matrix.values[i * matrix.n_runs + r] = it->second;
    }
  }
  require(meta.at("n_examples").get<std::size_t>() == matrix.n_examples &&
              meta.at("n_runs").get<std::size_t>() == matrix.n_runs,
          path.string() + ": shape disagrees with metadata");
  validate(matrix);
  return matrix;
}

ScoreMatrix import_external_scores(const std::filesystem::path& path, const std::string& kind_name,
                                   int polarity) {
  ScoreMatrix matrix;
  matrix.kind = ScoreKind::external(kind_name, polarity);
  matrix.dataset_name = "external";
  const auto rows = read_table(path, "example_id,value");
  std::map<std::int64_t, double> by_id;
  for (std::size_t line = 0; line < rows.size(); ++line) {
    const auto context = path.string() + ":" + std::to_string(line + 2);
    const auto fields = split_fields(rows[line]);
    require(fields.size() == 2, context + ": malformed row (expected 2 fields)");
    const auto id = parse_int(fields[0], context);
    require(id >= 0, context + ": negative example id");
    const double value = parse_double(fields[1], context);
    require(std::isfinite(value), context + ": non-finite value");
    require(by_id.emplace(id, value).second, context + ": duplicate example id");
  }
  require(!by_id.empty(), path.string() + ": no data rows");
  std::int64_t expected = 0;
  for (const auto& [id, value] : by_id) {
    require(id == expected, path.string() + ": id gap, example " + std::to_string(expected) +
                                " is missing");
    matrix.values.push_back(value);
    ++expected;
  }
  matrix.n_examples = by_id.size();
  matrix.n_runs = 1;
  matrix.run_seeds = {0};
  return matrix;
}

}  // namespace difflab
