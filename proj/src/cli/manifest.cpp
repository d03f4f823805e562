#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "difflab/cli.hpp"
#include "difflab/error.hpp"
#include "difflab/tabular.hpp"

namespace difflab::cli {

using nlohmann::json;

bool RunManifest::complete(const std::string& stage, const std::string& hash,
                           const std::filesystem::path& root) const {
  const auto it = stages.find(stage);
  if (it == stages.end() || it->second.config_hash != hash) return false;
  for (const auto& artifact : it->second.artifacts) {
    if (!std::filesystem::exists(root / artifact)) return false;
  }
  return true;
}

std::filesystem::path manifest_path(const std::filesystem::path& root) {
  return root / "manifest.json";
}

RunManifest load_manifest(const std::filesystem::path& root) {
  RunManifest manifest;
  const auto path = manifest_path(root);
  if (!std::filesystem::exists(path)) return manifest;
  auto in = open_for_read(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    const auto doc = json::parse(buffer.str());
    manifest.experiment_id = doc.at("experiment_id").get<std::string>();
    manifest.config_hash = doc.at("config_hash").get<std::string>();
    for (const auto& [name, stage] : doc.at("stages").items()) {
      StageRecord record;
      record.config_hash = stage.at("config_hash").get<std::string>();
      record.artifacts = stage.at("artifacts").get<std::vector<std::string>>();
      manifest.stages.emplace(name, std::move(record));
    }
  } catch (const json::exception& e) {
    fail(path.string() + ": corrupt manifest (" + e.what() + "); delete it or rerun with --force");
  }
  return manifest;
}

void save_manifest(const RunManifest& manifest, const std::filesystem::path& root) {
  json doc;
  doc["experiment_id"] = manifest.experiment_id;
  doc["config_hash"] = manifest.config_hash;
  doc["stages"] = json::object();
  for (const auto& [name, stage] : manifest.stages) {
    doc["stages"][name] = {{"config_hash", stage.config_hash}, {"artifacts", stage.artifacts}};
  }
  std::filesystem::create_directories(root);
  // Write then rename so an interrupted save never leaves a torn manifest.
  const auto path = manifest_path(root);
  const auto tmp = path.string() + ".tmp";
  {
    auto out = open_for_write(tmp);
    out << doc.dump(2) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::filesystem::path resolve_output_root(const std::optional<std::filesystem::path>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("DIFFLAB_OUT"); env != nullptr && *env != '\0') return env;
  return "difflab-out";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalid:
      return 1;
    case ErrorKind::kMissingArtifact:
      return 2;
    case ErrorKind::kRuntime:
      return 3;
  }
  return 3;
}

}  // namespace difflab::cli
