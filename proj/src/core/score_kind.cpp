#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "difflab/core.hpp"
#include "difflab/error.hpp"

namespace difflab {
namespace {

struct KindEntry {
  ScoreId id;
  const char* name;
  int polarity;
};

// Canonical orientation: higher = harder.
constexpr KindEntry kKinds[] = {
    {ScoreId::kMeanLoss, "MeanLoss", +1},
    {ScoreId::kMeanAccuracy, "MeanAccuracy", -1},
    {ScoreId::kAreaUnderMargin, "AreaUnderMargin", -1},
    {ScoreId::kForgetting, "Forgetting", +1},
    {ScoreId::kConsistentlyLearned, "ConsistentlyLearned", +1},
    {ScoreId::kGraNd, "GraNd", +1},
    {ScoreId::kEL2N, "EL2N", +1},
    {ScoreId::kVoG, "VoG", +1},
};

}  // namespace

ScoreKind ScoreKind::builtin(ScoreId id) {
  for (const auto& entry : kKinds) {
    if (entry.id == id) {
      ScoreKind kind;
      kind.id_ = id;
      kind.polarity_ = entry.polarity;
      return kind;
    }
  }
  fail("external score kinds need a name and polarity");
}

ScoreKind ScoreKind::external(std::string name, int polarity) {
  require(polarity == 1 || polarity == -1, "polarity must be +1 or -1");
  require(!name.empty(), "external score kind needs a name");
  for (const auto& entry : kKinds) {
    require(name != entry.name, "external score name '" + name + "' shadows a built-in score");
  }
  ScoreKind kind;
  kind.id_ = ScoreId::kExternal;
  kind.polarity_ = polarity;
  kind.external_name_ = std::move(name);
  return kind;
}

ScoreKind ScoreKind::parse(std::string_view name) {
  for (const auto& entry : kKinds) {
    if (name == entry.name) return builtin(entry.id);
  }
  fail("unknown score kind '" + std::string(name) + "'");
}

std::string ScoreKind::name() const {
  if (id_ == ScoreId::kExternal) return external_name_;
  for (const auto& entry : kKinds) {
    if (entry.id == id_) return entry.name;
  }
  return "?";
}

const std::vector<ScoreKind>& computed_score_kinds() {
  static const std::vector<ScoreKind> kinds = [] {
    std::vector<ScoreKind> out;
    for (const auto& entry : kKinds) out.push_back(ScoreKind::builtin(entry.id));
    return out;
  }();
  return kinds;
}

std::string family_name(ModelFamily family) {
  return family == ModelFamily::kMlp ? "mlp" : "cnn";
}

ModelFamily parse_family(std::string_view name) {
  if (name == "mlp" || name == "MLP") return ModelFamily::kMlp;
  if (name == "cnn" || name == "CNN") return ModelFamily::kCnn;
  fail("unknown model family '" + std::string(name) + "' (expected mlp or cnn)");
}

std::string ModelConfig::tag() const {
  char width[32];
  std::snprintf(width, sizeof width, "%g", width_multiplier);
  return family_name(family) + "-w" + width + "-d" + std::to_string(depth);
}

double parse_width_multiplier(std::string_view text) {
  auto parse_number = [&](std::string_view part) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), value);
    require(ec == std::errc() && ptr == part.data() + part.size(),
            "invalid width multiplier '" + std::string(text) + "'");
    return value;
  };
  double value;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const double den = parse_number(text.substr(slash + 1));
    require(den != 0.0, "width multiplier has zero denominator");
    value = parse_number(text.substr(0, slash)) / den;
  } else {
    value = parse_number(text);
  }
  require(std::isfinite(value) && value > 0.0, "width multiplier must be positive");
  return value;
}

}  // namespace difflab
