#include <algorithm>
#include <cctype>
#include <fstream>

#include "flowcll/featurize.hpp"

namespace flowcll::featurize {

std::string_view to_string(FeaturizeErrc code) {
  switch (code) {
    case FeaturizeErrc::InvalidPanel: return "InvalidPanel";
    case FeaturizeErrc::InsufficientEvents: return "InsufficientEvents";
    case FeaturizeErrc::MissingChannel: return "MissingChannel";
    case FeaturizeErrc::WrongTubeCount: return "WrongTubeCount";
    case FeaturizeErrc::ManifestError: return "ManifestError";
    case FeaturizeErrc::EmptyCohort: return "EmptyCohort";
    case FeaturizeErrc::DuplicateCase: return "DuplicateCase";
    case FeaturizeErrc::DegenerateSplit: return "DegenerateSplit";
    case FeaturizeErrc::CacheError: return "CacheError";
  }
  return "Unknown";
}

FeaturizeError::FeaturizeError(FeaturizeErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

std::string_view to_string(CaseLabel label) {
  switch (label) {
    case CaseLabel::Normal: return "Normal";
    case CaseLabel::CLL: return "CLL";
    case CaseLabel::MBCLL: return "MBCLL";
  }
  return "?";
}

std::optional<CaseLabel> parse_label(std::string_view s) {
  std::string u(s);
  for (auto& c : u) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "NORMAL") return CaseLabel::Normal;
  if (u == "CLL") return CaseLabel::CLL;
  if (u == "MBCLL") return CaseLabel::MBCLL;
  return std::nullopt;
}

void PanelSpec::validate() const {
  if (tubes.empty()) throw FeaturizeError(FeaturizeErrc::InvalidPanel, "no tubes");
  if (take_events == 0) throw FeaturizeError(FeaturizeErrc::InvalidPanel, "take_events is 0");
  const auto n = tubes.front().size();
  if (n == 0) throw FeaturizeError(FeaturizeErrc::InvalidPanel, "tube 1 has no channels");
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    if (tubes[t].size() != n) {
      throw FeaturizeError(FeaturizeErrc::InvalidPanel,
                           "tube " + std::to_string(t + 1) + " has " +
                               std::to_string(tubes[t].size()) + " channels, tube 1 has " +
                               std::to_string(n));
    }
    auto sorted = tubes[t];
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw FeaturizeError(FeaturizeErrc::InvalidPanel,
                           "tube " + std::to_string(t + 1) + " repeats a channel");
    }
  }
}

const std::vector<std::string>& lymphoma_panel_channels() {
  static const std::vector<std::string> channels = {
      "FSC-A",     "FSC-H",      "SSC-A",    "FITC-A",   "PE-A",
      "PerCP-Cy5-5-A", "PE-Cy7-A", "APC-A",  "APC-R700-A", "APC-H7-A",
      "BV421-A",   "V500-C-A",   "BV605-A"};
  return channels;
}

PanelSpec default_panel() {
  PanelSpec spec;
  spec.tubes.assign(4, lymphoma_panel_channels());
  return spec;
}

nlohmann::json to_json(const PanelSpec& spec) {
  return {{"skip_events", spec.skip_events},
          {"take_events", spec.take_events},
          {"tubes", spec.tubes}};
}

PanelSpec panel_from_json(const nlohmann::json& j) {
  PanelSpec spec;
  try {
    spec.skip_events = j.value("skip_events", spec.skip_events);
    spec.take_events = j.value("take_events", spec.take_events);
    spec.tubes = j.at("tubes").get<std::vector<std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FeaturizeError(FeaturizeErrc::InvalidPanel, e.what());
  }
  spec.validate();
  return spec;
}

PanelSpec load_panel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FeaturizeError(FeaturizeErrc::InvalidPanel, "cannot open " + path.string());
  try {
    return panel_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FeaturizeError(FeaturizeErrc::InvalidPanel, path.string() + ": " + e.what());
  }
}

} // namespace flowcll::featurize
