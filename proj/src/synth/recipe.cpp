#include <cmath>
#include <stdexcept>

#include "flowcll/synth.hpp"

namespace flowcll::synth {

using featurize::CaseLabel;

namespace {

enum class Level { Neg, Dim, Pos, Bright };

double level_median(Level l) {
  switch (l) {
    case Level::Neg: return 150.0;
    case Level::Dim: return 900.0;
    case Level::Pos: return 4'000.0;
    case Level::Bright: return 20'000.0;
  }
  return 150.0;
}

constexpr double kFluorCv = 0.35;
constexpr double kScatterCv = 0.18;

struct Phenotype {
  std::string name;
  double fraction;
  double fsc;
  double ssc;
  std::map<std::string, Level> markers;  // unlisted markers are negative
};

// Normal peripheral-blood leukocytes.
std::vector<Phenotype> normal_blood() {
  using L = Level;
  return {
      {"neutrophils", 0.58, 110'000, 140'000,
       {{"CD45", L::Dim}, {"CD16", L::Bright}, {"CD11c", L::Pos}, {"CD10", L::Pos},
        {"CD38", L::Dim}}},
      {"monocytes", 0.07, 100'000, 50'000,
       {{"CD45", L::Bright}, {"CD11c", L::Bright}, {"HLA-DR", L::Pos}, {"CD4", L::Dim},
        {"CD38", L::Pos}, {"CD52", L::Pos}}},
      {"T-CD4", 0.14, 50'000, 12'000,
       {{"CD45", L::Bright}, {"CD3", L::Pos}, {"CD2", L::Pos}, {"CD5", L::Pos},
        {"CD7", L::Pos}, {"CD4", L::Pos}, {"TCRab", L::Pos}, {"CD52", L::Pos},
        {"CD25", L::Dim}}},
      {"T-CD8", 0.07, 50'000, 12'000,
       {{"CD45", L::Bright}, {"CD3", L::Pos}, {"CD2", L::Pos}, {"CD5", L::Pos},
        {"CD7", L::Pos}, {"CD8", L::Pos}, {"TCRab", L::Pos}, {"CD52", L::Pos},
        {"CD57", L::Dim}}},
      {"NK", 0.05, 55'000, 15'000,
       {{"CD45", L::Bright}, {"CD56", L::Pos}, {"CD16", L::Pos}, {"CD2", L::Pos},
        {"CD7", L::Pos}, {"CD57", L::Dim}, {"CD8", L::Dim}, {"CD52", L::Pos}}},
      {"B-kappa", 0.03, 50'000, 11'000,
       {{"CD45", L::Bright}, {"CD19", L::Pos}, {"CD20", L::Bright}, {"CD22", L::Pos},
        {"Kappa", L::Pos}, {"HLA-DR", L::Pos}, {"FMC-7", L::Pos}, {"CD23", L::Dim},
        {"CD200", L::Dim}, {"CD52", L::Pos}, {"CD38", L::Dim}}},
      {"B-lambda", 0.02, 50'000, 11'000,
       {{"CD45", L::Bright}, {"CD19", L::Pos}, {"CD20", L::Bright}, {"CD22", L::Pos},
        {"Lambda", L::Pos}, {"HLA-DR", L::Pos}, {"FMC-7", L::Pos}, {"CD23", L::Dim},
        {"CD200", L::Dim}, {"CD52", L::Pos}, {"CD38", L::Dim}}},
      {"debris", 0.04, 20'000, 8'000, {}},
  };
}

// CD5, CD19, CD23 and CD200 bright; dim CD20/CD22; kappa-restricted, dim.
Phenotype cll_clone() {
  using L = Level;
  return {"clone", 0.0, 45'000, 10'000,
          {{"CD45", L::Pos}, {"CD19", L::Bright}, {"CD5", L::Bright}, {"CD23", L::Bright},
           {"CD200", L::Bright}, {"CD20", L::Dim}, {"CD22", L::Dim}, {"Kappa", L::Dim},
           {"HLA-DR", L::Pos}, {"CD52", L::Bright}, {"CD25", L::Dim}}};
}

// Stains on the 10 fluorescence detectors of each tube.
const std::vector<std::vector<std::string>>& tube_stains() {
  static const std::vector<std::vector<std::string>> stains = {
      {"Kappa", "Lambda", "CD5", "CD19", "CD23", "CD10", "CD45", "CD20", "CD38", "CD200"},
      {"CD4", "CD8", "CD3", "CD56", "CD7", "CD2", "CD45", "CD16", "HLA-DR", "CD200"},
      {"FMC-7", "CD22", "CD5", "CD19", "CD11c", "CD23", "CD45", "CD25", "CD52", "CD20"},
      {"TCRgd", "TCRab", "CD3", "CD19", "CD200", "CD23", "CD45", "CD5", "CD38", "HLA-DR"},
  };
  return stains;
}

PopulationSpec to_population(const Phenotype& p, const std::vector<std::string>& stains) {
  PopulationSpec pop;
  pop.name = p.name;
  pop.fraction = p.fraction;
  pop.channels.push_back({p.fsc, kScatterCv});         // FSC-A
  pop.channels.push_back({0.85 * p.fsc, kScatterCv});  // FSC-H
  pop.channels.push_back({p.ssc, kScatterCv});         // SSC-A
  for (const auto& s : stains) {
    auto it = p.markers.find(s);
    const Level l = it == p.markers.end() ? Level::Neg : it->second;
    pop.channels.push_back({level_median(l), kFluorCv});
  }
  return pop;
}

nlohmann::json to_json(const PopulationSpec& p) {
  nlohmann::json ch = nlohmann::json::array();
  for (const auto& c : p.channels) ch.push_back({c.median, c.cv});
  return {{"name", p.name}, {"fraction", p.fraction}, {"channels", ch}};
}

PopulationSpec population_from_json(const nlohmann::json& j) {
  PopulationSpec p;
  p.name = j.at("name").get<std::string>();
  p.fraction = j.value("fraction", 0.0);
  for (const auto& c : j.at("channels")) {
    p.channels.push_back({c.at(0).get<double>(), c.at(1).get<double>()});
  }
  return p;
}

CaseLabel label_key(const std::string& s) {
  auto l = featurize::parse_label(s);
  if (!l) throw std::invalid_argument("unknown label '" + s + "'");
  return *l;
}

} // namespace

CaseRecipe default_recipe(CaseLabel label) {
  CaseRecipe r;
  r.label = label;
  switch (label) {
    case CaseLabel::Normal:
      r.clone_lo = r.clone_hi = 0.0;
      break;
    case CaseLabel::CLL:
      r.clone_lo = 0.65;
      r.clone_hi = 0.95;
      break;
    case CaseLabel::MBCLL:
      r.clone_lo = 0.45;
      r.clone_hi = 0.62;
      break;
  }
  const auto background = normal_blood();
  const auto clone = cll_clone();
  for (const auto& stains : tube_stains()) {
    TubeRecipe t;
    t.channels = featurize::lymphoma_panel_channels();
    t.stains = {"FSC-A", "FSC-H", "SSC-A"};
    t.stains.insert(t.stains.end(), stains.begin(), stains.end());
    for (const auto& p : background) t.background.push_back(to_population(p, stains));
    t.clone = to_population(clone, stains);
    r.tubes.push_back(std::move(t));
  }
  return r;
}

void CaseRecipe::validate() const {
  auto bad = [](const std::string& w) { throw std::invalid_argument("recipe: " + w); };
  if (!(0.0 <= clone_lo && clone_lo <= clone_hi && clone_hi <= 1.0)) {
    bad("clone fraction range must satisfy 0 <= lo <= hi <= 1");
  }
  if (label == CaseLabel::Normal && clone_hi != 0.0) bad("Normal recipes carry no clone");
  if (events.min == 0 || events.min > events.max || !(events.median > 0) ||
      !(events.log_sd >= 0)) {
    bad("invalid event count spec");
  }
  if (!(channel_range > 1)) bad("channel_range must exceed 1");
  if (tubes.empty()) bad("no tubes");
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    const auto& tube = tubes[t];
    const auto where = "tube " + std::to_string(t + 1) + ": ";
    const auto n = tube.channels.size();
    if (n == 0) bad(where + "no channels");
    if (!tube.stains.empty() && tube.stains.size() != n) bad(where + "stain count mismatch");
    double sum = 0.0;
    auto check_pop = [&](const PopulationSpec& p) {
      if (p.channels.size() != n) bad(where + "population '" + p.name + "' channel count");
      for (const auto& c : p.channels) {
        if (!(c.median > 0) || !(c.cv >= 0)) bad(where + "population '" + p.name + "' params");
      }
    };
    for (const auto& p : tube.background) {
      check_pop(p);
      if (!(p.fraction >= 0)) bad(where + "negative fraction");
      sum += p.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      bad(where + "background fractions sum to " + std::to_string(sum));
    }
    if (clone_hi > 0.0) check_pop(tube.clone);
  }
}

void CohortPlan::validate() const {
  for (const auto& [label, r] : recipes) {
    r.validate();
    if (r.label != label) throw std::invalid_argument("recipe keyed under the wrong label");
  }
  for (auto l : {CaseLabel::Normal, CaseLabel::CLL, CaseLabel::MBCLL}) {
    if (!recipes.count(l)) {
      throw std::invalid_argument("plan lacks a recipe for " + std::string(to_string(l)));
    }
  }
  if (!(recipes.at(CaseLabel::MBCLL).clone_hi < recipes.at(CaseLabel::CLL).clone_lo)) {
    throw std::invalid_argument("MBCLL clone fractions must lie below the CLL range");
  }
}

CohortPlan default_plan() {
  CohortPlan plan;
  for (auto l : {CaseLabel::Normal, CaseLabel::CLL, CaseLabel::MBCLL}) {
    plan.recipes[l] = default_recipe(l);
  }
  return plan;
}

nlohmann::json to_json(const CaseRecipe& r) {
  nlohmann::json tubes = nlohmann::json::array();
  for (const auto& t : r.tubes) {
    nlohmann::json bg = nlohmann::json::array();
    for (const auto& p : t.background) bg.push_back(to_json(p));
    tubes.push_back({{"channels", t.channels},
                     {"stains", t.stains},
                     {"background", bg},
                     {"clone", to_json(t.clone)}});
  }
  return {{"label", std::string(to_string(r.label))},
          {"clone_fraction", {r.clone_lo, r.clone_hi}},
          {"events",
           {{"median", r.events.median},
            {"log_sd", r.events.log_sd},
            {"min", r.events.min},
            {"max", r.events.max}}},
          {"channel_range", r.channel_range},
          {"tubes", tubes}};
}

CaseRecipe recipe_from_json(const nlohmann::json& j) {
  CaseRecipe r;
  r.label = label_key(j.at("label").get<std::string>());
  r.clone_lo = j.at("clone_fraction").at(0).get<double>();
  r.clone_hi = j.at("clone_fraction").at(1).get<double>();
  if (j.contains("events")) {
    const auto& e = j.at("events");
    r.events.median = e.value("median", r.events.median);
    r.events.log_sd = e.value("log_sd", r.events.log_sd);
    r.events.min = e.value("min", r.events.min);
    r.events.max = e.value("max", r.events.max);
  }
  r.channel_range = j.value("channel_range", r.channel_range);
  for (const auto& tj : j.at("tubes")) {
    TubeRecipe t;
    t.channels = tj.at("channels").get<std::vector<std::string>>();
    t.stains = tj.value("stains", std::vector<std::string>{});
    for (const auto& p : tj.at("background")) t.background.push_back(population_from_json(p));
    t.clone = population_from_json(tj.at("clone"));
    r.tubes.push_back(std::move(t));
  }
  r.validate();
  return r;
}

nlohmann::json to_json(const CohortPlan& plan) {
  nlohmann::json recipes = nlohmann::json::object();
  for (const auto& [label, r] : plan.recipes) recipes[std::string(to_string(label))] = to_json(r);
  return {{"seed", plan.seed},
          {"counts",
           {{"Normal", plan.n_normal}, {"CLL", plan.n_cll}, {"MBCLL", plan.n_mbcll}}},
          {"recipes", recipes}};
}

CohortPlan plan_from_json(const nlohmann::json& j) {
  CohortPlan plan = default_plan();
  try {
    plan.seed = j.value("seed", plan.seed);
    if (j.contains("counts")) {
      const auto& c = j.at("counts");
      plan.n_normal = c.value("Normal", plan.n_normal);
      plan.n_cll = c.value("CLL", plan.n_cll);
      plan.n_mbcll = c.value("MBCLL", plan.n_mbcll);
    }
    if (j.contains("recipes")) {
      for (const auto& [key, rj] : j.at("recipes").items()) {
        auto r = recipe_from_json(rj);
        plan.recipes[label_key(key)] = std::move(r);
      }
    }
    if (j.contains("events")) {
      const auto& e = j.at("events");
      for (auto& [label, r] : plan.recipes) {
        r.events.median = e.value("median", r.events.median);
        r.events.log_sd = e.value("log_sd", r.events.log_sd);
        r.events.min = e.value("min", r.events.min);
        r.events.max = e.value("max", r.events.max);
      }
    }
    if (j.contains("clone_fraction")) {
      for (const auto& [key, range] : j.at("clone_fraction").items()) {
        auto& r = plan.recipes.at(label_key(key));
        r.clone_lo = range.at(0).get<double>();
        r.clone_hi = range.at(1).get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

} // namespace flowcll::synth
