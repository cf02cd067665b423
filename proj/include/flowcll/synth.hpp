#pragma once

// Synthetic multi-tube cohorts for exercising the pipeline end to end.
//
// Every event belongs to one population; each channel of a population is an
// independent log-normal given by (median, coefficient of variation). A case
// mixes a clone population into the normal background at a clone fraction
// drawn uniformly from its recipe's range (0 for Normal).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowcll/fcs.hpp"
#include "flowcll/featurize.hpp"

namespace flowcll::synth {

/// Cohort generation failure (usually I/O), tagged with the case it hit.
class SynthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LogNormal {
  double median = 1.0;
  double cv = 0.3;
};

struct PopulationSpec {
  std::string name;
  double fraction = 0.0;
  /// One distribution per tube channel.
  std::vector<LogNormal> channels;
};

struct TubeRecipe {
  std::vector<std::string> channels;  // $PnN
  std::vector<std::string> stains;    // $PnS
  std::vector<PopulationSpec> background;
  /// Its fraction is ignored; the case-level clone fraction applies.
  PopulationSpec clone;
};

/// Events per tube: log-normal around `median`, clamped to [min, max].
struct EventCountSpec {
  double median = 77'416;
  double log_sd = 0.25;
  std::size_t min = 15'574;
  std::size_t max = 904'338;
};

struct CaseRecipe {
  featurize::CaseLabel label = featurize::CaseLabel::Normal;
  double clone_lo = 0.0;
  double clone_hi = 0.0;
  EventCountSpec events;
  double channel_range = 262'144;
  std::vector<TubeRecipe> tubes;

  /// Throws std::invalid_argument.
  void validate() const;
};

CaseRecipe default_recipe(featurize::CaseLabel label);

struct CohortPlan {
  std::size_t n_normal = 53;
  std::size_t n_cll = 44;
  std::size_t n_mbcll = 19;
  std::uint64_t seed = 20'240'101;
  std::map<featurize::CaseLabel, CaseRecipe> recipes;

  std::size_t n_cases() const { return n_normal + n_cll + n_mbcll; }
  /// Throws std::invalid_argument, including when the MBCLL clone range is
  /// not strictly below the CLL one.
  void validate() const;
};

/// 53 Normal / 44 CLL / 19 MBCLL with the default recipes.
CohortPlan default_plan();

nlohmann::json to_json(const CaseRecipe& r);
CaseRecipe recipe_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CohortPlan& plan);

/// Starts from default_plan() and applies any of: seed, counts
/// {Normal, CLL, MBCLL}, events {median, log_sd, min, max},
/// clone_fraction {CLL: [lo, hi], MBCLL: [lo, hi]}, recipes {label: recipe}.
CohortPlan plan_from_json(const nlohmann::json& j);

struct GeneratedCase {
  std::string case_id;
  std::uint64_t seed = 0;
  double clone_fraction = 0.0;
  std::vector<fcs::FcsDataset> tubes;
  std::vector<std::size_t> clone_events;  // per tube
};

/// Deterministic in (master_seed, case_id).
GeneratedCase generate_case(const CaseRecipe& recipe, const std::string& case_id,
                            std::uint64_t master_seed);

struct CohortSummary {
  std::filesystem::path manifest;
  std::vector<featurize::ManifestRow> rows;
  std::size_t n_files = 0;
  std::uint64_t bytes_written = 0;
};

/// Writes <case_id>_tube<k>.fcs files, manifest.csv and cohort.json into
/// out_dir. Cases are generated in parallel.
CohortSummary generate_cohort(const CohortPlan& plan, const std::filesystem::path& out_dir);

} // namespace flowcll::synth
