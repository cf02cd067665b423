#pragma once

// Fixed-window featurization: each tube contributes `take_events` events
// (after skipping the first `skip_events`) of every panel channel,
// concatenated channel-major; the tubes of a case are concatenated in panel
// order. At the default panel this is 10,000 events x 13 channels = 130,000
// values per tube and 520,000 per case.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "flowcll/fcs.hpp"

namespace flowcll::featurize {

enum class FeaturizeErrc {
  InvalidPanel,
  InsufficientEvents,
  MissingChannel,
  WrongTubeCount,
  ManifestError,
  EmptyCohort,
  DuplicateCase,
  DegenerateSplit,
  CacheError,
};

std::string_view to_string(FeaturizeErrc code);

class FeaturizeError : public std::runtime_error {
 public:
  FeaturizeError(FeaturizeErrc code, const std::string& what);
  FeaturizeErrc code() const noexcept { return code_; }

 private:
  FeaturizeErrc code_;
};

enum class CaseLabel { Normal, CLL, MBCLL };

std::string_view to_string(CaseLabel label);
std::optional<CaseLabel> parse_label(std::string_view s);

/// CLL and MBCLL form the single positive class.
inline int binary_label(CaseLabel label) {
  return label == CaseLabel::Normal ? 0 : 1;
}

struct PanelSpec {
  std::size_t skip_events = 384;
  std::size_t take_events = 10'000;
  /// Channel short names ($PnN) per tube, in output order.
  std::vector<std::vector<std::string>> tubes;

  std::size_t n_tubes() const { return tubes.size(); }
  std::size_t n_channels() const { return tubes.empty() ? 0 : tubes.front().size(); }
  std::size_t tube_length() const { return take_events * n_channels(); }
  std::size_t case_length() const { return tube_length() * n_tubes(); }

  /// Throws InvalidPanel on empty or ragged channel lists.
  void validate() const;
};

/// Detector names shared by every tube of the 13-channel lymphoma panel.
const std::vector<std::string>& lymphoma_panel_channels();

/// 4 tubes x 13 channels, skip 384, take 10,000.
PanelSpec default_panel();

nlohmann::json to_json(const PanelSpec& spec);
PanelSpec panel_from_json(const nlohmann::json& j);
PanelSpec load_panel(const std::filesystem::path& path);

struct CaseVector {
  std::string case_id;
  CaseLabel label = CaseLabel::Normal;
  int binary_label = 0;
  std::vector<float> features;
  std::vector<std::string> tube_paths;
};

struct CohortMatrix {
  std::vector<CaseVector> cases;
  std::size_t n_features = 0;

  std::size_t size() const { return cases.size(); }
  std::optional<std::size_t> index_of(std::string_view case_id) const;
  /// Throws on ragged rows or duplicate ids.
  void validate() const;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

nlohmann::json to_json(const SplitPlan& plan);
SplitPlan split_from_json(const nlohmann::json& j);

/// Writes `spec.take_events` events of each panel channel into `out`
/// (channel-major). `out` must hold spec.tube_length() values.
void featurize_tube_into(const fcs::FcsDataset& dataset, const PanelSpec& spec,
                         std::size_t tube_index, std::span<float> out);

std::vector<float> featurize_tube(const fcs::FcsDataset& dataset,
                                  const PanelSpec& spec, std::size_t tube_index);

CaseVector featurize_case(std::span<const fcs::FcsDataset> tubes,
                          const PanelSpec& spec, std::string case_id,
                          CaseLabel label);

struct ManifestRow {
  std::string case_id;
  CaseLabel label = CaseLabel::Normal;
  /// As written in the manifest (relative paths resolve against its directory).
  std::vector<std::string> tubes;
};

inline constexpr std::string_view kManifestHeader =
    "case_id,label,tube1,tube2,tube3,tube4";

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestRow> rows);

struct LoadOptions {
  /// Abort on the first bad row; otherwise skip it and report it.
  bool fail_fast = true;
};

struct RowError {
  std::size_t line = 0;
  std::string case_id;
  std::string message;
};

struct CohortLoad {
  CohortMatrix cohort;
  std::vector<RowError> errors;
  /// Events taken into feature vectors (n_cases x n_tubes x take_events).
  std::uint64_t events_consumed = 0;
};

/// Parses and featurizes every manifest case; rows are processed in
/// parallel, output order is manifest order.
CohortLoad load_cohort(const std::filesystem::path& manifest_path,
                       const PanelSpec& spec, const LoadOptions& options = {});

/// Uniform random split, floor(train_fraction * n) cases for training.
/// Both id lists keep cohort order.
SplitPlan split_cohort(const CohortMatrix& cohort, double train_fraction,
                       std::uint64_t seed);

/// Cohort cache: `features.f32` (row-major little-endian float32) and
/// `cohort.json` (shape, ids, labels, pipeline parameters).
void write_cohort_cache(const std::filesystem::path& dir,
                        const CohortMatrix& cohort,
                        const nlohmann::json& pipeline);

struct CohortCache {
  CohortMatrix cohort;
  nlohmann::json meta;
};

CohortCache read_cohort_cache(const std::filesystem::path& dir);

} // namespace flowcll::featurize
