#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "flowcll/featurize.hpp"

namespace flowcll::featurize {

void featurize_tube_into(const fcs::FcsDataset& dataset, const PanelSpec& spec,
                         std::size_t tube_index, std::span<float> out) {
  if (tube_index >= spec.n_tubes()) {
    throw FeaturizeError(FeaturizeErrc::WrongTubeCount,
                         "tube index " + std::to_string(tube_index + 1) +
                             " beyond panel of " + std::to_string(spec.n_tubes()));
  }
  const auto& channels = spec.tubes[tube_index];
  const auto& ev = dataset.events;
  const std::size_t need = spec.skip_events + spec.take_events;
  if (ev.n_events < need) {
    throw FeaturizeError(FeaturizeErrc::InsufficientEvents,
                         "tube " + std::to_string(tube_index + 1) + " has " +
                             std::to_string(ev.n_events) + " events, needs " +
                             std::to_string(need));
  }
  if (out.size() != channels.size() * spec.take_events) {
    throw FeaturizeError(FeaturizeErrc::InvalidPanel, "output span has wrong length");
  }

  std::vector<std::size_t> columns;
  columns.reserve(channels.size());
  for (const auto& name : channels) {
    auto col = dataset.find_parameter(name);
    if (!col) {
      throw FeaturizeError(FeaturizeErrc::MissingChannel,
                           "tube " + std::to_string(tube_index + 1) + " lacks channel '" +
                               name + "'");
    }
    columns.push_back(*col);
  }

  const std::size_t stride = ev.n_params;
  const float* base = ev.values.data() + spec.skip_events * stride;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    float* dst = out.data() + c * spec.take_events;
    const float* src = base + columns[c];
    for (std::size_t k = 0; k < spec.take_events; ++k) dst[k] = src[k * stride];
  }
}

std::vector<float> featurize_tube(const fcs::FcsDataset& dataset,
                                  const PanelSpec& spec, std::size_t tube_index) {
  std::vector<float> out(spec.tube_length());
  featurize_tube_into(dataset, spec, tube_index, out);
  return out;
}

CaseVector featurize_case(std::span<const fcs::FcsDataset> tubes,
                          const PanelSpec& spec, std::string case_id,
                          CaseLabel label) {
  if (tubes.size() != spec.n_tubes()) {
    throw FeaturizeError(FeaturizeErrc::WrongTubeCount,
                         "case '" + case_id + "' has " + std::to_string(tubes.size()) +
                             " tubes, panel expects " + std::to_string(spec.n_tubes()));
  }
  CaseVector cv;
  cv.case_id = std::move(case_id);
  cv.label = label;
  cv.binary_label = binary_label(label);
  cv.features.resize(spec.case_length());
  const std::size_t len = spec.tube_length();
  for (std::size_t t = 0; t < tubes.size(); ++t) {
    try {
      featurize_tube_into(tubes[t], spec, t,
                          std::span<float>(cv.features).subspan(t * len, len));
    } catch (const FeaturizeError& e) {
      throw FeaturizeError(e.code(), "case '" + cv.case_id + "': " + e.what());
    }
    cv.tube_paths.push_back(tubes[t].source_path);
  }
  return cv;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    auto b = f.find_first_not_of(" \t");
    auto e = f.find_last_not_of(" \t");
    f = b == std::string::npos ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

} // namespace

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw FeaturizeError(FeaturizeErrc::ManifestError, "cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw FeaturizeError(FeaturizeErrc::EmptyCohort, path.string() + " is empty");
  }
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "case_id" || header[1] != "label") {
    throw FeaturizeError(FeaturizeErrc::ManifestError,
                         "bad header in " + path.string() + ", expected '" +
                             std::string(kManifestHeader) + "'");
  }
  const std::size_t n_tubes = header.size() - 2;

  std::vector<ManifestRow> rows;
  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv_line(line);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (f.size() != header.size()) {
      throw FeaturizeError(FeaturizeErrc::ManifestError,
                           where + ": expected " + std::to_string(header.size()) +
                               " fields, got " + std::to_string(f.size()));
    }
    ManifestRow row;
    row.case_id = f[0];
    if (row.case_id.empty()) {
      throw FeaturizeError(FeaturizeErrc::ManifestError, where + ": empty case_id");
    }
    if (!seen.insert(row.case_id).second) {
      throw FeaturizeError(FeaturizeErrc::DuplicateCase,
                           where + ": duplicate case_id '" + row.case_id + "'");
    }
    auto label = parse_label(f[1]);
    if (!label) {
      throw FeaturizeError(FeaturizeErrc::ManifestError,
                           where + ": unknown label '" + f[1] + "'");
    }
    row.label = *label;
    row.tubes.assign(f.begin() + 2, f.begin() + 2 + static_cast<std::ptrdiff_t>(n_tubes));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw FeaturizeError(FeaturizeErrc::EmptyCohort, path.string() + " lists no cases");
  }
  return rows;
}

void write_manifest(const std::filesystem::path& path,
                    std::span<const ManifestRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw FeaturizeError(FeaturizeErrc::ManifestError, "cannot write " + path.string());
  }
  out << "case_id,label";
  const std::size_t n_tubes = rows.empty() ? 4 : rows.front().tubes.size();
  for (std::size_t t = 0; t < n_tubes; ++t) out << ",tube" << t + 1;
  out << '\n';
  for (const auto& r : rows) {
    out << r.case_id << ',' << to_string(r.label);
    for (const auto& p : r.tubes) out << ',' << p;
    out << '\n';
  }
  if (!out) {
    throw FeaturizeError(FeaturizeErrc::ManifestError, "write failed for " + path.string());
  }
}

CohortLoad load_cohort(const std::filesystem::path& manifest_path,
                       const PanelSpec& spec, const LoadOptions& options) {
  spec.validate();
  const auto rows = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();

  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  std::vector<std::optional<CaseVector>> done(rows.size());
  std::vector<std::string> failures(rows.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    try {
      if (row.tubes.size() != spec.n_tubes()) {
        throw FeaturizeError(FeaturizeErrc::WrongTubeCount,
                             std::to_string(row.tubes.size()) + " tubes listed, panel has " +
                                 std::to_string(spec.n_tubes()));
      }
      std::vector<fcs::FcsDataset> tubes;
      tubes.reserve(row.tubes.size());
      for (const auto& p : row.tubes) {
        std::filesystem::path fp(p);
        if (fp.is_relative()) fp = base / fp;
        if (!std::filesystem::exists(fp)) {
          throw FeaturizeError(FeaturizeErrc::ManifestError, "missing file " + fp.string());
        }
        tubes.push_back(fcs::parse_file(fp));
      }
      auto cv = featurize_case(tubes, spec, row.case_id, row.label);
      cv.tube_paths = row.tubes;
      done[static_cast<std::size_t>(i)] = std::move(cv);
    } catch (const std::exception& e) {
      failures[static_cast<std::size_t>(i)] = e.what();
    }
  }

  CohortLoad result;
  result.cohort.n_features = spec.case_length();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failures[i].empty()) {
      // Line numbers count the header as line 1.
      RowError err{i + 2, rows[i].case_id, failures[i]};
      if (options.fail_fast) {
        throw FeaturizeError(FeaturizeErrc::ManifestError,
                             manifest_path.string() + ": case '" + err.case_id +
                                 "': " + err.message);
      }
      result.errors.push_back(std::move(err));
      continue;
    }
    result.events_consumed += spec.n_tubes() * spec.take_events;
    result.cohort.cases.push_back(std::move(*done[i]));
  }
  if (result.cohort.cases.empty()) {
    throw FeaturizeError(FeaturizeErrc::EmptyCohort, "no case could be loaded");
  }
  return result;
}

std::optional<std::size_t> CohortMatrix::index_of(std::string_view case_id) const {
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].case_id == case_id) return i;
  }
  return std::nullopt;
}

void CohortMatrix::validate() const {
  std::set<std::string_view> ids;
  for (const auto& c : cases) {
    if (c.features.size() != n_features) {
      throw FeaturizeError(FeaturizeErrc::CacheError,
                           "case '" + c.case_id + "' has " + std::to_string(c.features.size()) +
                               " features, cohort has " + std::to_string(n_features));
    }
    if (!ids.insert(c.case_id).second) {
      throw FeaturizeError(FeaturizeErrc::DuplicateCase, c.case_id);
    }
  }
}

SplitPlan split_cohort(const CohortMatrix& cohort, double train_fraction,
                       std::uint64_t seed) {
  const std::size_t n = cohort.size();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw FeaturizeError(FeaturizeErrc::DegenerateSplit,
                         "train fraction must lie in (0,1)");
  }
  // floor: 0.8 x 116 gives the 92/24 split; the epsilon absorbs
  // representation error in products like 0.5 x 2.
  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
  if (n < 2 || n_train == 0 || n_train >= n) {
    throw FeaturizeError(FeaturizeErrc::DegenerateSplit,
                         std::to_string(n) + " cases at fraction " +
                             std::to_string(train_fraction) + " leaves an empty side");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t k = 0; k < n_train; ++k) in_train[order[k]] = true;

  SplitPlan plan;
  plan.seed = seed;
  plan.train_fraction = train_fraction;
  for (std::size_t i = 0; i < n; ++i) {
    (in_train[i] ? plan.train_ids : plan.test_ids).push_back(cohort.cases[i].case_id);
  }
  return plan;
}

nlohmann::json to_json(const SplitPlan& plan) {
  return {{"seed", plan.seed},
          {"train_fraction", plan.train_fraction},
          {"n_train", plan.train_ids.size()},
          {"n_test", plan.test_ids.size()},
          {"train_ids", plan.train_ids},
          {"test_ids", plan.test_ids}};
}

SplitPlan split_from_json(const nlohmann::json& j) {
  SplitPlan plan;
  try {
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.train_fraction = j.at("train_fraction").get<double>();
    plan.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    plan.test_ids = j.at("test_ids").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FeaturizeError(FeaturizeErrc::DegenerateSplit,
                         std::string("malformed split record: ") + e.what());
  }
  return plan;
}

} // namespace flowcll::featurize
