#include <bit>
#include <cstring>
#include <fstream>

#include "flowcll/featurize.hpp"

namespace flowcll::featurize {

namespace {

constexpr const char* kFeatureFile = "features.f32";
constexpr const char* kMetaFile = "cohort.json";

void cache_fail(const std::string& what) {
  throw FeaturizeError(FeaturizeErrc::CacheError, what);
}

} // namespace

void write_cohort_cache(const std::filesystem::path& dir,
                        const CohortMatrix& cohort,
                        const nlohmann::json& pipeline) {
  cohort.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) cache_fail("cannot create " + dir.string() + ": " + ec.message());

  {
    std::ofstream out(dir / kFeatureFile, std::ios::binary | std::ios::trunc);
    if (!out) cache_fail("cannot write " + (dir / kFeatureFile).string());
    std::vector<char> buf;
    for (const auto& c : cohort.cases) {
      const auto bytes = c.features.size() * sizeof(float);
      if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(c.features.data()),
                  static_cast<std::streamsize>(bytes));
      } else {
        buf.resize(bytes);
        for (std::size_t i = 0; i < c.features.size(); ++i) {
          auto u = std::bit_cast<std::uint32_t>(c.features[i]);
          for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>(u >> (8 * b));
        }
        out.write(buf.data(), static_cast<std::streamsize>(bytes));
      }
    }
    if (!out) cache_fail("write failed for " + (dir / kFeatureFile).string());
  }

  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json labels = nlohmann::json::array();
  nlohmann::json binary = nlohmann::json::array();
  nlohmann::json tubes = nlohmann::json::array();
  for (const auto& c : cohort.cases) {
    ids.push_back(c.case_id);
    labels.push_back(std::string(to_string(c.label)));
    binary.push_back(c.binary_label);
    tubes.push_back(c.tube_paths);
  }
  nlohmann::json meta = {{"n_cases", cohort.size()},
                         {"n_features", cohort.n_features},
                         {"feature_file", kFeatureFile},
                         {"dtype", "float32-le"},
                         {"layout", "row-major, one row per case"},
                         {"case_ids", ids},
                         {"labels", labels},
                         {"binary_labels", binary},
                         {"tube_paths", tubes},
                         {"pipeline", pipeline}};
  std::ofstream out(dir / kMetaFile, std::ios::trunc);
  if (!out) cache_fail("cannot write " + (dir / kMetaFile).string());
  out << meta.dump(2) << '\n';
  if (!out) cache_fail("write failed for " + (dir / kMetaFile).string());
}

CohortCache read_cohort_cache(const std::filesystem::path& dir) {
  CohortCache cache;
  {
    std::ifstream in(dir / kMetaFile);
    if (!in) cache_fail("cannot open " + (dir / kMetaFile).string());
    try {
      cache.meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      cache_fail((dir / kMetaFile).string() + ": " + e.what());
    }
  }
  const auto& m = cache.meta;
  std::size_t n_cases = 0, n_features = 0;
  std::vector<std::string> ids, labels;
  std::vector<std::vector<std::string>> tubes;
  try {
    n_cases = m.at("n_cases").get<std::size_t>();
    n_features = m.at("n_features").get<std::size_t>();
    ids = m.at("case_ids").get<std::vector<std::string>>();
    labels = m.at("labels").get<std::vector<std::string>>();
    if (m.contains("tube_paths")) {
      tubes = m.at("tube_paths").get<std::vector<std::vector<std::string>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    cache_fail((dir / kMetaFile).string() + ": " + e.what());
  }
  if (ids.size() != n_cases || labels.size() != n_cases) {
    cache_fail("case id/label lists disagree with n_cases");
  }

  const auto path = dir / kFeatureFile;
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) cache_fail("cannot open " + path.string());
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (size != static_cast<std::uint64_t>(n_cases) * n_features * sizeof(float)) {
    cache_fail(path.string() + " has " + std::to_string(size) + " bytes, expected " +
               std::to_string(n_cases) + " x " + std::to_string(n_features) + " x 4");
  }
  in.seekg(0);

  cache.cohort.n_features = n_features;
  cache.cohort.cases.resize(n_cases);
  for (std::size_t i = 0; i < n_cases; ++i) {
    auto& c = cache.cohort.cases[i];
    c.case_id = ids[i];
    auto label = parse_label(labels[i]);
    if (!label) cache_fail("unknown label '" + labels[i] + "'");
    c.label = *label;
    c.binary_label = binary_label(c.label);
    if (i < tubes.size()) c.tube_paths = tubes[i];
    c.features.resize(n_features);
    in.read(reinterpret_cast<char*>(c.features.data()),
            static_cast<std::streamsize>(n_features * sizeof(float)));
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : c.features) {
        auto u = std::bit_cast<std::uint32_t>(v);
        u = (u >> 24) | ((u >> 8) & 0xFF00u) | ((u << 8) & 0xFF0000u) | (u << 24);
        v = std::bit_cast<float>(u);
      }
    }
  }
  if (!in) cache_fail("read failed for " + path.string());
  cache.cohort.validate();
  return cache;
}

} // namespace flowcll::featurize
