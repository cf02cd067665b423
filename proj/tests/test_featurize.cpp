#include <doctest.h>

#include <fstream>
#include <numeric>
#include <set>

#include "flowcll/featurize.hpp"
#include "flowcll/synth.hpp"
#include "support.hpp"

using namespace flowcll;
using namespace flowcll::featurize;
using namespace testsupport;

namespace {

fcs::FcsDataset dataset_from_rows(const std::vector<std::string>& names,
                                  const std::vector<std::vector<float>>& rows) {
  std::vector<fcs::ParameterInfo> params;
  for (const auto& n : names) {
    fcs::ParameterInfo p;
    p.short_name = n;
    p.range = 262144;
    params.push_back(p);
  }
  fcs::EventMatrix m;
  m.n_events = rows.size();
  m.n_params = names.size();
  for (const auto& r : rows) m.values.insert(m.values.end(), r.begin(), r.end());
  return fcs::make_dataset(std::move(params), std::move(m));
}

PanelSpec toy_spec(std::size_t skip, std::size_t take, std::vector<std::string> channels,
                   std::size_t n_tubes = 1) {
  PanelSpec s;
  s.skip_events = skip;
  s.take_events = take;
  s.tubes.assign(n_tubes, channels);
  return s;
}

// Explicit double loop over (channel, event), independent of the library.
std::vector<float> naive_slice(const fcs::FcsDataset& ds, const std::vector<std::string>& chans,
                               std::size_t skip, std::size_t take) {
  std::vector<float> out;
  for (const auto& c : chans) {
    std::size_t col = ds.params.size();
    for (std::size_t p = 0; p < ds.params.size(); ++p) {
      if (ds.params[p].short_name == c) col = p;
    }
    REQUIRE(col < ds.params.size());
    for (std::size_t e = skip; e < skip + take; ++e) {
      out.push_back(ds.events.values[e * ds.events.n_params + col]);
    }
  }
  return out;
}

std::vector<std::vector<float>> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::uniform_real_distribution<float> u(0.0f, 262143.0f);
  std::vector<std::vector<float>> rows(n, std::vector<float>(d));
  for (auto& r : rows) {
    for (auto& v : r) v = u(rng);
  }
  return rows;
}

template <typename F>
FeaturizeErrc featurize_code(F&& f) {
  try {
    f();
  } catch (const FeaturizeError& e) {
    return e.code();
  }
  FAIL("expected a FeaturizeError");
  return FeaturizeErrc::CacheError;
}

CohortMatrix toy_cohort(std::size_t n, std::size_t d) {
  CohortMatrix c;
  c.n_features = d;
  for (std::size_t i = 0; i < n; ++i) {
    CaseVector cv;
    cv.case_id = "c" + std::to_string(i);
    cv.label = static_cast<CaseLabel>(i % 3);
    cv.binary_label = binary_label(cv.label);
    cv.features.assign(d, static_cast<float>(i));
    c.cases.push_back(std::move(cv));
  }
  return c;
}

} // namespace

TEST_CASE("toy tube slice is channel-major") {
  const auto ds = dataset_from_rows({"A", "B"}, {{1, 10}, {2, 20}, {3, 30}});
  CHECK(featurize_tube(ds, toy_spec(1, 2, {"A", "B"}), 0) == std::vector<float>{2, 3, 20, 30});
}

TEST_CASE("full window is a column-major rearrangement") {
  std::mt19937_64 rng(1);
  const auto rows = random_rows(rng, 37, 5);
  const std::vector<std::string> names = {"a", "b", "c", "d", "e"};
  const auto ds = dataset_from_rows(names, rows);
  const auto out = featurize_tube(ds, toy_spec(0, 37, names), 0);
  REQUIRE(out.size() == 37 * 5);
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t e = 0; e < 37; ++e) CHECK(out[c * 37 + e] == rows[e][c]);
  }
}

TEST_CASE("default-panel tube equals a naive slicer on a 77,416-event tube") {
  std::mt19937_64 rng(2);
  const auto names = lymphoma_panel_channels();
  REQUIRE(names.size() == 13);
  const auto ds = dataset_from_rows(names, random_rows(rng, 77'416, 13));
  const auto spec = default_panel();
  const auto out = featurize_tube(ds, spec, 0);
  CHECK(out.size() == 130'000);
  CHECK(out == naive_slice(ds, spec.tubes[0], 384, 10'000));
}

TEST_CASE("property: random windows match the naive slicer, length fixed by the spec") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> dim(1, 9), ev(1, 80);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = dim(rng), n = ev(rng);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < d; ++i) names.push_back("ch" + std::to_string(i));
    const auto ds = dataset_from_rows(names, random_rows(rng, n, d));
    std::uniform_int_distribution<std::size_t> sk(0, n - 1);
    const std::size_t skip = sk(rng);
    std::uniform_int_distribution<std::size_t> tk(1, n - skip);
    const std::size_t take = tk(rng);
    // A subset of channels in shuffled order.
    auto chans = names;
    std::shuffle(chans.begin(), chans.end(), rng);
    chans.resize(1 + rng() % d);
    const auto out = featurize_tube(ds, toy_spec(skip, take, chans), 0);
    CHECK(out.size() == take * chans.size());
    CHECK(out == naive_slice(ds, chans, skip, take));
  }
}

TEST_CASE("property: parameter storage order does not matter") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t d = 2 + trial % 7, n = 20;
    std::vector<std::string> names;
    for (std::size_t i = 0; i < d; ++i) names.push_back("N" + std::to_string(i));
    const auto rows = random_rows(rng, n, d);
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::string> pnames;
    std::vector<std::vector<float>> prows(n, std::vector<float>(d));
    for (std::size_t j = 0; j < d; ++j) {
      pnames.push_back(names[perm[j]]);
      for (std::size_t e = 0; e < n; ++e) prows[e][j] = rows[e][perm[j]];
    }
    const auto spec = toy_spec(3, 10, names);
    CHECK(featurize_tube(dataset_from_rows(names, rows), spec, 0) ==
          featurize_tube(dataset_from_rows(pnames, prows), spec, 0));
  }
}

TEST_CASE("tube errors: insufficient events and missing channel") {
  const auto ds = dataset_from_rows({"A", "B"}, {{1, 10}, {2, 20}, {3, 30}});
  try {
    featurize_tube(ds, toy_spec(2, 2, {"A"}), 0);
    FAIL("accepted");
  } catch (const FeaturizeError& e) {
    CHECK(e.code() == FeaturizeErrc::InsufficientEvents);
    CHECK(std::string(e.what()).find('3') != std::string::npos);
  }
  try {
    featurize_tube(ds, toy_spec(0, 1, {"A", "CD19"}), 0);
    FAIL("accepted");
  } catch (const FeaturizeError& e) {
    CHECK(e.code() == FeaturizeErrc::MissingChannel);
    CHECK(std::string(e.what()).find("CD19") != std::string::npos);
  }
}

TEST_CASE("case vector concatenates tubes in order") {
  const auto ds = dataset_from_rows({"A", "B"}, {{1, 10}, {2, 20}, {3, 30}});
  const auto spec = toy_spec(1, 2, {"A", "B"}, 4);
  std::vector<fcs::FcsDataset> tubes(4, ds);
  const auto cv = featurize_case(tubes, spec, "x", CaseLabel::MBCLL);
  CHECK(cv.features.size() == 16);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(std::vector<float>(cv.features.begin() + 4 * t, cv.features.begin() + 4 * t + 4) ==
          std::vector<float>{2, 3, 20, 30});
  }
  CHECK(cv.binary_label == 1);
  CHECK(binary_label(CaseLabel::CLL) == 1);
  CHECK(binary_label(CaseLabel::Normal) == 0);

  tubes.pop_back();
  CHECK(featurize_code([&] { featurize_case(tubes, spec, "x", CaseLabel::CLL); }) ==
        FeaturizeErrc::WrongTubeCount);

  // Different tubes land in their own blocks.
  std::vector<fcs::FcsDataset> distinct;
  for (float k = 0; k < 4; ++k) {
    distinct.push_back(dataset_from_rows({"A", "B"}, {{k, k}, {k + 1, k}, {k + 2, k}}));
  }
  const auto dv = featurize_case(distinct, spec, "y", CaseLabel::Normal);
  CHECK(dv.features[12] == 4.0f);
  CHECK(dv.features[15] == 3.0f);
}

TEST_CASE("default panel sizes") {
  const auto spec = default_panel();
  CHECK(spec.n_tubes() == 4);
  CHECK(spec.n_channels() == 13);
  CHECK(spec.skip_events == 384);
  CHECK(spec.take_events == 10'000);
  CHECK(spec.tube_length() == 130'000);
  CHECK(spec.case_length() == 520'000);
  CHECK(panel_from_json(to_json(spec)).tubes == spec.tubes);

  PanelSpec ragged = toy_spec(0, 1, {"A", "B"}, 2);
  ragged.tubes[1].pop_back();
  CHECK(featurize_code([&] { ragged.validate(); }) == FeaturizeErrc::InvalidPanel);
}

TEST_CASE("split sizes follow the 80/20 rule") {
  const auto split = split_cohort(toy_cohort(116, 1), 0.8, 0);
  CHECK(split.train_ids.size() == 92);
  CHECK(split.test_ids.size() == 24);
  const auto tiny = split_cohort(toy_cohort(2, 1), 0.5, 9);
  CHECK(tiny.train_ids.size() == 1);
  CHECK(tiny.test_ids.size() == 1);
  CHECK(featurize_code([&] { split_cohort(toy_cohort(1, 1), 0.8, 0); }) ==
        FeaturizeErrc::DegenerateSplit);
  CHECK(featurize_code([&] { split_cohort(toy_cohort(10, 1), 0.05, 0); }) ==
        FeaturizeErrc::DegenerateSplit);
}

TEST_CASE("property: splits are disjoint, cover the cohort, and replay from the seed") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n = 2 + seed * 3;
    const auto cohort = toy_cohort(n, 1);
    const auto a = split_cohort(cohort, 0.7, seed);
    const auto b = split_cohort(cohort, 0.7, seed);
    CHECK(a.train_ids == b.train_ids);
    CHECK(a.test_ids == b.test_ids);
    std::set<std::string> all(a.train_ids.begin(), a.train_ids.end());
    for (const auto& id : a.test_ids) CHECK(all.insert(id).second);
    CHECK(all.size() == n);
    const auto parsed = split_from_json(to_json(a));
    CHECK(parsed.train_ids == a.train_ids);
    CHECK(parsed.seed == seed);
  }
  CHECK(split_cohort(toy_cohort(116, 1), 0.8, 1).train_ids !=
        split_cohort(toy_cohort(116, 1), 0.8, 2).train_ids);
}

TEST_CASE("manifest round trip and errors") {
  TempDir dir("manifest");
  std::vector<ManifestRow> rows = {{"a", CaseLabel::CLL, {"a1", "a2", "a3", "a4"}},
                                   {"b", CaseLabel::Normal, {"b1", "b2", "b3", "b4"}}};
  write_manifest(dir / "m.csv", rows);
  const auto back = read_manifest(dir / "m.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].case_id == "a");
  CHECK(back[0].label == CaseLabel::CLL);
  CHECK(back[1].tubes[3] == "b4");

  { std::ofstream(dir / "empty.csv"); }
  CHECK(featurize_code([&] { load_cohort(dir / "empty.csv", default_panel()); }) ==
        FeaturizeErrc::EmptyCohort);
  {
    std::ofstream f(dir / "header_only.csv");
    f << kManifestHeader << "\n";
  }
  CHECK(featurize_code([&] { load_cohort(dir / "header_only.csv", default_panel()); }) ==
        FeaturizeErrc::EmptyCohort);
  {
    std::ofstream f(dir / "dup.csv");
    f << kManifestHeader << "\nx,CLL,1,2,3,4\nx,Normal,1,2,3,4\n";
  }
  CHECK(featurize_code([&] { read_manifest(dir / "dup.csv"); }) == FeaturizeErrc::DuplicateCase);
  {
    std::ofstream f(dir / "label.csv");
    f << kManifestHeader << "\nx,Lymphoma,1,2,3,4\n";
  }
  CHECK(featurize_code([&] { read_manifest(dir / "label.csv"); }) ==
        FeaturizeErrc::ManifestError);
}

TEST_CASE("synthetic cohort loads, caches and reports missing files") {
  TempDir dir("cohort");
  auto plan = synth::default_plan();
  plan.n_normal = 2;
  plan.n_cll = 2;
  plan.n_mbcll = 1;
  for (auto& [label, r] : plan.recipes) r.events = {1500, 0.2, 1000, 3000};
  const auto summary = synth::generate_cohort(plan, dir / "cohort");
  CHECK(summary.n_files == 20);

  PanelSpec spec = default_panel();
  spec.skip_events = 10;
  spec.take_events = 200;
  auto load = load_cohort(summary.manifest, spec);
  CHECK(load.cohort.size() == 5);
  CHECK(load.cohort.n_features == 4 * 13 * 200);
  CHECK(load.events_consumed == 5 * 4 * 200);
  CHECK(load.errors.empty());
  for (std::size_t i = 0; i < 5; ++i) CHECK(load.cohort.cases[i].case_id == summary.rows[i].case_id);

  // Tube 2 of case 1 against the naive slicer.
  const auto tube = fcs::parse_file(summary.manifest.parent_path() / summary.rows[0].tubes[1]);
  const auto expect = naive_slice(tube, spec.tubes[1], 10, 200);
  const auto& f = load.cohort.cases[0].features;
  CHECK(std::vector<float>(f.begin() + 13 * 200, f.begin() + 2 * 13 * 200) == expect);

  write_cohort_cache(dir / "cache", load.cohort, {{"panel", to_json(spec)}});
  const auto cache = read_cohort_cache(dir / "cache");
  CHECK(cache.cohort.size() == 5);
  CHECK(cache.meta.at("pipeline").at("panel") == to_json(spec));
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(cache.cohort.cases[i].case_id == load.cohort.cases[i].case_id);
    CHECK(cache.cohort.cases[i].label == load.cohort.cases[i].label);
    CHECK(cache.cohort.cases[i].features == load.cohort.cases[i].features);
  }

  // A missing tube names its path; skip mode keeps the other cases.
  const auto victim = summary.manifest.parent_path() / summary.rows[2].tubes[3];
  fs::remove(victim);
  try {
    load_cohort(summary.manifest, spec);
    FAIL("loaded");
  } catch (const FeaturizeError& e) {
    CHECK(std::string(e.what()).find(victim.filename().string()) != std::string::npos);
  }
  LoadOptions skip;
  skip.fail_fast = false;
  const auto partial = load_cohort(summary.manifest, spec, skip);
  CHECK(partial.cohort.size() == 4);
  REQUIRE(partial.errors.size() == 1);
  CHECK(partial.errors[0].case_id == summary.rows[2].case_id);
  CHECK(partial.errors[0].line == 4);
  CHECK(partial.errors[0].message.find(victim.filename().string()) != std::string::npos);
}
