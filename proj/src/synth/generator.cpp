#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include <omp.h>

#include "flowcll/seed.hpp"
#include "flowcll/synth.hpp"

namespace flowcll::synth {

using featurize::CaseLabel;

namespace {

struct LogParams {
  double mu;
  double sigma;
};

std::vector<LogParams> log_params(const PopulationSpec& p) {
  std::vector<LogParams> out;
  out.reserve(p.channels.size());
  for (const auto& c : p.channels) {
    out.push_back({std::log(c.median), std::sqrt(std::log1p(c.cv * c.cv))});
  }
  return out;
}

std::size_t draw_event_count(const EventCountSpec& spec, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  const double n = std::round(spec.median * std::exp(spec.log_sd * z(rng)));
  return std::clamp(static_cast<std::size_t>(std::max(n, 0.0)), spec.min, spec.max);
}

fcs::FcsDataset build_tube(const TubeRecipe& tube, double channel_range, double clone_fraction,
                           std::uint64_t seed, std::size_t n_events, std::size_t& n_clone) {
  std::mt19937_64 rng(seed);
  const std::size_t n_ch = tube.channels.size();

  std::vector<double> weights;
  std::vector<std::vector<LogParams>> pops;
  for (const auto& p : tube.background) {
    weights.push_back(p.fraction);
    pops.push_back(log_params(p));
  }
  const auto clone = log_params(tube.clone);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;

  fcs::EventMatrix events;
  events.n_events = n_events;
  events.n_params = n_ch;
  events.values.resize(n_events * n_ch);
  const double hi = channel_range - 1.0;
  n_clone = 0;
  for (std::size_t e = 0; e < n_events; ++e) {
    const std::vector<LogParams>* pop;
    if (clone_fraction > 0.0 && u(rng) < clone_fraction) {
      pop = &clone;
      ++n_clone;
    } else {
      pop = &pops[pick(rng)];
    }
    float* row = &events.values[e * n_ch];
    for (std::size_t c = 0; c < n_ch; ++c) {
      const auto& lp = (*pop)[c];
      row[c] = static_cast<float>(std::min(std::exp(lp.mu + lp.sigma * z(rng)), hi));
    }
  }

  std::vector<fcs::ParameterInfo> params;
  for (std::size_t c = 0; c < n_ch; ++c) {
    fcs::ParameterInfo p;
    p.index = c + 1;
    p.short_name = tube.channels[c];
    p.bits = 32;
    p.range = channel_range;
    if (!tube.stains.empty()) p.stain = tube.stains[c];
    params.push_back(std::move(p));
  }
  return fcs::make_dataset(std::move(params), std::move(events));
}

std::string file_name(const std::string& case_id, std::size_t tube) {
  return case_id + "_tube" + std::to_string(tube + 1) + ".fcs";
}

} // namespace

GeneratedCase generate_case(const CaseRecipe& recipe, const std::string& case_id,
                            std::uint64_t master_seed) {
  recipe.validate();
  GeneratedCase out;
  out.case_id = case_id;
  out.seed = stream_seed(master_seed, hash_string(case_id));

  std::mt19937_64 rng(out.seed);
  if (recipe.clone_hi > 0.0) {
    std::uniform_real_distribution<double> f(recipe.clone_lo, recipe.clone_hi);
    out.clone_fraction = f(rng);
  }
  for (std::size_t t = 0; t < recipe.tubes.size(); ++t) {
    const std::size_t n = draw_event_count(recipe.events, rng);
    std::size_t n_clone = 0;
    auto ds = build_tube(recipe.tubes[t], recipe.channel_range, out.clone_fraction,
                         stream_seed(out.seed, t + 1), n, n_clone);
    ds.text.set("$SRC", case_id);
    ds.text.set("TUBE NAME", "Tube " + std::to_string(t + 1));
    ds.text.set("$CYT", "flowcll synth");
    out.tubes.push_back(std::move(ds));
    out.clone_events.push_back(n_clone);
  }
  return out;
}

CohortSummary generate_cohort(const CohortPlan& plan, const std::filesystem::path& out_dir) {
  plan.validate();
  std::filesystem::create_directories(out_dir);

  // Labels are shuffled before ids are assigned so ids carry no label order.
  std::vector<CaseLabel> labels;
  labels.insert(labels.end(), plan.n_normal, CaseLabel::Normal);
  labels.insert(labels.end(), plan.n_cll, CaseLabel::CLL);
  labels.insert(labels.end(), plan.n_mbcll, CaseLabel::MBCLL);
  {
    std::mt19937_64 rng(plan.seed);
    std::shuffle(labels.begin(), labels.end(), rng);
  }
  const std::size_t n = labels.size();
  const int width = std::max<int>(3, static_cast<int>(std::to_string(n).size()));

  CohortSummary summary;
  summary.rows.resize(n);
  std::vector<nlohmann::json> case_info(n);
  std::vector<std::uint64_t> bytes(n, 0);
  std::vector<std::string> errors(n);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      auto num = std::to_string(i + 1);
      const std::string id = "case_" + std::string(width - num.size(), '0') + num;
      const auto& recipe = plan.recipes.at(labels[i]);
      auto gc = generate_case(recipe, id, plan.seed);
      auto& row = summary.rows[i];
      row.case_id = id;
      row.label = labels[i];
      std::vector<std::size_t> n_events;
      for (std::size_t t = 0; t < gc.tubes.size(); ++t) {
        const auto name = file_name(id, t);
        gc.tubes[t].text.set("$FIL", name);
        bytes[i] += fcs::write_file(gc.tubes[t], out_dir / name);
        row.tubes.push_back(name);
        n_events.push_back(gc.tubes[t].events.n_events);
      }
      case_info[i] = {{"case_id", id},
                      {"label", std::string(to_string(labels[i]))},
                      {"seed", gc.seed},
                      {"clone_fraction", gc.clone_fraction},
                      {"n_events", n_events},
                      {"clone_events", gc.clone_events}};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      throw SynthError("generating case " + std::to_string(i + 1) + ": " + errors[i]);
    }
  }

  summary.manifest = out_dir / "manifest.csv";
  featurize::write_manifest(summary.manifest, summary.rows);
  for (auto b : bytes) summary.bytes_written += b;
  for (const auto& r : summary.rows) summary.n_files += r.tubes.size();

  nlohmann::json meta = to_json(plan);
  meta["cases"] = case_info;
  std::ofstream out(out_dir / "cohort.json");
  out << meta.dump(1) << '\n';
  if (!out) throw SynthError("cannot write " + (out_dir / "cohort.json").string());
  return summary;
}

} // namespace flowcll::synth
