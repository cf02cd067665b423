#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowcll/eval.hpp"
#include "flowcll/fcs.hpp"
#include "flowcll/featurize.hpp"
#include "flowcll/models/error.hpp"
#include "flowcll/models/model_io.hpp"
#include "flowcll/parallel.hpp"
#include "flowcll/synth.hpp"

namespace flowcll::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Bad invocation that CLI11 cannot see (unknown model kind, refused subset).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LogLevel { Error, Warn, Info, Debug };

class Logger {
 public:
  Logger(std::ostream& err, LogLevel level) : err_(err), level_(level) {}
  void warn(const std::string& m) const { emit(LogLevel::Warn, "warn", m); }
  void info(const std::string& m) const { emit(LogLevel::Info, "info", m); }
  void debug(const std::string& m) const { emit(LogLevel::Debug, "debug", m); }

 private:
  void emit(LogLevel l, const char* tag, const std::string& m) const {
    if (l <= level_) err_ << "[flowcll " << tag << "] " << m << '\n';
  }
  std::ostream& err_;
  LogLevel level_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt_seconds(double s) {
  std::ostringstream o;
  o.precision(3);
  o << std::fixed << s << " s";
  return o.str();
}

json tool_info() { return {{"name", "flowcll"}, {"version", FLOWCLL_VERSION}}; }

/// Common envelope. Thread count is deliberately absent: outputs must not
/// depend on it.
json envelope(const std::string& command, json config) {
  return {{"tool", tool_info()}, {"command", command}, {"config", std::move(config)}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

/// Emits to `path`, or to `out` when path is empty or "-".
void emit_json(const std::string& path, const json& j, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << j.dump(2) << '\n';
  } else {
    write_json(path, j);
  }
}

/// Inline JSON when it starts with '{', otherwise a file path.
json params_argument(const std::string& arg) {
  if (arg.empty()) return json::object();
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return json::parse(arg);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument(std::string("--params: ") + e.what());
    }
  }
  return read_json(arg);
}

models::ModelSpec model_spec(const std::string& kind, const json& params) {
  if (kind == "gbt") return models::gbt_params_from_json(params);
  if (kind == "rf") return models::forest_params_from_json(params);
  throw UsageError("unknown model kind '" + kind + "' (expected gbt or rf)");
}

json predictions_json(const eval::Evaluation& ev, double threshold) {
  json rows = json::array();
  for (std::size_t i = 0; i < ev.case_ids.size(); ++i) {
    rows.push_back({{"case_id", ev.case_ids[i]},
                    {"label", ev.labels[i]},
                    {"probability", ev.scores[i]},
                    {"predicted", ev.scores[i] >= threshold ? 1 : 0}});
  }
  return rows;
}

// ---- parse --------------------------------------------------------------

struct ParseArgs {
  std::string path;
  bool keywords_only = false;
};

int cmd_parse(const ParseArgs& a, std::ostream& out, const Logger& log) {
  fcs::ParseOptions opt;
  opt.keywords_only = a.keywords_only;
  const auto ds = fcs::parse_file(a.path, opt);
  json keywords = json::object();
  for (const auto& [k, v] : ds.text.keywords) keywords[k] = v;
  json params = json::array();
  for (const auto& p : ds.params) {
    params.push_back({{"index", p.index},
                      {"name", p.short_name},
                      {"stain", p.stain ? json(*p.stain) : json(nullptr)},
                      {"bits", p.bits},
                      {"range", p.range}});
  }
  const auto& h = ds.header;
  json j = envelope("parse", {{"path", a.path}, {"keywords_only", a.keywords_only}});
  j["header"] = {{"version", std::string(fcs::to_string(h.version))},
                 {"text", {h.text_begin, h.text_end}},
                 {"data", {h.data_begin, h.data_end}},
                 {"analysis", {h.analysis_begin, h.analysis_end}}};
  j["delimiter"] = std::string(1, ds.text.delimiter);
  j["n_events"] = ds.events.n_events;
  j["n_params"] = ds.events.n_params;
  j["data_decoded"] = !a.keywords_only;
  j["parameters"] = params;
  j["keywords"] = keywords;
  out << j.dump(2) << '\n';
  log.debug("parsed " + a.path);
  return kOk;
}

// ---- featurize ----------------------------------------------------------

struct FeaturizeArgs {
  std::string manifest;
  std::string panel;
  std::string out;
  bool skip_bad_rows = false;
};

int cmd_featurize(const FeaturizeArgs& a, std::ostream& out, const Logger& log) {
  const auto panel = a.panel.empty() ? featurize::default_panel() : featurize::load_panel(a.panel);
  featurize::LoadOptions opt;
  opt.fail_fast = !a.skip_bad_rows;
  Stopwatch sw;
  const auto load = featurize::load_cohort(a.manifest, panel, opt);
  log.info("featurized " + std::to_string(load.cohort.size()) + " cases (" +
           std::to_string(load.events_consumed) + " events) in " + fmt_seconds(sw.seconds()));

  json errors = json::array();
  for (const auto& e : load.errors) {
    errors.push_back({{"line", e.line}, {"case_id", e.case_id}, {"message", e.message}});
    log.warn("skipped line " + std::to_string(e.line) + " (" + e.case_id + "): " + e.message);
  }
  const json config = {{"manifest", a.manifest},
                       {"panel", to_json(panel)},
                       {"panel_path", a.panel.empty() ? json(nullptr) : json(a.panel)},
                       {"skip_bad_rows", a.skip_bad_rows}};
  json pipeline = envelope("featurize", config);
  featurize::write_cohort_cache(a.out, load.cohort, pipeline);

  json summary = envelope("featurize", config);
  summary["out"] = a.out;
  summary["n_cases"] = load.cohort.size();
  summary["n_features"] = load.cohort.n_features;
  summary["events_consumed"] = load.events_consumed;
  summary["skipped_rows"] = errors;
  out << summary.dump(2) << '\n';
  return kOk;
}

// ---- train --------------------------------------------------------------

struct TrainArgs {
  std::string cohort;
  std::string kind = "gbt";
  std::string params;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out, const Logger& log) {
  const auto spec = model_spec(a.kind, params_argument(a.params));
  const auto cache = featurize::read_cohort_cache(a.cohort);
  const auto& cohort = cache.cohort;
  const auto split = featurize::split_cohort(cohort, a.train_fraction, a.seed);
  log.info("split " + std::to_string(split.train_ids.size()) + "/" +
           std::to_string(split.test_ids.size()) + " (seed " + std::to_string(a.seed) + ")");

  const auto train = models::make_training_set(cohort, split.train_ids);
  Stopwatch sw;
  const auto model = models::train_model(spec, train, a.seed);
  log.info("trained " + a.kind + " on " + std::to_string(train.size()) + " x " +
           std::to_string(train.n_features) + " in " + fmt_seconds(sw.seconds()));

  const json config = {{"cohort", a.cohort},
                       {"kind", a.kind},
                       {"params", models::to_json(spec)},
                       {"seed", a.seed},
                       {"train_fraction", a.train_fraction}};

  fs::create_directories(a.out);
  json model_json = models::to_json(model);
  model_json["tool"] = tool_info();
  write_json(fs::path(a.out) / "model.json", model_json);

  json split_json = featurize::to_json(split);
  split_json["tool"] = tool_info();
  write_json(fs::path(a.out) / "split.json", split_json);

  const auto ev = eval::evaluate_model(model, cohort, split.train_ids);
  double loss = 0.0;
  for (std::size_t i = 0; i < ev.scores.size(); ++i) {
    const double p = std::clamp(ev.scores[i], 1e-15, 1.0 - 1e-15);
    loss -= ev.labels[i] ? std::log(p) : std::log1p(-p);
  }
  loss /= static_cast<double>(ev.scores.size());

  json report = envelope("train", config);
  report["n_train"] = split.train_ids.size();
  report["n_test"] = split.test_ids.size();
  report["n_features"] = train.n_features;
  report["train"] = {{"confusion", eval::to_json(ev.confusion)},
                     {"metrics", eval::to_json(ev.metrics)},
                     {"auc", ev.roc ? json(ev.roc->auc) : json(nullptr)},
                     {"logloss", loss}};
  report["files"] = {{"model", "model.json"}, {"split", "split.json"}};
  write_json(fs::path(a.out) / "train_report.json", report);
  out << report.dump(2) << '\n';
  return kOk;
}

// ---- evaluate -----------------------------------------------------------

struct EvaluateArgs {
  std::string model;
  std::string cohort;
  std::string split;
  std::string subset = "test";
  bool allow_train = false;
  double threshold = 0.5;
  std::string out;
};

std::vector<std::string> subset_ids(const featurize::SplitPlan& split,
                                    const featurize::CohortMatrix& cohort,
                                    const std::string& subset, bool allow_train) {
  if (subset != "test" && !allow_train) {
    throw UsageError("evaluating on '" + subset +
                     "' includes training cases; pass --allow-train to proceed");
  }
  if (subset == "test") {
    const std::set<std::string> train(split.train_ids.begin(), split.train_ids.end());
    for (const auto& id : split.test_ids) {
      if (train.count(id) && !allow_train) {
        throw UsageError("split record lists '" + id + "' as both train and test");
      }
    }
    return split.test_ids;
  }
  if (subset == "train") return split.train_ids;
  std::vector<std::string> all;
  for (const auto& c : cohort.cases) all.push_back(c.case_id);
  return all;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out, const Logger& log) {
  const auto model = models::load_model(a.model);
  const auto cache = featurize::read_cohort_cache(a.cohort);
  const auto split = featurize::split_from_json(read_json(a.split));
  const auto ids = subset_ids(split, cache.cohort, a.subset, a.allow_train);

  Stopwatch sw;
  const auto ev = eval::evaluate_model(model, cache.cohort, ids, a.threshold);
  log.info("scored " + std::to_string(ids.size()) + " cases in " + fmt_seconds(sw.seconds()));

  json j = envelope("evaluate", {{"model", a.model},
                                 {"cohort", a.cohort},
                                 {"split", a.split},
                                 {"subset", a.subset},
                                 {"allow_train", a.allow_train},
                                 {"threshold", a.threshold},
                                 {"model_kind", std::string(models::model_kind(model))},
                                 {"split_seed", split.seed}});
  j["n_cases"] = ids.size();
  j["confusion"] = eval::to_json(ev.confusion);
  j["metrics"] = eval::to_json(ev.metrics);
  j["auc"] = ev.roc ? json(ev.roc->auc) : json(nullptr);
  j["predictions"] = predictions_json(ev, a.threshold);

  fs::create_directories(a.out);
  write_json(fs::path(a.out) / "metrics.json", j);
  if (ev.roc) {
    std::ofstream roc(fs::path(a.out) / "roc.csv", std::ios::binary);
    eval::write_roc_csv(roc, *ev.roc);
    if (!roc) throw IoError("cannot write roc.csv");
  } else {
    log.warn("evaluation subset holds one class; AUC and ROC are undefined");
  }
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- predict ------------------------------------------------------------

struct PredictArgs {
  std::string model;
  std::string cohort;
  std::string manifest;
  std::string panel;
  double threshold = 0.5;
  std::string out;
};

int cmd_predict(const PredictArgs& a, std::ostream& out, const Logger& log) {
  if (a.cohort.empty() == a.manifest.empty()) {
    throw UsageError("predict needs exactly one of --cohort or --manifest");
  }
  const auto model = models::load_model(a.model);
  featurize::CohortMatrix cohort;
  if (!a.cohort.empty()) {
    cohort = featurize::read_cohort_cache(a.cohort).cohort;
  } else {
    const auto panel =
        a.panel.empty() ? featurize::default_panel() : featurize::load_panel(a.panel);
    cohort = featurize::load_cohort(a.manifest, panel).cohort;
  }
  Stopwatch sw;
  json rows = json::array();
  for (const auto& c : cohort.cases) {
    const double p = models::predict_proba(model, c.features);
    rows.push_back({{"case_id", c.case_id},
                    {"probability", p},
                    {"predicted", p >= a.threshold ? 1 : 0}});
  }
  if (!cohort.cases.empty()) {
    log.info("prediction: " +
             fmt_seconds(sw.seconds() / static_cast<double>(cohort.cases.size())) + " per case");
  }
  json j = envelope("predict", {{"model", a.model},
                                {"cohort", a.cohort.empty() ? json(nullptr) : json(a.cohort)},
                                {"manifest", a.manifest.empty() ? json(nullptr) : json(a.manifest)},
                                {"threshold", a.threshold},
                                {"model_kind", std::string(models::model_kind(model))}});
  j["predictions"] = rows;
  emit_json(a.out, j, out);
  return kOk;
}

// ---- cv -----------------------------------------------------------------

struct CvArgs {
  std::string cohort;
  std::string kind = "gbt";
  std::string params;
  std::uint64_t seed = 0;
  std::size_t repeats = 10;
  double train_fraction = 0.8;
  std::string out;
};

int cmd_cv(const CvArgs& a, std::ostream& out, const Logger& log) {
  const auto spec = model_spec(a.kind, params_argument(a.params));
  const auto cache = featurize::read_cohort_cache(a.cohort);
  Stopwatch sw;
  const auto report = eval::cross_validate(cache.cohort, spec, a.repeats, a.train_fraction, a.seed);
  log.info(std::to_string(a.repeats) + " repeats in " + fmt_seconds(sw.seconds()));

  json j = envelope("cv", {{"cohort", a.cohort},
                           {"kind", a.kind},
                           {"params", models::to_json(spec)},
                           {"seed", a.seed},
                           {"repeats", a.repeats},
                           {"train_fraction", a.train_fraction}});
  j["report"] = eval::to_json(report);
  emit_json(a.out, j, out);
  return kOk;
}

// ---- synth --------------------------------------------------------------

struct SynthArgs {
  std::string plan;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, const Logger& log) {
  json plan_json = a.plan.empty() ? json::object() : read_json(a.plan);
  if (a.seed) plan_json["seed"] = *a.seed;
  const auto plan = synth::plan_from_json(plan_json);
  Stopwatch sw;
  const auto summary = synth::generate_cohort(plan, a.out);
  log.info("wrote " + std::to_string(summary.n_files) + " files (" +
           std::to_string(summary.bytes_written >> 20) + " MiB) in " + fmt_seconds(sw.seconds()));

  json j = envelope("synth", {{"plan_path", a.plan.empty() ? json(nullptr) : json(a.plan)},
                              {"seed", plan.seed},
                              {"counts",
                               {{"Normal", plan.n_normal},
                                {"CLL", plan.n_cll},
                                {"MBCLL", plan.n_mbcll}}}});
  j["out"] = a.out;
  j["manifest"] = summary.manifest.string();
  j["n_cases"] = summary.rows.size();
  j["n_files"] = summary.n_files;
  out << j.dump(2) << '\n';
  return kOk;
}

// ---- errors -------------------------------------------------------------

json error_json(const std::string& category, const std::string& type, const std::string& code,
                const std::string& message) {
  json e = {{"category", category}, {"type", type}, {"message", message}};
  if (!code.empty()) e["code"] = code;
  return {{"error", e}};
}

} // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Flow cytometry CLL classification pipeline", "flowcll"};
  app.set_version_flag("--version", FLOWCLL_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  std::size_t threads = 0;
  std::string log_level = "info";
  app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  app.add_option("--log-level", log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  ParseArgs pa;
  auto* parse = app.add_subcommand("parse", "Dump FCS header, keywords and shape as JSON");
  parse->add_option("fcs", pa.path, "FCS file")->required();
  parse->add_flag("--keywords-only", pa.keywords_only, "Skip DATA decoding");

  FeaturizeArgs fa;
  auto* feat = app.add_subcommand("featurize", "Build the cohort feature cache from a manifest");
  feat->add_option("--manifest", fa.manifest, "Manifest CSV")->required();
  feat->add_option("--panel", fa.panel, "Panel JSON (default: 4 x 13 lymphoma panel)");
  feat->add_option("--out", fa.out, "Cache directory")->required();
  feat->add_flag("--skip-bad-rows", fa.skip_bad_rows, "Report bad rows instead of failing");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Split the cohort and train a model");
  train->add_option("--cohort", ta.cohort, "Cohort cache directory")->required();
  train->add_option("--kind", ta.kind, "gbt or rf")->capture_default_str();
  train->add_option("--params", ta.params, "Hyperparameters: JSON file or inline object");
  train->add_option("--seed", ta.seed, "Split and training seed")->capture_default_str();
  train->add_option("--train-fraction", ta.train_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train->add_option("--out", ta.out, "Output directory")->required();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Score a split subset; write metrics and ROC");
  evaluate->add_option("--model", ea.model)->required();
  evaluate->add_option("--cohort", ea.cohort)->required();
  evaluate->add_option("--split", ea.split, "Split record written by train")->required();
  evaluate->add_option("--subset", ea.subset)
      ->check(CLI::IsMember({"test", "train", "all"}))
      ->capture_default_str();
  evaluate->add_flag("--allow-train", ea.allow_train, "Permit scoring training cases");
  evaluate->add_option("--threshold", ea.threshold)->capture_default_str();
  evaluate->add_option("--out", ea.out, "Output directory")->required();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Score cases with a saved model");
  predict->add_option("--model", pr.model)->required();
  predict->add_option("--cohort", pr.cohort, "Cohort cache directory");
  predict->add_option("--manifest", pr.manifest, "Manifest CSV (featurized on the fly)");
  predict->add_option("--panel", pr.panel, "Panel JSON for --manifest");
  predict->add_option("--threshold", pr.threshold)->capture_default_str();
  predict->add_option("--out", pr.out, "Output JSON (default stdout)");

  CvArgs ca;
  auto* cv = app.add_subcommand("cv", "Repeated random train/test evaluation");
  cv->add_option("--cohort", ca.cohort)->required();
  cv->add_option("--kind", ca.kind)->capture_default_str();
  cv->add_option("--params", ca.params);
  cv->add_option("--seed", ca.seed)->capture_default_str();
  cv->add_option("--repeats", ca.repeats)->check(CLI::PositiveNumber)->capture_default_str();
  cv->add_option("--train-fraction", ca.train_fraction)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  cv->add_option("--out", ca.out, "Output JSON (default stdout)");

  SynthArgs sa;
  std::uint64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth_cmd->add_option("--plan", sa.plan, "Plan JSON (default: 53/44/19)");
  auto* seed_opt = synth_cmd->add_option("--seed", synth_seed, "Overrides the plan seed");
  synth_cmd->add_option("--out", sa.out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    // --help and --version land here too, with code 0.
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  const auto level = log_level == "error"  ? LogLevel::Error
                     : log_level == "warn" ? LogLevel::Warn
                     : log_level == "info" ? LogLevel::Info
                                           : LogLevel::Debug;
  const Logger log(err, level);
  parallel::set_threads(threads);
  log.debug("threads: " + std::to_string(parallel::current_threads()));
  if (seed_opt->count()) sa.seed = synth_seed;

  auto fail = [&](int code, const json& e) {
    err << e.dump() << '\n';
    return code;
  };
  try {
    if (*parse) return cmd_parse(pa, out, log);
    if (*feat) return cmd_featurize(fa, out, log);
    if (*train) return cmd_train(ta, out, log);
    if (*evaluate) return cmd_evaluate(ea, out, log);
    if (*predict) return cmd_predict(pr, out, log);
    if (*cv) return cmd_cv(ca, out, log);
    if (*synth_cmd) return cmd_synth(sa, out, log);
    return kUsage;
  } catch (const UsageError& e) {
    return fail(kUsage, error_json("usage", "UsageError", "", e.what()));
  } catch (const fcs::FcsError& e) {
    auto j = error_json("data", "FcsError", std::string(fcs::to_string(e.code())), e.what());
    if (e.offset()) j["error"]["offset"] = *e.offset();
    return fail(kDataError, j);
  } catch (const featurize::FeaturizeError& e) {
    return fail(kDataError, error_json("data", "FeaturizeError",
                                       std::string(featurize::to_string(e.code())), e.what()));
  } catch (const models::ModelError& e) {
    return fail(kDataError, error_json("data", "ModelError",
                                       std::string(models::to_string(e.code())), e.what()));
  } catch (const eval::EvalError& e) {
    return fail(kDataError, error_json("data", "EvalError",
                                       std::string(eval::to_string(e.code())), e.what()));
  } catch (const synth::SynthError& e) {
    return fail(kDataError, error_json("data", "SynthError", "", e.what()));
  } catch (const std::invalid_argument& e) {
    return fail(kDataError, error_json("data", "InvalidInput", "", e.what()));
  } catch (const json::exception& e) {
    return fail(kDataError, error_json("data", "JsonError", "", e.what()));
  } catch (const IoError& e) {
    return fail(kDataError, error_json("data", "IoError", "", e.what()));
  } catch (const fs::filesystem_error& e) {
    return fail(kDataError, error_json("data", "IoError", "", e.what()));
  } catch (const std::exception& e) {
    return fail(kInternal, error_json("internal", "InternalError", "", e.what()));
  }
}

} // namespace flowcll::cli
