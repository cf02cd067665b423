#include "flowcll/eval.hpp"
#include "flowcll/seed.hpp"

namespace flowcll::eval {

namespace {

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json to_json(const Summary& s) {
  return {{"mean", opt(s.mean)}, {"std", opt(s.std)}, {"n", s.n}};
}

} // namespace

Evaluation evaluate_model(const models::Model& model,
                          const featurize::CohortMatrix& cohort,
                          std::span<const std::string> ids, double threshold) {
  Evaluation ev;
  auto add = [&](const featurize::CaseVector& c) {
    ev.case_ids.push_back(c.case_id);
    ev.labels.push_back(c.binary_label);
    ev.scores.push_back(models::predict_proba(model, c.features));
  };
  if (ids.empty()) {
    for (const auto& c : cohort.cases) add(c);
  } else {
    for (const auto& id : ids) {
      auto idx = cohort.index_of(id);
      if (!idx) throw EvalError(EvalErrc::UnknownCase, "case '" + id + "' not in cohort");
      add(cohort.cases[*idx]);
    }
  }
  ev.confusion = confusion(ev.labels, ev.scores, threshold);
  ev.metrics = metrics(ev.confusion);
  const bool both = ev.confusion.tp + ev.confusion.fn > 0 && ev.confusion.tn + ev.confusion.fp > 0;
  if (both) ev.roc = roc(ev.labels, ev.scores);
  return ev;
}

CvReport cross_validate(const featurize::CohortMatrix& cohort,
                        const models::ModelSpec& spec, std::size_t n_repeats,
                        double train_fraction, std::uint64_t seed) {
  CvReport report;
  report.model_kind = std::holds_alternative<models::GbtParams>(spec) ? "gbt" : "rf";
  report.n_repeats = n_repeats;
  report.train_fraction = train_fraction;
  report.seed = seed;

  std::vector<std::optional<double>> acc, f1, auc;
  for (std::size_t r = 0; r < n_repeats; ++r) {
    const auto s = repeat_seed(seed, r);
    RepeatResult rr;
    rr.repeat = r;
    rr.seed = s;
    try {
      const auto split = featurize::split_cohort(cohort, train_fraction, s);
      const auto train = models::make_training_set(cohort, split.train_ids);
      const auto model = models::train_model(spec, train, s);
      const auto ev = evaluate_model(model, cohort, split.test_ids);
      rr.n_train = split.train_ids.size();
      rr.n_test = split.test_ids.size();
      rr.confusion = ev.confusion;
      rr.metrics = ev.metrics;
      if (ev.roc) rr.auc = ev.roc->auc;
    } catch (const std::exception& e) {
      throw std::runtime_error("cross-validation repeat " + std::to_string(r) + ": " +
                               e.what());
    }
    acc.push_back(rr.metrics.accuracy);
    f1.push_back(rr.metrics.f1);
    auc.push_back(rr.auc);
    report.repeats.push_back(std::move(rr));
  }
  report.accuracy = summarize(acc);
  report.f1 = summarize(f1);
  report.auc = summarize(auc);
  return report;
}

nlohmann::json to_json(const RepeatResult& r) {
  return {{"repeat", r.repeat},
          {"seed", r.seed},
          {"n_train", r.n_train},
          {"n_test", r.n_test},
          {"confusion", to_json(r.confusion)},
          {"metrics", to_json(r.metrics)},
          {"auc", opt(r.auc)}};
}

nlohmann::json to_json(const CvReport& report) {
  nlohmann::json repeats = nlohmann::json::array();
  for (const auto& r : report.repeats) repeats.push_back(to_json(r));
  return {{"protocol", "monte-carlo cross-validation: independent random train/test splits"},
          {"model_kind", report.model_kind},
          {"n_repeats", report.n_repeats},
          {"train_fraction", report.train_fraction},
          {"seed", report.seed},
          {"std_convention", "sample (n-1)"},
          {"accuracy", to_json(report.accuracy)},
          {"f1", to_json(report.f1)},
          {"auc", to_json(report.auc)},
          {"repeats", repeats}};
}

} // namespace flowcll::eval
