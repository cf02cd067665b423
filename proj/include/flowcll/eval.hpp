#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowcll/featurize.hpp"
#include "flowcll/models/model_io.hpp"

namespace flowcll::eval {

enum class EvalErrc { LengthMismatch, EmptyInput, SingleClassInput, UnknownCase };

std::string_view to_string(EvalErrc code);

class EvalError : public std::runtime_error {
 public:
  EvalError(EvalErrc code, const std::string& what);
  EvalErrc code() const noexcept { return code_; }

 private:
  EvalErrc code_;
};

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// A case is called positive iff score >= threshold.
ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold = 0.5);

/// Ratios with an explicit "undefined" (nullopt) for 0/0.
struct MetricReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  std::optional<double> accuracy;
  std::optional<double> f1;
};

MetricReport metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  /// Score cut producing this point; +inf for the (0,0) origin.
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

/// One point per distinct score (descending), ties grouped, plus the
/// (0,0) origin; AUC by the trapezoid rule. Throws SingleClassInput.
RocCurve roc(std::span<const int> labels, std::span<const double> scores);

/// CSV with header `threshold,fpr,tpr`.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

nlohmann::json to_json(const ConfusionMatrix& cm);
nlohmann::json to_json(const MetricReport& m);

struct Evaluation {
  std::vector<std::string> case_ids;
  std::vector<int> labels;
  std::vector<double> scores;
  ConfusionMatrix confusion;
  MetricReport metrics;
  /// Absent when the evaluated cases hold only one class.
  std::optional<RocCurve> roc;
};

/// Scores the listed cases of `cohort` (all cases when ids is empty).
Evaluation evaluate_model(const models::Model& model,
                          const featurize::CohortMatrix& cohort,
                          std::span<const std::string> ids = {},
                          double threshold = 0.5);

struct RepeatResult {
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix confusion;
  MetricReport metrics;
  std::optional<double> auc;
};

struct Summary {
  std::optional<double> mean;
  /// Sample standard deviation (n - 1 denominator).
  std::optional<double> std;
  std::size_t n = 0;
};

/// Mean and sample standard deviation over the defined values.
Summary summarize(std::span<const std::optional<double>> values);

/// Repeated random-split (Monte-Carlo) cross-validation.
struct CvReport {
  std::string model_kind;
  std::size_t n_repeats = 0;
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  std::vector<RepeatResult> repeats;
  Summary accuracy;
  Summary f1;
  Summary auc;
};

/// Repeat r splits with repeat_seed(seed, r) and trains with the same seed,
/// so repeat 0 is exactly the single split_cohort + train + evaluate path.
CvReport cross_validate(const featurize::CohortMatrix& cohort,
                        const models::ModelSpec& spec, std::size_t n_repeats = 10,
                        double train_fraction = 0.8, std::uint64_t seed = 0);

nlohmann::json to_json(const RepeatResult& r);
nlohmann::json to_json(const CvReport& report);

} // namespace flowcll::eval
