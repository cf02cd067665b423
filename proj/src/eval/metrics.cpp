#include <cmath>

#include "flowcll/eval.hpp"

namespace flowcll::eval {

std::string_view to_string(EvalErrc code) {
  switch (code) {
    case EvalErrc::LengthMismatch: return "LengthMismatch";
    case EvalErrc::EmptyInput: return "EmptyInput";
    case EvalErrc::SingleClassInput: return "SingleClassInput";
    case EvalErrc::UnknownCase: return "UnknownCase";
  }
  return "Unknown";
}

EvalError::EvalError(EvalErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> scores,
                          double threshold) {
  if (labels.size() != scores.size()) {
    throw EvalError(EvalErrc::LengthMismatch,
                    std::to_string(labels.size()) + " labels vs " +
                        std::to_string(scores.size()) + " scores");
  }
  if (labels.empty()) throw EvalError(EvalErrc::EmptyInput, "no cases");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool called = scores[i] >= threshold;
    if (labels[i]) {
      ++(called ? cm.tp : cm.fn);
    } else {
      ++(called ? cm.fp : cm.tn);
    }
  }
  return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

} // namespace

MetricReport metrics(const ConfusionMatrix& cm) {
  MetricReport m;
  m.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  m.ppv = ratio(cm.tp, cm.tp + cm.fp);
  m.npv = ratio(cm.tn, cm.tn + cm.fn);
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return m;
}

nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
}

nlohmann::json to_json(const MetricReport& m) {
  return {{"sensitivity", opt(m.sensitivity)}, {"specificity", opt(m.specificity)},
          {"ppv", opt(m.ppv)},                 {"npv", opt(m.npv)},
          {"accuracy", opt(m.accuracy)},       {"f1", opt(m.f1)}};
}

Summary summarize(std::span<const std::optional<double>> values) {
  Summary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++s.n;
  }
  if (s.n == 0) return s;
  const double mean = sum / static_cast<double>(s.n);
  s.mean = mean;
  if (s.n < 2) return s;
  double ss = 0.0;
  for (const auto& v : values) {
    if (v) ss += (*v - mean) * (*v - mean);
  }
  s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

} // namespace flowcll::eval
