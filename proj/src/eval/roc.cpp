#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>

#include "flowcll/eval.hpp"

namespace flowcll::eval {

RocCurve roc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw EvalError(EvalErrc::LengthMismatch, "labels and scores differ in length");
  }
  std::size_t pos = 0;
  for (int y : labels) pos += y ? 1 : 0;
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw EvalError(EvalErrc::SingleClassInput, "ROC needs both classes");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  double twice_area = 0.0;  // in units of (1/neg) x (1/pos)
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    const std::size_t tp0 = tp, fp0 = fp;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] ? tp : fp) += 1;
      ++i;
    }
    // Integer trapezoid: exact until the final division.
    twice_area += static_cast<double>((fp - fp0) * (tp + tp0));
    curve.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  curve.auc = twice_area / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return curve;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "threshold,fpr,tpr\n";
  out << std::setprecision(17);
  for (const auto& p : curve.points) {
    if (std::isinf(p.threshold)) {
      out << "inf";
    } else {
      out << p.threshold;
    }
    out << ',' << p.fpr << ',' << p.tpr << '\n';
  }
}

} // namespace flowcll::eval
