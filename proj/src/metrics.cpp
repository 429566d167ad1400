#include "bdtrack/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "bdtrack/losses.hpp"

namespace bdtrack {

double center_error(const BBox& a, const BBox& b) { return std::hypot(a.cx - b.cx, a.cy - b.cy); }

MetricReport evaluate(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gt.size()) + " ground-truth boxes");
  }
  if (pred.empty()) throw std::invalid_argument("evaluate: no boxes");

  MetricReport r;
  r.precision_curve.assign(kPrecisionThresholds, 0.0);
  r.success_curve.assign(kSuccessThresholds, 0.0);
  const double n = static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double cle = center_error(pred[i], gt[i]);
    const double o = iou(pred[i], gt[i]);
    for (std::size_t t = 0; t < kPrecisionThresholds; ++t) {
      if (cle <= static_cast<double>(t)) r.precision_curve[t] += 1.0;
    }
    for (std::size_t t = 0; t < kSuccessThresholds; ++t) {
      if (o >= static_cast<double>(t) / static_cast<double>(kSuccessThresholds - 1)) r.success_curve[t] += 1.0;
    }
  }
  double auc = 0.0;
  for (auto& v : r.precision_curve) v /= n;
  for (auto& v : r.success_curve) {
    v /= n;
    auc += v;
  }
  r.precision_at_20 = r.precision_curve[20];
  r.success_auc = auc / static_cast<double>(kSuccessThresholds);
  return r;
}

}  // namespace bdtrack
