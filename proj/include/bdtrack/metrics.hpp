#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bdtrack/head.hpp"

namespace bdtrack {

constexpr std::size_t kPrecisionThresholds = 51;  // CLE 0..50 px
constexpr std::size_t kSuccessThresholds = 51;    // IoU 0, 0.02, ..., 1

struct MetricReport {
  std::vector<double> precision_curve;  // [i] = fraction with CLE <= i px
  double precision_at_20 = 0;
  std::vector<double> success_curve;  // [i] = fraction with IoU >= i / 50
  double success_auc = 0;
  double mean_L_e = 0;
  double mean_flops = 0;
};

double center_error(const BBox& a, const BBox& b);

/// Throws std::invalid_argument on length mismatch or empty input.
MetricReport evaluate(std::span<const BBox> pred, std::span<const BBox> gt);

}  // namespace bdtrack
