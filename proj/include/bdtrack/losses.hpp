#pragma once

#include <cstddef>

#include "bdtrack/config.hpp"
#include "bdtrack/head.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack {

/// Supervision for one search crop.
struct TrainTarget {
  BBox gt_box;     // normalized search coordinates
  Tensor cls_map;  // [G x G] Gaussian heat map, 1 at the positive cell
  std::size_t positive_row = 0;
  std::size_t positive_col = 0;
};

/// CornerNet-style radius for a box of `height` x `width` grid cells.
double gaussian_radius(double height, double width, double min_overlap = 0.7);

/// Positive cell = floor(center * G); Gaussian bump with sigma = (2r + 1) / 6.
TrainTarget make_train_target(const BBox& gt, std::size_t grid);

constexpr double kProbClamp = 1e-7;

/// Penalty-reduced focal loss over the score map, normalized by the single
/// positive.
Tensor focal_loss(const Tensor& score, const TrainTarget& target, double alpha = 2.0, double beta = 4.0);

/// 1 - GIoU. `pred` is [cx, cy, w, h]. Throws std::invalid_argument when gt has
/// zero area.
Tensor giou_loss(const Tensor& pred, const BBox& gt);
/// Mean absolute difference over (cx, cy, w, h).
Tensor l1_loss(const Tensor& pred, const BBox& gt);

double iou(const BBox& a, const BBox& b);
double giou(const BBox& a, const BBox& b);

/// L_cls + eta_iou L_iou + eta_l1 L_l1 + rho L_br + gamma L_spar. Throws
/// NumericError on non-finite components.
Tensor overall_loss(const Tensor& cls, const Tensor& iou, const Tensor& l1, const Tensor& br, const Tensor& spar,
                    const LossWeights& w);
double overall_loss(double cls, double iou, double l1, double br, double spar, const LossWeights& w);

}  // namespace bdtrack
