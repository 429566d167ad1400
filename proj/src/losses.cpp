#include "bdtrack/losses.hpp"

#include <algorithm>
#include <cmath>

#include "bdtrack/ops.hpp"

namespace bdtrack {

double gaussian_radius(double height, double width, double min_overlap) {
  const double m = min_overlap;
  const double b1 = height + width;
  const double c1 = width * height * (1 - m) / (1 + m);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;

  const double b2 = 2 * (height + width);
  const double c2 = (1 - m) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16 * c2)) / 2;

  const double a3 = 4 * m;
  const double b3 = -2 * m * (height + width);
  const double c3 = (m - 1) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

TrainTarget make_train_target(const BBox& gt, std::size_t grid) {
  if (grid == 0) throw std::invalid_argument("make_train_target: empty grid");
  TrainTarget t;
  t.gt_box = gt;
  const double g = static_cast<double>(grid);
  auto cell = [&](double v) {
    const double c = std::floor(v * g);
    return static_cast<std::size_t>(std::clamp(c, 0.0, g - 1));
  };
  t.positive_col = cell(gt.cx);
  t.positive_row = cell(gt.cy);

  const double radius = std::max(0.0, std::floor(gaussian_radius(gt.h * g, gt.w * g)));
  const double sigma = (2 * radius + 1) / 6.0;
  std::vector<double> map(grid * grid);
  for (std::size_t r = 0; r < grid; ++r)
    for (std::size_t c = 0; c < grid; ++c) {
      const double dr = static_cast<double>(r) - static_cast<double>(t.positive_row);
      const double dc = static_cast<double>(c) - static_cast<double>(t.positive_col);
      map[r * grid + c] = std::exp(-(dr * dr + dc * dc) / (2 * sigma * sigma));
    }
  t.cls_map = Tensor::from({grid, grid}, std::move(map));
  return t;
}

Tensor focal_loss(const Tensor& score, const TrainTarget& target, double alpha, double beta) {
  if (score.shape() != target.cls_map.shape()) {
    throw DimensionError("focal_loss: score " + shape_str(score.shape()) + " vs target " +
                         shape_str(target.cls_map.shape()));
  }
  const std::size_t n = score.numel();
  const std::size_t pos = target.positive_row * score.dim(1) + target.positive_col;
  const auto y = target.cls_map.data();
  std::vector<double> pos_mask(n, 0.0), neg_weight(n);
  for (std::size_t i = 0; i < n; ++i) neg_weight[i] = i == pos ? 0.0 : std::pow(1.0 - y[i], beta);
  pos_mask[pos] = 1.0;

  Tensor p = clamp(score, kProbClamp, 1.0 - kProbClamp);
  Tensor one_minus_p = add_scalar(neg(p), 1.0);
  Tensor pos_term = mul(pow(one_minus_p, alpha), neg(log(p)));
  Tensor neg_term = mul(pow(p, alpha), neg(log(one_minus_p)));
  Tensor total = add(sum(mul(pos_term, Tensor::from(score.shape(), std::move(pos_mask)))),
                     sum(mul(neg_term, Tensor::from(score.shape(), std::move(neg_weight)))));
  return total;  // one positive per map
}

namespace {

Tensor field(const Tensor& box, std::size_t i) { return slice(box, 0, i, i + 1); }

void check_box_tensor(const Tensor& pred) {
  if (pred.rank() != 1 || pred.dim(0) != 4) throw DimensionError("box tensor must be [4], got " + shape_str(pred.shape()));
}

}  // namespace

Tensor giou_loss(const Tensor& pred, const BBox& gt) {
  check_box_tensor(pred);
  if (!(gt.w > 0 && gt.h > 0)) throw std::invalid_argument("giou_loss: ground-truth box has zero area");
  Tensor cx = field(pred, 0), cy = field(pred, 1), w = field(pred, 2), h = field(pred, 3);
  Tensor px0 = sub(cx, scale(w, 0.5)), px1 = add(cx, scale(w, 0.5));
  Tensor py0 = sub(cy, scale(h, 0.5)), py1 = add(cy, scale(h, 0.5));
  auto c = [](double v) { return Tensor::scalar(v); };
  Tensor gx0 = c(gt.x0()), gx1 = c(gt.x1()), gy0 = c(gt.y0()), gy1 = c(gt.y1());

  Tensor iw = relu(sub(minimum(px1, gx1), maximum(px0, gx0)));
  Tensor ih = relu(sub(minimum(py1, gy1), maximum(py0, gy0)));
  Tensor inter = mul(iw, ih);
  Tensor uni = sub(add(mul(w, h), c(gt.area())), inter);
  Tensor iou_t = div(inter, uni);
  Tensor cw = sub(maximum(px1, gx1), minimum(px0, gx0));
  Tensor ch = sub(maximum(py1, gy1), minimum(py0, gy0));
  Tensor carea = mul(cw, ch);
  Tensor giou_t = sub(iou_t, div(sub(carea, uni), carea));
  return add_scalar(neg(giou_t), 1.0);
}

Tensor l1_loss(const Tensor& pred, const BBox& gt) {
  check_box_tensor(pred);
  return mean(abs(sub(pred, Tensor::from({4}, {gt.cx, gt.cy, gt.w, gt.h}))));
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double ih = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double inter = iw * ih;
  // Areas from the same corner arithmetic as the overlap, so iou(b, b) == 1 exactly.
  const double uni = (a.x1() - a.x0()) * (a.y1() - a.y0()) + (b.x1() - b.x0()) * (b.y1() - b.y0()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) {
  const double cw = std::max(a.x1(), b.x1()) - std::min(a.x0(), b.x0());
  const double ch = std::max(a.y1(), b.y1()) - std::min(a.y0(), b.y0());
  const double carea = cw * ch;
  const double iw = std::max(0.0, std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0()));
  const double ih = std::max(0.0, std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0()));
  const double uni = a.area() + b.area() - iw * ih;
  return iou(a, b) - (carea - uni) / carea;
}

Tensor overall_loss(const Tensor& cls, const Tensor& iou_l, const Tensor& l1, const Tensor& br, const Tensor& spar,
                    const LossWeights& w) {
  for (const Tensor* t : {&cls, &iou_l, &l1, &br, &spar}) {
    if (t->numel() != 1) throw DimensionError("overall_loss components must be scalars");
    if (!all_finite(*t)) throw NumericError("overall_loss: non-finite component");
  }
  Tensor total = add(cls, scale(iou_l, w.eta_iou));
  total = add(total, scale(l1, w.eta_l1));
  total = add(total, scale(br, w.rho));
  return add(total, scale(spar, w.gamma));
}

double overall_loss(double cls, double iou_l, double l1, double br, double spar, const LossWeights& w) {
  for (double v : {cls, iou_l, l1, br, spar}) {
    if (!std::isfinite(v)) throw NumericError("overall_loss: non-finite component");
  }
  return cls + w.eta_iou * iou_l + w.eta_l1 * l1 + w.rho * br + w.gamma * spar;
}

}  // namespace bdtrack
