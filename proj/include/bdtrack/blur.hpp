#pragma once

#include <cstddef>
#include <iosfwd>
#include <random>
#include <vector>

#include "bdtrack/image.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack {

/// Normalized linear motion-blur kernel: a rasterized line segment through the
/// center of a length x length grid.
struct BlurKernel {
  std::size_t length = 1;
  double angle = 0.0;           // radians, folded into [0, pi)
  std::vector<double> weights;  // row-major length x length, sums to 1

  double at(std::size_t row, std::size_t col) const { return weights[row * length + col]; }
  bool is_identity() const { return length == 1; }
};

/// Throws std::invalid_argument for even or zero length.
BlurKernel make_kernel(std::size_t length, double angle);

/// Channel-wise 2-D convolution with reflect padding. Same shape out.
Image apply_blur(const Image& img, const BlurKernel& k);

struct BlurPolicy {
  std::vector<std::size_t> lengths{3, 5, 7};
  bool fixed_angle = false;
  double angle = 0.0;  // used when fixed_angle
};

/// Length uniform over `policy.lengths`, angle uniform on [0, pi) unless fixed.
BlurKernel sample_blur(std::mt19937_64& rng, const BlurPolicy& policy);

/// Squared Frobenius distance between clean and blurred template features;
/// with `mean_reduction` the sum is divided by the element count.
Tensor blur_loss(const Tensor& clean, const Tensor& blurred, bool mean_reduction = false);

/// CSV dump: "length,angle" header line followed by one line per kernel row.
void write_kernel_csv(const BlurKernel& k, std::ostream& os);

}  // namespace bdtrack
