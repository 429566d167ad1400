#include "bdtrack/blur.hpp"

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "bdtrack/ops.hpp"

namespace bdtrack {

BlurKernel make_kernel(std::size_t length, double angle) {
  if (length == 0 || length % 2 == 0) {
    throw std::invalid_argument("blur kernel length must be odd and positive, got " + std::to_string(length));
  }
  BlurKernel k;
  k.length = length;
  k.angle = std::fmod(angle, std::numbers::pi);
  if (k.angle < 0) k.angle += std::numbers::pi;
  k.weights.assign(length * length, 0.0);

  const long c = static_cast<long>(length / 2);
  const double half = static_cast<double>(c);
  const long dx = std::lround(half * std::cos(k.angle));
  const long dy = std::lround(half * std::sin(k.angle));

  // Bresenham from the center to (c + dx, c + dy), mirrored through the
  // center so the segment has no net shift. x is the column.
  long x = c, y = c;
  const long adx = std::labs(dx), ady = -std::labs(dy);
  const long sx = dx >= 0 ? 1 : -1, sy = dy >= 0 ? 1 : -1;
  long err = adx + ady;
  const auto mark = [&](long col, long row) {
    k.weights[static_cast<std::size_t>(row) * length + static_cast<std::size_t>(col)] = 1.0;
  };
  for (;;) {
    mark(x, y);
    mark(2 * c - x, 2 * c - y);
    if (x == c + dx && y == c + dy) break;
    const long e2 = 2 * err;
    if (e2 >= ady) {
      err += ady;
      x += sx;
    }
    if (e2 <= adx) {
      err += adx;
      y += sy;
    }
  }

  double total = 0.0;
  for (double w : k.weights) total += w;
  for (double& w : k.weights) w /= total;
  return k;
}

namespace {

std::size_t reflect(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i = std::labs(i) % period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

}  // namespace

Image apply_blur(const Image& img, const BlurKernel& k) {
  if (k.is_identity()) return img;
  const std::size_t r = k.length / 2;
  const std::size_t H = img.height, W = img.width;
  const std::size_t Hp = H + 2 * r, Wp = W + 2 * r;

  // Convolution = correlation with the kernel rotated by 180 degrees.
  std::vector<double> flipped(k.weights.rbegin(), k.weights.rend());
  Tensor kernel = Tensor::from({1, 1, k.length, k.length}, std::move(flipped));

  Image out(img.channels, H, W);
  for (std::size_t c = 0; c < img.channels; ++c) {
    std::vector<double> padded(Hp * Wp);
    for (std::size_t y = 0; y < Hp; ++y) {
      const std::size_t sy = reflect(static_cast<long>(y) - static_cast<long>(r), H);
      for (std::size_t x = 0; x < Wp; ++x) {
        padded[y * Wp + x] = img.at(c, sy, reflect(static_cast<long>(x) - static_cast<long>(r), W));
      }
    }
    Tensor res = conv2d(Tensor::from({1, Hp, Wp}, std::move(padded)), kernel, Tensor{});
    const auto v = res.data();
    std::copy(v.begin(), v.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(c * H * W));
  }
  return out;
}

BlurKernel sample_blur(std::mt19937_64& rng, const BlurPolicy& policy) {
  if (policy.lengths.empty()) throw std::invalid_argument("blur policy has no admissible lengths");
  std::uniform_int_distribution<std::size_t> pick(0, policy.lengths.size() - 1);
  const std::size_t length = policy.lengths[pick(rng)];
  double angle = policy.angle;
  if (!policy.fixed_angle) angle = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
  return make_kernel(length, angle);
}

Tensor blur_loss(const Tensor& clean, const Tensor& blurred, bool mean_reduction) {
  if (clean.shape() != blurred.shape()) {
    throw DimensionError("blur_loss shape mismatch: " + shape_str(clean.shape()) + " vs " +
                         shape_str(blurred.shape()));
  }
  Tensor sq = square(sub(clean, blurred));
  return mean_reduction ? mean(sq) : sum(sq);
}

void write_kernel_csv(const BlurKernel& k, std::ostream& os) {
  os << std::setprecision(17) << k.length << ',' << k.angle << '\n';
  for (std::size_t r = 0; r < k.length; ++r) {
    for (std::size_t c = 0; c < k.length; ++c) os << (c ? "," : "") << k.at(r, c);
    os << '\n';
  }
}

}  // namespace bdtrack
