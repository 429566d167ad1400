#pragma once

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "bdtrack/config.hpp"
#include "bdtrack/image.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(shape), std::move(v));
}

inline Image random_image(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Image img(c, h, w);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

/// Small geometry that keeps model-level tests fast.
inline ViTConfig tiny_config() {
  ViTConfig c;
  c.depth = 4;
  c.dim = 16;
  c.heads = 2;
  c.patch = 4;
  c.template_side = 8;
  c.search_side = 16;
  c.n_enf = 2;
  return c;
}

inline void expect_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.data()[i], expected[i], tol) << "index " << i;
}

}  // namespace bdtrack::testing
