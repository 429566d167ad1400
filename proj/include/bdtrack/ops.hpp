#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bdtrack/tensor.hpp"

namespace bdtrack {

// ---------------------------------------------------------------------------
// Elementwise
//
// Binary operations broadcast numpy-style: shapes are aligned from the
// trailing axis and an extent of 1 (or a missing leading axis) stretches.

enum class BinaryOp { Add, Sub, Mul, Div, Min, Max };
enum class UnaryOp { Neg, Gelu, Sigmoid, Relu, Sqrt, Square, Log, Exp, Abs };

Tensor elementwise(BinaryOp op, const Tensor& a, const Tensor& b);
Tensor elementwise(UnaryOp op, const Tensor& t);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& t);
Tensor gelu(const Tensor& t);  // exact erf form
Tensor sigmoid(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor square(const Tensor& t);
Tensor log(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor abs(const Tensor& t);

Tensor scale(const Tensor& t, double factor);
Tensor add_scalar(const Tensor& t, double value);
Tensor pow(const Tensor& t, double exponent);
/// Values clamped to [lo, hi]; gradient is zero where clamping was active.
Tensor clamp(const Tensor& t, double lo, double hi);

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);

// ---------------------------------------------------------------------------
// Linear algebra and layout

/// [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x [m x k] * w [k x n] + bias [n].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
Tensor transpose(const Tensor& t);
Tensor reshape(const Tensor& t, Shape shape);
/// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& t, std::size_t axis, std::size_t begin, std::size_t end);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Flat-index gather into a 1-D tensor.
Tensor gather(const Tensor& t, std::span<const std::size_t> flat_indices);

// ---------------------------------------------------------------------------
// Normalization and convolution

Tensor softmax(const Tensor& t, std::size_t axis);
/// Normalizes over the last axis. `gain`/`bias` may be undefined (no affine).
Tensor layernorm(const Tensor& t, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;  // zero padding on every side
};

/// input [C x H x W], kernel [O x C x kh x kw], bias [O] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, Conv2dOptions opts = {});

// ---------------------------------------------------------------------------

/// True when every value is finite.
bool all_finite(const Tensor& t);

}  // namespace bdtrack
