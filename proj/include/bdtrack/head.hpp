#pragma once

#include <cstddef>
#include <string>

#include "bdtrack/config.hpp"
#include "bdtrack/param_store.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack {

/// Axis-aligned box in center form. Inside the model it is normalized to the
/// search crop; the tracker also uses it for frame pixels.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const { return cx - w / 2; }
  double y0() const { return cy - h / 2; }
  double x1() const { return cx + w / 2; }
  double y1() const { return cy + h / 2; }
  double area() const { return w * h; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Head maps over the G x G search grid.
struct HeadOutput {
  Tensor score;   // p: [G x G]
  Tensor offset;  // o: [2 x G x G], channel 0 = x, 1 = y, in cells
  Tensor size;    // s: [2 x G x G], channel 0 = w, 1 = h, normalized
  std::size_t grid = 0;
};

struct DecodedBox {
  BBox box;
  double peak_score = 0.0;       // raw p at the selected cell
  double penalized_score = 0.0;  // value that won the argmax
  std::size_t row = 0;
  std::size_t col = 0;
};

void init_head_params(ParamStore& params, const ViTConfig& cfg);

/// Per-channel normalization over the spatial map of one sample, then a
/// per-channel affine. x [C x H x W], gain/bias [C x 1].
Tensor channel_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Search tokens [K_x x d] -> three sigmoid-terminated conv branches.
HeadOutput head_forward(const Tensor& search_tokens, const ParamStore& params, const ViTConfig& cfg);

/// argmax of p (ties: lowest row-major index), center = (cell + offset) / G,
/// size read from s at the same cell.
DecodedBox decode_box(const HeadOutput& out);

/// Same as decode_box but the argmax runs over p * ((1 - blend) + blend * window).
/// Offset and size are read from the raw maps at the penalized argmax.
DecodedBox decode_box_windowed(const HeadOutput& out, const Tensor& window, double blend = 1.0);

/// Separable Hann window over a G x G grid, strictly positive and exactly
/// symmetric, peaking at the center.
Tensor hanning_window(std::size_t grid);

/// Differentiable [cx, cy, w, h] read at a given cell.
Tensor box_at_cell(const HeadOutput& out, std::size_t row, std::size_t col);

}  // namespace bdtrack
