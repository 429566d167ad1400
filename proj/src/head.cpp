#include "bdtrack/head.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "bdtrack/ops.hpp"

namespace bdtrack {

namespace {

constexpr std::array<const char*, 3> kBranches{"score", "offset", "size"};
constexpr std::size_t kHiddenLayers = 3;

std::string head_name(const char* branch, const std::string& leaf) { return std::string("head.") + branch + "." + leaf; }

std::size_t branch_out(std::size_t b) { return b == 0 ? 1 : 2; }

}  // namespace

void init_head_params(ParamStore& params, const ViTConfig& cfg) {
  const std::size_t d = cfg.dim;
  const std::array<std::size_t, 4> widths{d, d / 2, d / 4, d / 8};
  for (std::size_t b = 0; b < kBranches.size(); ++b) {
    const char* br = kBranches[b];
    for (std::size_t i = 0; i < kHiddenLayers; ++i) {
      const std::string idx = std::to_string(i);
      params.add(head_name(br, "conv" + idx + ".weight"), {widths[i + 1], widths[i], 3, 3}, Init::TruncNormal);
      params.add(head_name(br, "conv" + idx + ".bias"), {widths[i + 1]}, Init::Zeros);
      params.add(head_name(br, "norm" + idx + ".gain"), {widths[i + 1], 1}, Init::Ones);
      params.add(head_name(br, "norm" + idx + ".bias"), {widths[i + 1], 1}, Init::Zeros);
    }
    params.add(head_name(br, "out.weight"), {branch_out(b), widths[3], 3, 3}, Init::TruncNormal);
    params.add(head_name(br, "out.bias"), {branch_out(b)}, Init::Zeros);
  }
}

Tensor channel_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const std::size_t C = x.dim(0);
  Tensor flat = reshape(x, {C, x.numel() / C});
  Tensor y = add(mul(layernorm(flat, Tensor{}, Tensor{}, eps), gain), bias);
  return reshape(y, x.shape());
}

HeadOutput head_forward(const Tensor& search_tokens, const ParamStore& params, const ViTConfig& cfg) {
  if (search_tokens.rank() != 2 || search_tokens.dim(1) != cfg.dim) {
    throw DimensionError("head expects [K_x x d] tokens, got " + shape_str(search_tokens.shape()));
  }
  const std::size_t kx = search_tokens.dim(0);
  const auto g = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(kx))));
  if (g * g != kx) throw DimensionError("search token count " + std::to_string(kx) + " is not a perfect square");

  Tensor fmap = reshape(transpose(search_tokens), {cfg.dim, g, g});
  std::array<Tensor, 3> outs;
  for (std::size_t b = 0; b < kBranches.size(); ++b) {
    const char* br = kBranches[b];
    Tensor x = fmap;
    for (std::size_t i = 0; i < kHiddenLayers; ++i) {
      const std::string idx = std::to_string(i);
      x = conv2d(x, params.get(head_name(br, "conv" + idx + ".weight")),
                 params.get(head_name(br, "conv" + idx + ".bias")), {1, 1});
      x = channel_norm(x, params.get(head_name(br, "norm" + idx + ".gain")),
                       params.get(head_name(br, "norm" + idx + ".bias")));
      x = relu(x);
    }
    x = conv2d(x, params.get(head_name(br, "out.weight")), params.get(head_name(br, "out.bias")), {1, 1});
    outs[b] = sigmoid(x);
  }
  return {reshape(outs[0], {g, g}), outs[1], outs[2], g};
}

namespace {

DecodedBox decode_at(const HeadOutput& out, std::size_t best, double penalized) {
  const std::size_t g = out.grid;
  const std::size_t plane = g * g;
  DecodedBox d;
  d.row = best / g;
  d.col = best % g;
  d.penalized_score = penalized;
  d.peak_score = out.score.data()[best];
  const auto o = out.offset.data();
  const auto s = out.size.data();
  const double gd = static_cast<double>(g);
  d.box.cx = (static_cast<double>(d.col) + o[best]) / gd;
  d.box.cy = (static_cast<double>(d.row) + o[plane + best]) / gd;
  d.box.w = s[best];
  d.box.h = s[plane + best];
  return d;
}

}  // namespace

DecodedBox decode_box(const HeadOutput& out) {
  const auto p = out.score.data();
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return decode_at(out, best, p[best]);
}

DecodedBox decode_box_windowed(const HeadOutput& out, const Tensor& window, double blend) {
  if (window.shape() != out.score.shape()) {
    throw DimensionError("window " + shape_str(window.shape()) + " does not match score map " +
                         shape_str(out.score.shape()));
  }
  const auto p = out.score.data();
  const auto w = window.data();
  std::size_t best = 0;
  double best_v = -1.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double v = p[i] * ((1.0 - blend) + blend * w[i]);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  return decode_at(out, best, best_v);
}

Tensor hanning_window(std::size_t grid) {
  if (grid == 0) throw std::invalid_argument("hanning_window: empty grid");
  // Hann of length grid + 2 with the zero endpoints dropped.
  std::vector<double> h(grid);
  const double n = static_cast<double>(grid + 1);
  for (std::size_t i = 0; i < (grid + 1) / 2; ++i) {
    h[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) / n);
    h[grid - 1 - i] = h[i];
  }
  std::vector<double> win(grid * grid);
  for (std::size_t r = 0; r < grid; ++r)
    for (std::size_t c = 0; c < grid; ++c) win[r * grid + c] = h[r] * h[c];
  return Tensor::from({grid, grid}, std::move(win));
}

Tensor box_at_cell(const HeadOutput& out, std::size_t row, std::size_t col) {
  const std::size_t g = out.grid;
  if (row >= g || col >= g) throw std::out_of_range("box_at_cell: cell outside grid");
  const std::size_t i = row * g + col, plane = g * g;
  const double gd = static_cast<double>(g);
  const std::array<std::size_t, 2> xy{i, plane + i};
  Tensor off = gather(out.offset, xy);
  Tensor sz = gather(out.size, xy);
  Tensor cx = add_scalar(scale(slice(off, 0, 0, 1), 1.0 / gd), static_cast<double>(col) / gd);
  Tensor cy = add_scalar(scale(slice(off, 0, 1, 2), 1.0 / gd), static_cast<double>(row) / gd);
  return concat({cx, cy, sz}, 0);
}

}  // namespace bdtrack
