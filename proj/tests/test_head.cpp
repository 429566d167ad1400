#include <gtest/gtest.h>

#include "bdtrack/errors.hpp"
#include "bdtrack/grad_check.hpp"
#include "bdtrack/head.hpp"
#include "bdtrack/ops.hpp"
#include "test_util.hpp"

using namespace bdtrack;
using bdtrack::testing::random_tensor;
using bdtrack::testing::tiny_config;

namespace {

HeadOutput planted(std::size_t g, std::size_t row, std::size_t col, double ox, double oy, double w, double h) {
  std::vector<double> p(g * g, 0.1), o(2 * g * g, 0.0), s(2 * g * g, 0.3);
  const std::size_t i = row * g + col;
  p[i] = 1.0;
  o[i] = ox;
  o[g * g + i] = oy;
  s[i] = w;
  s[g * g + i] = h;
  return {Tensor::from({g, g}, p), Tensor::from({2, g, g}, o), Tensor::from({2, g, g}, s), g};
}

HeadOutput uniform(std::size_t g) {
  return {Tensor::full({g, g}, 0.5), Tensor::zeros({2, g, g}), Tensor::full({2, g, g}, 0.2), g};
}

}  // namespace

TEST(HeadForward, ShapesAndRange) {
  ViTConfig c = tiny_config();
  ParamStore p(2);
  init_head_params(p, c);
  std::mt19937_64 rng(1);
  auto out = head_forward(random_tensor({c.search_tokens(), c.dim}, rng, -2, 2), p, c);
  const std::size_t g = c.search_grid();
  EXPECT_EQ(out.grid, g);
  EXPECT_EQ(out.score.shape(), (Shape{g, g}));
  EXPECT_EQ(out.offset.shape(), (Shape{2, g, g}));
  EXPECT_EQ(out.size.shape(), (Shape{2, g, g}));
  for (const Tensor* t : {&out.score, &out.offset, &out.size})
    for (double v : t->data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(HeadForward, ZeroWeightsGiveHalf) {
  ViTConfig c = tiny_config();
  ParamStore p(2);
  init_head_params(p, c);
  for (auto& [_, t] : p)
    for (auto& v : t.mutable_data()) v = 0.0;
  auto out = head_forward(Tensor::zeros({c.search_tokens(), c.dim}), p, c);
  for (double v : out.score.data()) EXPECT_EQ(v, 0.5);
}

TEST(HeadForward, NonSquareTokenCountThrows) {
  ViTConfig c = tiny_config();
  ParamStore p(2);
  init_head_params(p, c);
  EXPECT_THROW(head_forward(Tensor::zeros({15, c.dim}), p, c), DimensionError);
}

TEST(HeadForward, BranchGradients) {
  ViTConfig c = tiny_config();
  c.dim = 8;
  c.heads = 2;
  ParamStore p(3);
  init_head_params(p, c);
  for (auto& [_, t] : p)
    for (auto& v : t.mutable_data()) v += 0.3 * std::sin(static_cast<double>(&v - t.mutable_data().data()) + 1.0);
  std::mt19937_64 rng(5);
  const Tensor tokens = random_tensor({c.search_tokens(), c.dim}, rng);
  const Tensor mix = random_tensor({2, 4, 4}, rng);
  auto r = grad_check(
      [&](const Tensor& x) {
        auto o = head_forward(x, p, c);
        return add(add(sum(square(o.score)), sum(mul(o.offset, mix))), sum(o.size));
      },
      tokens);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
}

TEST(ChannelNorm, NormalizesEachChannel) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({3, 4, 5}, rng, -5, 5);
  const Tensor y = channel_norm(x, Tensor::full({3, 1}, 1.0), Tensor::zeros({3, 1}), 1e-12);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 20; ++i) m += y.data()[c * 20 + i] / 20;
    for (std::size_t i = 0; i < 20; ++i) v += std::pow(y.data()[c * 20 + i] - m, 2) / 20;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-9);
  }
}

TEST(Decode, PlantedPeak) {
  auto d = decode_box(planted(8, 2, 3, 0.0, 0.0, 0.5, 0.25));
  EXPECT_EQ(d.box.cx, 3.0 / 8);
  EXPECT_EQ(d.box.cy, 2.0 / 8);
  EXPECT_EQ(d.box.w, 0.5);
  EXPECT_EQ(d.box.h, 0.25);
  EXPECT_EQ(d.peak_score, 1.0);
}

TEST(Decode, OffsetOneShiftsOneCell) {
  auto a = decode_box(planted(8, 2, 3, 0.0, 0.0, 0.5, 0.25));
  auto b = decode_box(planted(8, 2, 3, 1.0, 1.0, 0.5, 0.25));
  EXPECT_DOUBLE_EQ(b.box.cx - a.box.cx, 1.0 / 8);
  EXPECT_DOUBLE_EQ(b.box.cy - a.box.cy, 1.0 / 8);
}

TEST(Decode, UniformTiesGoToFirstCell) {
  auto d = decode_box(uniform(6));
  EXPECT_EQ(d.row, 0u);
  EXPECT_EQ(d.col, 0u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(decode_box(uniform(6)).row, 0u);
}

TEST(HanningWindow, SymmetricPositivePeaked) {
  for (std::size_t g : {1, 2, 5, 8, 16}) {
    const Tensor w = hanning_window(g);
    for (std::size_t r = 0; r < g; ++r)
      for (std::size_t c = 0; c < g; ++c) {
        EXPECT_GT(w.at({r, c}), 0.0);
        EXPECT_LE(w.at({r, c}), 1.0);
        EXPECT_EQ(w.at({r, c}), w.at({g - 1 - r, g - 1 - c}));
        EXPECT_EQ(w.at({r, c}), w.at({c, r}));
      }
  }
}

TEST(DecodeWindowed, UniformMapPicksCenter) {
  auto odd = decode_box_windowed(uniform(7), hanning_window(7));
  EXPECT_EQ(odd.row, 3u);
  EXPECT_EQ(odd.col, 3u);
  // Even grids have four central cells; the tie-break takes the first.
  auto even = decode_box_windowed(uniform(8), hanning_window(8));
  EXPECT_EQ(even.row, 3u);
  EXPECT_EQ(even.col, 3u);
}

TEST(DecodeWindowed, OnesWindowMatchesPlainDecode) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 20; ++i) {
    HeadOutput o{random_tensor({6, 6}, rng, 0, 1), random_tensor({2, 6, 6}, rng, 0, 1),
                 random_tensor({2, 6, 6}, rng, 0, 1), 6};
    auto a = decode_box(o);
    auto b = decode_box_windowed(o, Tensor::full({6, 6}, 1.0));
    EXPECT_EQ(a.box, b.box);
    EXPECT_EQ(a.row, b.row);
    EXPECT_EQ(a.col, b.col);
  }
}

TEST(DecodeWindowed, NearerOfTwoPeaksWins) {
  HeadOutput o = uniform(8);
  std::vector<double> p(64, 0.1);
  p[0 * 8 + 0] = 0.9;
  p[4 * 8 + 4] = 0.9;
  o.score = Tensor::from({8, 8}, p);
  EXPECT_EQ(decode_box(o).row, 0u);
  auto d = decode_box_windowed(o, hanning_window(8));
  EXPECT_EQ(d.row, 4u);
  EXPECT_EQ(d.col, 4u);
  EXPECT_EQ(d.peak_score, 0.9);
}

TEST(DecodeWindowed, ShapeMismatchThrows) {
  EXPECT_THROW(decode_box_windowed(uniform(4), hanning_window(5)), DimensionError);
}

TEST(BoxAtCell, MatchesDecode) {
  auto o = planted(8, 5, 1, 0.25, 0.75, 0.4, 0.6);
  const Tensor b = box_at_cell(o, 5, 1);
  auto d = decode_box(o);
  bdtrack::testing::expect_values(b, {d.box.cx, d.box.cy, d.box.w, d.box.h}, 1e-15);
  EXPECT_THROW(box_at_cell(o, 8, 0), std::out_of_range);
}
