#include <gtest/gtest.h>

#include <cmath>

#include "bdtrack/backbone.hpp"
#include "bdtrack/errors.hpp"
#include "bdtrack/ops.hpp"
#include "test_util.hpp"

using namespace bdtrack;
using bdtrack::testing::random_image;
using bdtrack::testing::tiny_config;

namespace {

ViTConfig count_config() {
  ViTConfig c;
  c.template_side = 16;
  c.search_side = 32;
  c.patch = 8;
  return c;
}

void zero_all(ParamStore& p) {
  for (auto& [_, t] : p) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
}

}  // namespace

TEST(PatchEmbed, TokenCounts) {
  ViTConfig c = count_config();
  EXPECT_EQ(c.template_tokens(), 4u);
  EXPECT_EQ(c.search_tokens(), 16u);
  EXPECT_EQ(c.total_tokens(), 20u);
  ParamStore p(1);
  init_backbone_params(p, c);
  std::mt19937_64 rng(1);
  auto t = patch_embed(random_image(3, 16, 16, rng), random_image(3, 32, 32, rng), p, c);
  EXPECT_EQ(t.tokens.shape(), (Shape{20, c.dim}));
  EXPECT_EQ(t.template_count, 4u);
  EXPECT_EQ(t.search_count, 16u);
  EXPECT_EQ(t.layer, 0u);
  EXPECT_EQ(template_slice(t).shape(), (Shape{4, c.dim}));
}

TEST(PatchEmbed, ZeroEverythingGivesZeroTokens) {
  ViTConfig c = count_config();
  ParamStore p(1);
  init_backbone_params(p, c);
  zero_all(p);
  auto t = patch_embed(Image(3, 16, 16), Image(3, 32, 32), p, c);
  for (double v : t.tokens.data()) EXPECT_EQ(v, 0.0);
}

TEST(PatchEmbed, WrongImageSizeThrows) {
  ViTConfig c = count_config();
  ParamStore p(1);
  init_backbone_params(p, c);
  EXPECT_THROW(patch_embed(Image(3, 16, 16), Image(3, 24, 24), p, c), DimensionError);
  EXPECT_THROW(patch_embed(Image(1, 16, 16), Image(3, 32, 32), p, c), DimensionError);
}

TEST(PatchEmbed, FlattenOrderIsChannelRowColumn) {
  Image img(2, 4, 4);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) img.at(c, y, x) = 100.0 * c + 10.0 * y + x;
  const Tensor p = extract_patches(img, 2);
  ASSERT_EQ(p.shape(), (Shape{4, 8}));
  // Patch 1 is the top-right 2x2 block.
  const std::vector<double> expect{2, 3, 12, 13, 102, 103, 112, 113};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(p.at({1, i}), expect[i]);
}

TEST(PatchEmbed, SwappingSearchPatchesPermutesRows) {
  ViTConfig c = count_config();
  ParamStore p(3);
  init_backbone_params(p, c);
  for (auto& v : p.get(names::kPosition).mutable_data()) v = 0.0;
  std::mt19937_64 rng(2);
  const Image z = random_image(3, 16, 16, rng);
  Image x = random_image(3, 32, 32, rng);
  Image swapped = x;
  // Swap search patch (0,0) with patch (1,2).
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t dy = 0; dy < 8; ++dy)
      for (std::size_t dx = 0; dx < 8; ++dx) std::swap(swapped.at(ch, dy, dx), swapped.at(ch, 8 + dy, 16 + dx));
  const auto a = patch_embed(z, x, p, c).tokens;
  const auto b = patch_embed(z, swapped, p, c).tokens;
  const std::size_t r0 = 4 + 0, r1 = 4 + 1 * 4 + 2;
  for (std::size_t row = 0; row < 20; ++row) {
    const std::size_t src = row == r0 ? r1 : (row == r1 ? r0 : row);
    for (std::size_t j = 0; j < c.dim; ++j) EXPECT_EQ(b.at({row, j}), a.at({src, j}));
  }
}

TEST(Block, ZeroedProjectionsAreIdentity) {
  ViTConfig c = tiny_config();
  ParamStore p(5);
  init_backbone_params(p, c);
  for (const char* leaf : {"attn.proj.weight", "attn.proj.bias", "mlp.fc2.weight", "mlp.fc2.bias"}) {
    for (auto& v : p.get(names::block(1, leaf)).mutable_data()) v = 0.0;
  }
  std::mt19937_64 rng(4);
  auto t0 = patch_embed(random_image(3, 8, 8, rng), random_image(3, 16, 16, rng), p, c);
  auto t1 = block_forward(t0, 1, p, c);
  EXPECT_EQ(t1.layer, 1u);
  EXPECT_EQ(t1.tokens.shape(), t0.tokens.shape());
  for (std::size_t i = 0; i < t0.tokens.numel(); ++i) EXPECT_EQ(t1.tokens.data()[i], t0.tokens.data()[i]);
}

TEST(Block, LayerMismatchThrows) {
  ViTConfig c = tiny_config();
  ParamStore p(5);
  init_backbone_params(p, c);
  std::mt19937_64 rng(4);
  auto t0 = patch_embed(random_image(3, 8, 8, rng), random_image(3, 16, 16, rng), p, c);
  EXPECT_THROW(block_forward(t0, 2, p, c), std::invalid_argument);
}

TEST(Attention, TwoTokensSingleHeadByHand) {
  // d = 2, identity q/k/v projections: attention = softmax(X X^T / sqrt(2)) X.
  const Tensor x = Tensor::from({2, 2}, {1, 0, 0.5, 2});
  std::vector<double> w(2 * 6, 0.0);
  for (int blk = 0; blk < 3; ++blk) {
    w[0 * 6 + blk * 2 + 0] = 1;
    w[1 * 6 + blk * 2 + 1] = 1;
  }
  const Tensor out = self_attention(x, Tensor::from({2, 6}, w), Tensor::zeros({6}), 1);
  const double s = 1 / std::sqrt(2.0);
  const double a00 = 1 * s, a01 = 0.5 * s, a10 = 0.5 * s, a11 = (0.25 + 4) * s;
  const double p00 = std::exp(a00) / (std::exp(a00) + std::exp(a01));
  const double p10 = std::exp(a10) / (std::exp(a10) + std::exp(a11));
  const std::vector<double> expect{p00 * 1 + (1 - p00) * 0.5, (1 - p00) * 2, p10 * 1 + (1 - p10) * 0.5,
                                   (1 - p10) * 2};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.data()[i], expect[i], 1e-14);
}

TEST(FullForward, LengthCompositionAndDeterminism) {
  ViTConfig c = tiny_config();
  ParamStore p(9);
  init_backbone_params(p, c);
  std::mt19937_64 rng(4);
  const Image z = random_image(3, 8, 8, rng), x = random_image(3, 16, 16, rng);
  auto a = full_forward(z, x, p, c);
  auto b = full_forward(z, x, p, c);
  ASSERT_EQ(a.size(), c.depth + 1);
  for (std::size_t l = 0; l <= c.depth; ++l) {
    EXPECT_EQ(a[l].layer, l);
    EXPECT_EQ(std::vector<double>(a[l].tokens.data().begin(), a[l].tokens.data().end()),
              std::vector<double>(b[l].tokens.data().begin(), b[l].tokens.data().end()));
  }
  auto one = block_forward(patch_embed(z, x, p, c), 1, p, c);
  EXPECT_EQ(std::vector<double>(one.tokens.data().begin(), one.tokens.data().end()),
            std::vector<double>(a[1].tokens.data().begin(), a[1].tokens.data().end()));
}

TEST(Slices, ReconstructTokens) {
  ViTConfig c = tiny_config();
  ParamStore p(9);
  init_backbone_params(p, c);
  std::mt19937_64 rng(4);
  auto t = patch_embed(random_image(3, 8, 8, rng), random_image(3, 16, 16, rng), p, c);
  const Tensor joined = concat({template_slice(t), search_slice(t)}, 0);
  EXPECT_EQ(std::vector<double>(joined.data().begin(), joined.data().end()),
            std::vector<double>(t.tokens.data().begin(), t.tokens.data().end()));
}

TEST(Config, Invariants) {
  ViTConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_enf = c.depth;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ViTConfig{};
  c.search_side = 60;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ViTConfig{};
  c.heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ViTConfig{};
  c.epsilon = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ViTConfig{};
  c.tau = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}
