#include "bdtrack/backbone.hpp"

#include <cmath>
#include <cstdio>

#include "bdtrack/ops.hpp"

namespace bdtrack {

namespace names {
std::string block(std::size_t l, const std::string& leaf) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "blocks.%02zu.", l);
  return buf + leaf;
}
}  // namespace names

void init_backbone_params(ParamStore& params, const ViTConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.dim, hidden = cfg.dim * cfg.mlp_ratio;
  params.add(names::kPatchWeight, {cfg.patch_values(), d}, Init::TruncNormal);
  params.add(names::kPatchBias, {d}, Init::Zeros);
  params.add(names::kPosition, {cfg.total_tokens(), d}, Init::TruncNormal);
  for (std::size_t l = 1; l <= cfg.depth; ++l) {
    params.add(names::block(l, "ln1.gain"), {d}, Init::Ones);
    params.add(names::block(l, "ln1.bias"), {d}, Init::Zeros);
    params.add(names::block(l, "attn.qkv.weight"), {d, 3 * d}, Init::TruncNormal);
    params.add(names::block(l, "attn.qkv.bias"), {3 * d}, Init::Zeros);
    params.add(names::block(l, "attn.proj.weight"), {d, d}, Init::TruncNormal);
    params.add(names::block(l, "attn.proj.bias"), {d}, Init::Zeros);
    params.add(names::block(l, "ln2.gain"), {d}, Init::Ones);
    params.add(names::block(l, "ln2.bias"), {d}, Init::Zeros);
    params.add(names::block(l, "mlp.fc1.weight"), {d, hidden}, Init::TruncNormal);
    params.add(names::block(l, "mlp.fc1.bias"), {hidden}, Init::Zeros);
    params.add(names::block(l, "mlp.fc2.weight"), {hidden, d}, Init::TruncNormal);
    params.add(names::block(l, "mlp.fc2.bias"), {d}, Init::Zeros);
  }
}

Tensor extract_patches(const Image& img, std::size_t patch) {
  if (patch == 0 || img.height % patch != 0 || img.width % patch != 0) {
    throw DimensionError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                         " is not divisible by patch " + std::to_string(patch));
  }
  const std::size_t gh = img.height / patch, gw = img.width / patch;
  const std::size_t per = patch * patch * img.channels;
  std::vector<double> rows(gh * gw * per);
  std::size_t i = 0;
  for (std::size_t py = 0; py < gh; ++py)
    for (std::size_t px = 0; px < gw; ++px)
      for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < patch; ++y)
          for (std::size_t x = 0; x < patch; ++x) rows[i++] = img.at(c, py * patch + y, px * patch + x);
  return Tensor::from({gh * gw, per}, std::move(rows));
}

TokenSequence patch_embed(const Image& templ, const Image& search, const ParamStore& params, const ViTConfig& cfg) {
  auto check = [&](const Image& img, std::size_t side, const char* what) {
    if (img.height != side || img.width != side || img.channels != cfg.channels) {
      throw DimensionError(std::string(what) + " image must be " + std::to_string(cfg.channels) + "x" +
                           std::to_string(side) + "x" + std::to_string(side));
    }
  };
  check(templ, cfg.template_side, "template");
  check(search, cfg.search_side, "search");

  Tensor patches = concat({extract_patches(templ, cfg.patch), extract_patches(search, cfg.patch)}, 0);
  Tensor tokens = linear(patches, params.get(names::kPatchWeight), params.get(names::kPatchBias));
  tokens = add(tokens, params.get(names::kPosition));
  return {tokens, cfg.template_tokens(), cfg.search_tokens(), 0};
}

Tensor self_attention(const Tensor& x, const Tensor& qkv_weight, const Tensor& qkv_bias, std::size_t heads) {
  const std::size_t d = x.dim(1);
  if (heads == 0 || d % heads != 0) throw DimensionError("token width not divisible by head count");
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor qkv = linear(x, qkv_weight, qkv_bias);  // [K x 3d] laid out as q | k | v
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor q = slice(qkv, 1, h * dh, (h + 1) * dh);
    Tensor k = slice(qkv, 1, d + h * dh, d + (h + 1) * dh);
    Tensor v = slice(qkv, 1, 2 * d + h * dh, 2 * d + (h + 1) * dh);
    Tensor att = softmax(scale(matmul(q, transpose(k)), inv_sqrt), 1);
    outs.push_back(matmul(att, v));
  }
  return heads == 1 ? outs[0] : concat(outs, 1);
}

TokenSequence block_forward(const TokenSequence& t, std::size_t l, const ParamStore& params, const ViTConfig& cfg) {
  if (l == 0 || l > cfg.depth) throw std::out_of_range("block index out of range");
  if (t.layer + 1 != l) {
    throw std::invalid_argument("block " + std::to_string(l) + " expects layer " + std::to_string(l - 1) +
                                " tokens, got layer " + std::to_string(t.layer));
  }
  auto p = [&](const char* leaf) -> const Tensor& { return params.get(names::block(l, leaf)); };

  Tensor x = t.tokens;
  Tensor h = layernorm(x, p("ln1.gain"), p("ln1.bias"), cfg.ln_eps);
  h = self_attention(h, p("attn.qkv.weight"), p("attn.qkv.bias"), cfg.heads);
  x = add(x, linear(h, p("attn.proj.weight"), p("attn.proj.bias")));

  h = layernorm(x, p("ln2.gain"), p("ln2.bias"), cfg.ln_eps);
  h = gelu(linear(h, p("mlp.fc1.weight"), p("mlp.fc1.bias")));
  x = add(x, linear(h, p("mlp.fc2.weight"), p("mlp.fc2.bias")));
  return {x, t.template_count, t.search_count, l};
}

std::vector<TokenSequence> full_forward(const Image& templ, const Image& search, const ParamStore& params,
                                        const ViTConfig& cfg) {
  std::vector<TokenSequence> layers;
  layers.reserve(cfg.depth + 1);
  layers.push_back(patch_embed(templ, search, params, cfg));
  for (std::size_t l = 1; l <= cfg.depth; ++l) layers.push_back(block_forward(layers.back(), l, params, cfg));
  return layers;
}

Tensor template_slice(const TokenSequence& t) { return slice(t.tokens, 0, 0, t.template_count); }

Tensor search_slice(const TokenSequence& t) { return slice(t.tokens, 0, t.template_count, t.size()); }

}  // namespace bdtrack
