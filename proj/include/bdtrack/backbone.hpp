#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bdtrack/config.hpp"
#include "bdtrack/image.hpp"
#include "bdtrack/param_store.hpp"
#include "bdtrack/tensor.hpp"

namespace bdtrack {

/// Token matrix [K x d] for the concatenated template/search pair. Rows
/// [0, template_count) belong to the template, the rest to the search region.
struct TokenSequence {
  Tensor tokens;
  std::size_t template_count = 0;
  std::size_t search_count = 0;
  std::size_t layer = 0;  // 0 = patch embedding output, l = after block l

  std::size_t size() const { return template_count + search_count; }
};

/// Parameter names used by the backbone; exposed so tests can poke weights.
namespace names {
std::string block(std::size_t l, const std::string& leaf);  // l is 1-based
inline const std::string kPatchWeight = "embed.proj.weight";
inline const std::string kPatchBias = "embed.proj.bias";
inline const std::string kPosition = "embed.pos";
}  // namespace names

void init_backbone_params(ParamStore& params, const ViTConfig& cfg);

/// Flattens an image into one row of P*P*C values per patch, row-major over
/// the patch grid; within a patch the order is (channel, y, x).
Tensor extract_patches(const Image& img, std::size_t patch);

/// Linear patch projection of [template, search] plus the shared learned
/// positional table.
TokenSequence patch_embed(const Image& templ, const Image& search, const ParamStore& params, const ViTConfig& cfg);

/// Pre-norm transformer block `l` (1-based). Requires `t.layer == l - 1`.
TokenSequence block_forward(const TokenSequence& t, std::size_t l, const ParamStore& params, const ViTConfig& cfg);

/// Multi-head self-attention on pre-normalized tokens, before the output
/// projection. Exposed for hand-checked tests.
Tensor self_attention(const Tensor& x, const Tensor& qkv_weight, const Tensor& qkv_bias, std::size_t heads);

/// Every intermediate token sequence, layers 0..L (length L + 1).
std::vector<TokenSequence> full_forward(const Image& templ, const Image& search, const ParamStore& params,
                                        const ViTConfig& cfg);

/// Template rows [0, K_z) of the token matrix.
Tensor template_slice(const TokenSequence& t);
/// Search rows [K_z, K).
Tensor search_slice(const TokenSequence& t);

}  // namespace bdtrack
