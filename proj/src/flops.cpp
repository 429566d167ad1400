#include "bdtrack/flops.hpp"

#include <stdexcept>
#include <string>

namespace bdtrack {

MacBreakdown mac_breakdown(const ViTConfig& cfg) {
  const std::uint64_t k = cfg.total_tokens();
  const std::uint64_t d = cfg.dim;
  const std::uint64_t hidden = cfg.dim * cfg.mlp_ratio;
  const std::uint64_t g2 = cfg.search_tokens();

  MacBreakdown b;
  b.patch_embed = k * cfg.patch_values() * d;
  // qkv + (QK^T and AV over all heads) + output projection + two MLP layers
  b.per_block = k * d * 3 * d + 2 * k * k * d + k * d * d + 2 * k * d * hidden;
  b.per_exit_test = k;
  const std::uint64_t w[4] = {d, d / 2, d / 4, d / 8};
  std::uint64_t branch_hidden = 0;
  for (int i = 0; i < 3; ++i) branch_hidden += g2 * w[i + 1] * w[i] * 9;
  // score branch ends in 1 channel, offset and size in 2
  b.head = 3 * branch_hidden + g2 * w[3] * 9 * (1 + 2 + 2);
  return b;
}

std::uint64_t macs_for_exit(const ViTConfig& cfg, std::size_t exit_layer) {
  if (exit_layer > cfg.depth || (cfg.deem_enabled && exit_layer <= cfg.n_enf) || exit_layer == 0) {
    throw std::out_of_range("exit layer " + std::to_string(exit_layer) + " outside (n_enf, L]");
  }
  const MacBreakdown b = mac_breakdown(cfg);
  const std::uint64_t tests = cfg.deem_enabled ? exit_layer - cfg.n_enf : 0;
  return b.patch_embed + exit_layer * b.per_block + tests * b.per_exit_test + b.head;
}

double flops_estimate(const ViTConfig& cfg, std::size_t exit_layer) {
  return 2.0 * static_cast<double>(macs_for_exit(cfg, exit_layer));
}

}  // namespace bdtrack
