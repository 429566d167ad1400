#pragma once

#include <cstddef>
#include <cstdint>

#include "bdtrack/config.hpp"

namespace bdtrack {

/// Analytic multiply-accumulate counts for one [template, search] forward
/// pass. Counts the same products the instrumented MacCounter sees: matmuls
/// and convolutions, nothing elementwise.
struct MacBreakdown {
  std::uint64_t patch_embed = 0;
  std::uint64_t per_block = 0;
  std::uint64_t per_exit_test = 0;
  std::uint64_t head = 0;
};

MacBreakdown mac_breakdown(const ViTConfig& cfg);

/// MACs with `exit_layer` blocks executed and (exit_layer - n_enf) exit tests
/// (none when the exit module is disabled).
std::uint64_t macs_for_exit(const ViTConfig& cfg, std::size_t exit_layer);

/// FLOPs (2 per MAC). Throws std::out_of_range unless n_enf < exit_layer <= L.
double flops_estimate(const ViTConfig& cfg, std::size_t exit_layer);

}  // namespace bdtrack
