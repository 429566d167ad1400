#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bdtrack/backbone.hpp"
#include "bdtrack/config.hpp"
#include "bdtrack/deem.hpp"
#include "bdtrack/head.hpp"
#include "bdtrack/image.hpp"
#include "bdtrack/param_store.hpp"

namespace bdtrack {

/// Configuration plus every trainable parameter of the tracker.
struct Model {
  ViTConfig cfg;
  ParamStore params;
};

/// Backbone, exit layers and head, initialized from `seed`.
Model make_model(const ViTConfig& cfg, std::uint64_t seed);

/// Output of the adaptive forward pass over a clean [template, search] pair.
struct AdaptiveForward {
  std::vector<TokenSequence> layers;  // layers[0..n], n = deepest block executed
  ExitTrace trace;                    // empty scores when the exit module is off
  std::size_t head_layer = 0;         // tokens the head consumed
  HeadOutput head;
  std::size_t blocks_executed = 0;
};

struct ForwardOptions {
  /// Skip exit tests and run every block (the DEEM-off baseline).
  bool force_full_depth = false;
  /// Keep running blocks up to this depth after the exit is resolved; the
  /// head still reads the exit layer. 0 means stop at the head layer.
  std::size_t min_depth = 0;
  /// Resolve the exit trace as usual but feed the head layer-L tokens
  /// (full-depth warm-up during training).
  bool head_at_full_depth = false;
};

/// Runs blocks one at a time, evaluates exit scores lazily, and feeds the
/// exit-layer search tokens to the head. Blocks past
/// max(exit layer, min_depth) are never executed.
AdaptiveForward adaptive_forward(const Model& model, const Image& templ, const Image& search,
                                 const ForwardOptions& opts = {});

}  // namespace bdtrack
