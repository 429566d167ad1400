#include "bdtrack/model.hpp"

#include <algorithm>

namespace bdtrack {

Model make_model(const ViTConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m{cfg, ParamStore(seed)};
  init_backbone_params(m.params, cfg);
  init_exit_params(m.params, cfg);
  init_head_params(m.params, cfg);
  return m;
}

AdaptiveForward adaptive_forward(const Model& model, const Image& templ, const Image& search,
                                 const ForwardOptions& opts) {
  const ViTConfig& cfg = model.cfg;
  AdaptiveForward out;
  out.layers.reserve(cfg.depth + 1);
  out.layers.push_back(patch_embed(templ, search, model.params, cfg));

  auto advance_to = [&](std::size_t layer) {
    while (out.layers.back().layer < layer) {
      const std::size_t next = out.layers.back().layer + 1;
      out.layers.push_back(block_forward(out.layers.back(), next, model.params, cfg));
      ++out.blocks_executed;
    }
  };

  if (cfg.deem_enabled && !opts.force_full_depth) {
    advance_to(cfg.n_enf);
    out.trace = resolve_exit(
        [&](std::size_t l) {
          advance_to(l - 1);
          return exit_score(out.layers[l - 1], l, model.params, cfg);
        },
        ExitRule::from(cfg));
    out.head_layer = opts.head_at_full_depth ? cfg.depth : out.trace.exit_layer;
  } else {
    out.trace.n_enf = cfg.n_enf;
    out.trace.depth = cfg.depth;
    out.trace.exit_layer = cfg.depth;
    out.head_layer = cfg.depth;
  }
  advance_to(std::max(out.head_layer, std::min(opts.min_depth, cfg.depth)));
  out.head = head_forward(search_slice(out.layers[out.head_layer]), model.params, cfg);
  return out;
}

}  // namespace bdtrack
