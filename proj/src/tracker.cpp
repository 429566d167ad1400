#include "bdtrack/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bdtrack/flops.hpp"

namespace bdtrack {

TrackOptions track_options(const RunConfig& cfg) {
  TrackOptions o;
  o.template_context = cfg.train.template_context;
  o.search_context = cfg.train.search_context;
  o.window_blend = cfg.track.window_blend;
  o.min_box_side = cfg.track.min_box_side;
  return o;
}

TrackState track_init(const Image& frame, const BBox& box, const ViTConfig& cfg, const TrackOptions& opts) {
  if (frame.empty()) throw std::invalid_argument("track_init: empty frame");
  if (!(box.w > 0 && box.h > 0) || !std::isfinite(box.cx) || !std::isfinite(box.cy)) {
    throw std::invalid_argument("track_init: degenerate box");
  }
  if (box.cx < 0 || box.cy < 0 || box.cx > static_cast<double>(frame.width) ||
      box.cy > static_cast<double>(frame.height)) {
    throw std::invalid_argument("track_init: box center outside the frame");
  }
  TrackState s;
  s.template_crop =
      crop_resize(frame, box.cx, box.cy, opts.template_context * std::sqrt(box.w * box.h), cfg.template_side);
  s.current_box = box;
  s.window = hanning_window(cfg.search_grid());
  s.frame_width = frame.width;
  s.frame_height = frame.height;
  return s;
}

BBox track_frame(TrackState& state, const Image& frame, const Model& model, const TrackOptions& opts,
                 FrameDiag* diag) {
  const BBox& prev = state.current_box;
  const double side = opts.search_context * std::sqrt(prev.w * prev.h);
  const Image search = crop_resize(frame, prev.cx, prev.cy, side, model.cfg.search_side);

  NoGradGuard no_grad;
  MacCounter::reset();
  ForwardOptions fo;
  fo.force_full_depth = opts.force_full_depth;
  const AdaptiveForward fwd = adaptive_forward(model, state.template_crop, search, fo);
  const std::uint64_t macs = MacCounter::value();
  const DecodedBox d = decode_box_windowed(fwd.head, state.window, opts.window_blend);

  const double W = static_cast<double>(frame.width), H = static_cast<double>(frame.height);
  BBox b;
  b.w = std::clamp(d.box.w * side, std::min(opts.min_box_side, W), W);
  b.h = std::clamp(d.box.h * side, std::min(opts.min_box_side, H), H);
  b.cx = std::clamp(prev.cx - side / 2 + d.box.cx * side, b.w / 2, W - b.w / 2);
  b.cy = std::clamp(prev.cy - side / 2 + d.box.cy * side, b.h / 2, H - b.h / 2);
  state.current_box = b;
  state.frame_width = frame.width;
  state.frame_height = frame.height;

  if (diag) {
    diag->exit_layer = fwd.trace.exit_layer;
    diag->scores = fwd.trace.scores;
    diag->blocks_executed = fwd.blocks_executed;
    diag->macs = macs;
    ViTConfig c = model.cfg;
    if (opts.force_full_depth) c.deem_enabled = false;
    diag->flops = flops_estimate(c, fwd.trace.exit_layer);
    diag->peak_score = d.peak_score;
  }
  return b;
}

std::vector<BBox> run_tracker(const Model& model, const Sequence& seq, const TrackOptions& opts,
                              std::vector<FrameDiag>* diags) {
  if (seq.size() == 0 || seq.boxes.empty()) throw std::invalid_argument("run_tracker: empty sequence");
  TrackState state = track_init(seq.frames[0], seq.boxes[0], model.cfg, opts);
  std::vector<BBox> out{seq.boxes[0]};
  out.reserve(seq.size());
  if (diags) diags->clear();
  for (std::size_t t = 1; t < seq.size(); ++t) {
    FrameDiag d;
    out.push_back(track_frame(state, seq.frames[t], model, opts, diags ? &d : nullptr));
    if (diags) diags->push_back(std::move(d));
  }
  return out;
}

}  // namespace bdtrack
