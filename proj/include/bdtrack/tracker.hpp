#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "bdtrack/config.hpp"
#include "bdtrack/head.hpp"
#include "bdtrack/image.hpp"
#include "bdtrack/model.hpp"
#include "bdtrack/pipeline.hpp"

namespace bdtrack {

struct TrackOptions {
  double template_context = 2.0;
  double search_context = 4.0;
  double window_blend = 1.0;
  double min_box_side = 4.0;
  bool force_full_depth = false;  // DEEM-off baseline on a DEEM-trained model
};

TrackOptions track_options(const RunConfig& cfg);

/// Per-sequence tracker state. Holds no reference to the model, so any
/// number of states can share one read-only Model.
struct TrackState {
  Image template_crop;
  BBox current_box;  // frame pixels
  Tensor window;     // [G x G]
  std::size_t frame_width = 0;
  std::size_t frame_height = 0;
};

struct FrameDiag {
  std::size_t exit_layer = 0;
  std::vector<double> scores;  // exit score per examined layer
  std::size_t blocks_executed = 0;
  std::uint64_t macs = 0;  // counted while the frame ran
  double flops = 0;        // analytic estimate at exit_layer
  double peak_score = 0;
};

/// Throws std::invalid_argument for a box with non-positive size or a center
/// outside the frame.
TrackState track_init(const Image& frame, const BBox& box, const ViTConfig& cfg, const TrackOptions& opts);

/// Crops the search region around the current box, runs the lazy adaptive
/// forward without gradients, decodes with the window penalty and maps the
/// box back to frame pixels (clamped to the frame). Updates `state`.
BBox track_frame(TrackState& state, const Image& frame, const Model& model, const TrackOptions& opts,
                 FrameDiag* diag = nullptr);

/// Initializes on frame 0 with the ground-truth box and tracks the rest.
/// Result has one box per frame; entry 0 is the init box. `diags` (if given)
/// receives one entry per tracked frame (frames 1..n-1).
std::vector<BBox> run_tracker(const Model& model, const Sequence& seq, const TrackOptions& opts,
                              std::vector<FrameDiag>* diags = nullptr);

}  // namespace bdtrack
