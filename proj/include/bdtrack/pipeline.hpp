#pragma once

#include <cstddef>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bdtrack/blur.hpp"
#include "bdtrack/config.hpp"
#include "bdtrack/image.hpp"
#include "bdtrack/losses.hpp"
#include "bdtrack/model.hpp"
#include "bdtrack/optimizer.hpp"

namespace bdtrack {

/// Frames with one ground-truth box each, in frame pixels (center form).
struct Sequence {
  std::string name;
  std::vector<Image> frames;
  std::vector<BBox> boxes;

  std::size_t size() const { return frames.size(); }
};

/// One training example: template crop, search crop with its supervision,
/// and the kernel used to blur the template for the robustness term.
struct TrainSample {
  Image templ;
  Image search;
  TrainTarget target;
  BlurKernel blur_kernel;
};

/// Crops a (template, search) pair from `seq` with frame-gap, center and
/// scale jitter. Deterministic in the rng state.
TrainSample sample_pair(const Sequence& seq, std::mt19937_64& rng, const ViTConfig& vit, const TrainConfig& train);

struct StepOptions {
  bool mbrv = true;
  bool br_mean_reduction = false;
  /// Head reads layer-L tokens while the exit trace is still resolved and
  /// regularized (warm-up).
  bool full_depth_head = false;
  AdamWOptions adam;
  double grad_clip = 0.0;
};

struct SampleLoss {
  Tensor cls, iou, l1, br, spar, total;
  std::size_t exit_layer = 0;
};

/// Forward pass and the five loss terms for one sample. The blurred pair is
/// skipped when it cannot contribute (blur-robustness off, zero weight or an
/// identity kernel); the term is then an exact zero.
SampleLoss sample_loss(const Model& model, const TrainSample& s, const LossWeights& w, const StepOptions& opts);

struct StepReport {
  std::size_t step = 0;
  double cls = 0, iou = 0, l1 = 0, br = 0, spar = 0, total = 0;
  double mean_exit_layer = 0;
  double grad_norm = 0;
};

/// Batch-mean loss, backward, optimizer update. Throws NumericError before
/// touching the parameters if any loss or gradient is non-finite.
StepReport train_step(std::span<const TrainSample> batch, Model& model, const LossWeights& w, AdamWState& state,
                      const StepOptions& opts);

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const StepReport& r);

struct TrainRun {
  Model model;
  std::vector<StepReport> history;
};

using StepCallback = std::function<void(const StepReport&)>;

/// Full training loop: model seeded from cfg.train.seed, sequences sampled
/// uniformly, warm-up steps at full depth, optional CSV log.
TrainRun train_model(const std::vector<Sequence>& data, const RunConfig& cfg, std::ostream* loss_csv = nullptr,
                     const StepCallback& on_step = {});

}  // namespace bdtrack
