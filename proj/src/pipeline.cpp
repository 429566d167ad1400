#include "bdtrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <stdexcept>

#include "bdtrack/errors.hpp"
#include "bdtrack/ops.hpp"

namespace bdtrack {

TrainSample sample_pair(const Sequence& seq, std::mt19937_64& rng, const ViTConfig& vit, const TrainConfig& train) {
  if (seq.size() == 0 || seq.boxes.size() != seq.size()) throw std::invalid_argument("sequence has no labelled frames");
  std::uniform_int_distribution<std::size_t> pick_frame(0, seq.size() - 1);
  const std::size_t ti = pick_frame(rng);
  const std::size_t lo = ti >= train.max_frame_gap ? ti - train.max_frame_gap : 0;
  const std::size_t hi = std::min(seq.size() - 1, ti + train.max_frame_gap);
  const std::size_t si = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const BBox& tb = seq.boxes[ti];
  const BBox& sb = seq.boxes[si];

  TrainSample s;
  s.templ = crop_resize(seq.frames[ti], tb.cx, tb.cy, train.template_context * std::sqrt(tb.w * tb.h),
                        vit.template_side);

  const double side = train.search_context * std::sqrt(sb.w * sb.h) * std::exp(train.jitter_scale * unit(rng));
  const double cx = sb.cx + train.jitter_center * side * unit(rng);
  const double cy = sb.cy + train.jitter_center * side * unit(rng);
  s.search = crop_resize(seq.frames[si], cx, cy, side, vit.search_side);

  BBox gt{(sb.cx - (cx - side / 2)) / side, (sb.cy - (cy - side / 2)) / side, sb.w / side, sb.h / side};
  s.target = make_train_target(gt, vit.search_grid());

  BlurPolicy policy;
  policy.lengths = train.blur_lengths;
  const bool blurred = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < train.blur_prob;
  BlurKernel k = sample_blur(rng, policy);  // drawn either way so the rng stream is blur_prob independent
  s.blur_kernel = blurred ? std::move(k) : make_kernel(1, 0.0);
  return s;
}

SampleLoss sample_loss(const Model& model, const TrainSample& s, const LossWeights& w, const StepOptions& opts) {
  const ViTConfig& cfg = model.cfg;
  const bool robust = opts.mbrv && w.rho != 0.0 && !s.blur_kernel.is_identity();

  ForwardOptions fo;
  fo.head_at_full_depth = opts.full_depth_head;
  fo.min_depth = robust ? cfg.depth : 0;
  AdaptiveForward fwd = adaptive_forward(model, s.templ, s.search, fo);

  SampleLoss out;
  out.exit_layer = fwd.trace.exit_layer;
  out.cls = focal_loss(fwd.head.score, s.target);
  const Tensor pred = box_at_cell(fwd.head, s.target.positive_row, s.target.positive_col);
  out.iou = giou_loss(pred, s.target.gt_box);
  out.l1 = l1_loss(pred, s.target.gt_box);

  if (robust) {
    const Image blurred = apply_blur(s.templ, s.blur_kernel);
    const auto layers = full_forward(blurred, s.search, model.params, cfg);
    out.br = blur_loss(template_slice(fwd.layers[cfg.depth]), template_slice(layers.back()), opts.br_mean_reduction);
  } else {
    out.br = Tensor::scalar(0.0);
  }
  out.spar = fwd.trace.score_tensors.empty() ? Tensor::scalar(0.0) : sparsity_loss(fwd.trace, cfg.tau);
  out.total = overall_loss(out.cls, out.iou, out.l1, out.br, out.spar, w);
  return out;
}

StepReport train_step(std::span<const TrainSample> batch, Model& model, const LossWeights& w, AdamWState& state,
                      const StepOptions& opts) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  model.params.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());

  StepReport r;
  for (const auto& sample : batch) {
    SampleLoss l = sample_loss(model, sample, w, opts);
    r.cls += l.cls.item() * inv;
    r.iou += l.iou.item() * inv;
    r.l1 += l.l1.item() * inv;
    r.br += l.br.item() * inv;
    r.spar += l.spar.item() * inv;
    r.total += l.total.item() * inv;
    r.mean_exit_layer += static_cast<double>(l.exit_layer) * inv;
    scale(l.total, inv).backward();
  }

  for (auto& [name, p] : model.params) {
    for (double g : p.mutable_grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
    }
  }
  r.grad_norm = clip_grad_norm(model.params, opts.grad_clip);
  optimizer_update(model.params, state, opts.adam);
  r.step = state.step;
  return r;
}

void write_loss_csv_header(std::ostream& os) { os << "step,L_cls,L_iou,L_L1,L_br,L_spar,L_overall,mean_L_e\n"; }

void write_loss_csv_row(std::ostream& os, const StepReport& r) {
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << r.step << ',' << r.cls << ',' << r.iou << ',' << r.l1 << ',' << r.br << ',' << r.spar << ',' << r.total << ','
     << r.mean_exit_layer << '\n';
  os.precision(old);
}

TrainRun train_model(const std::vector<Sequence>& data, const RunConfig& cfg, std::ostream* loss_csv,
                     const StepCallback& on_step) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train_model: no training sequences");
  TrainRun run{make_model(cfg.model, cfg.train.seed), {}};
  std::mt19937_64 rng(cfg.train.seed ^ 0x7A11u);
  std::uniform_int_distribution<std::size_t> pick_seq(0, data.size() - 1);

  StepOptions opts;
  opts.mbrv = cfg.train.mbrv;
  opts.br_mean_reduction = cfg.train.br_mean_reduction;
  opts.adam = {cfg.train.lr, cfg.train.beta1, cfg.train.beta2, cfg.train.adam_eps, cfg.train.weight_decay};
  opts.grad_clip = cfg.train.grad_clip;

  AdamWState state;
  if (loss_csv) write_loss_csv_header(*loss_csv);
  std::vector<TrainSample> batch(cfg.train.batch_size);
  run.history.reserve(cfg.train.steps);
  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    for (auto& s : batch) s = sample_pair(data[pick_seq(rng)], rng, cfg.model, cfg.train);
    opts.full_depth_head = step < cfg.train.warmup_full_depth_steps;
    StepReport r = train_step(batch, run.model, cfg.loss, state, opts);
    if (loss_csv) write_loss_csv_row(*loss_csv, r);
    if (on_step) on_step(r);
    run.history.push_back(r);
  }
  return run;
}

}  // namespace bdtrack
