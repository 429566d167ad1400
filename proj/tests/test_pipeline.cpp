#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "bdtrack/dataset.hpp"
#include "bdtrack/errors.hpp"
#include "bdtrack/pipeline.hpp"
#include "test_util.hpp"

using namespace bdtrack;
using bdtrack::testing::tiny_config;

namespace {

Sequence small_sequence(std::uint64_t seed, double blur_prob = 0.0) {
  SequenceSpec s;
  s.width = 64;
  s.height = 64;
  s.frames = 10;
  s.start_cx = 32;
  s.start_cy = 30;
  s.object_w = 12;
  s.object_h = 10;
  s.blur_prob = blur_prob;
  s.seed = seed;
  return to_sequence(generate_sequence(s), "s");
}

std::vector<TrainSample> batch_of(std::size_t n, std::uint64_t seed, const ViTConfig& vit, const TrainConfig& tc) {
  const Sequence seq = small_sequence(3);
  std::mt19937_64 rng(seed);
  std::vector<TrainSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_pair(seq, rng, vit, tc));
  return out;
}

}  // namespace

TEST(SamplePair, SizesTargetAndDeterminism) {
  const ViTConfig vit = tiny_config();
  TrainConfig tc;
  const auto a = batch_of(20, 1, vit, tc), b = batch_of(20, 1, vit, tc);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].templ.width, vit.template_side);
    EXPECT_EQ(a[i].search.width, vit.search_side);
    const BBox& g = a[i].target.gt_box;
    EXPECT_GT(g.cx, 0.0);
    EXPECT_LT(g.cx, 1.0);
    EXPECT_GT(g.cy, 0.0);
    EXPECT_LT(g.cy, 1.0);
    EXPECT_EQ(a[i].search, b[i].search);
    EXPECT_EQ(a[i].blur_kernel.weights, b[i].blur_kernel.weights);
  }
}

TEST(SamplePair, BlurProbabilityZeroGivesIdentityKernel) {
  const ViTConfig vit = tiny_config();
  TrainConfig tc;
  tc.blur_prob = 0.0;
  for (const auto& s : batch_of(10, 2, vit, tc)) EXPECT_EQ(s.blur_kernel.length, 1u);
}

TEST(SampleLoss, ZeroRhoOrIdentityKernelGivesExactZeroBr) {
  const ViTConfig vit = tiny_config();
  const Model m = make_model(vit, 4);
  TrainConfig tc;
  tc.blur_prob = 1.0;
  const auto batch = batch_of(3, 5, vit, tc);
  LossWeights w;
  w.rho = 0;
  for (const auto& s : batch) {
    const SampleLoss l = sample_loss(m, s, w, {});
    EXPECT_EQ(l.br.item(), 0.0);
    EXPECT_NEAR(l.total.item(), overall_loss(l.cls.item(), l.iou.item(), l.l1.item(), 0.0, l.spar.item(), w), 1e-12);
  }
  TrainSample s = batch[0];
  s.blur_kernel = make_kernel(1, 0.0);
  EXPECT_EQ(sample_loss(m, s, LossWeights{}, {}).br.item(), 0.0);
  // A real kernel gives a positive term.
  EXPECT_GT(sample_loss(m, batch[0], LossWeights{}, {}).br.item(), 0.0);
}

TEST(TrainStep, ZeroLearningRateRepeatsLosses) {
  const ViTConfig vit = tiny_config();
  Model m = make_model(vit, 6);
  const auto batch = batch_of(2, 7, vit, TrainConfig{});
  AdamWState st;
  StepOptions o;
  o.adam.lr = 0;
  const StepReport a = train_step(batch, m, LossWeights{}, st, o);
  const StepReport b = train_step(batch, m, LossWeights{}, st, o);
  EXPECT_EQ(a.total, b.total);
  EXPECT_EQ(a.cls, b.cls);
  EXPECT_EQ(a.br, b.br);
  EXPECT_EQ(a.mean_exit_layer, b.mean_exit_layer);
}

TEST(TrainStep, OverfitSingleSampleDecreases) {
  for (std::uint64_t seed : {1, 2, 3}) {
    ViTConfig vit = tiny_config();
    Model m = make_model(vit, seed);
    const auto batch = batch_of(1, seed + 10, vit, TrainConfig{});
    AdamWState st;
    StepOptions o;
    o.adam.lr = 1e-3;
    double first = 0, mean = 0;
    for (int i = 0; i < 50; ++i) {
      const double t = train_step(batch, m, LossWeights{}, st, o).total;
      if (i == 0) first = t;
      mean += t / 50;
    }
    EXPECT_LT(mean, first) << "seed " << seed;
  }
}

TEST(TrainStep, NonFiniteParametersAbortWithoutUpdate) {
  const ViTConfig vit = tiny_config();
  Model m = make_model(vit, 8);
  const auto batch = batch_of(1, 9, vit, TrainConfig{});
  m.params.get("head.score.out.bias").mutable_data()[0] = std::nan("");
  const ParamStore before = m.params.clone();
  AdamWState st;
  EXPECT_THROW(train_step(batch, m, LossWeights{}, st, {}), NumericError);
  for (const auto& [name, t] : before) {
    const auto now = m.params.get(name).data();
    for (std::size_t i = 0; i < t.numel(); ++i) {
      if (!std::isnan(t.data()[i])) EXPECT_EQ(now[i], t.data()[i]) << name;
    }
  }
  EXPECT_EQ(st.step, 0u);
}

TEST(TrainModel, SeededRunsAreBitIdentical) {
  RunConfig cfg;
  cfg.model = tiny_config();
  cfg.train.steps = 6;
  cfg.train.batch_size = 2;
  cfg.train.warmup_full_depth_steps = 3;
  const std::vector<Sequence> data{small_sequence(1, 0.3), small_sequence(2, 0.3)};
  std::ostringstream csv_a, csv_b;
  const TrainRun a = train_model(data, cfg, &csv_a);
  const TrainRun b = train_model(data, cfg, &csv_b);
  EXPECT_EQ(csv_a.str(), csv_b.str());
  ASSERT_EQ(a.history.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(a.history[i].total, b.history[i].total);
  EXPECT_EQ(csv_a.str().substr(0, csv_a.str().find('\n')), "step,L_cls,L_iou,L_L1,L_br,L_spar,L_overall,mean_L_e");
}
