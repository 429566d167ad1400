#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "bdtrack/losses.hpp"
#include "bdtrack/metrics.hpp"

using namespace bdtrack;

namespace {

// Independent reference: thresholds enumerated directly from their definitions.
MetricReport brute_force(const std::vector<BBox>& pred, const std::vector<BBox>& gt) {
  MetricReport r;
  const double n = static_cast<double>(pred.size());
  for (int t = 0; t <= 50; ++t) {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double dx = pred[i].cx - gt[i].cx, dy = pred[i].cy - gt[i].cy;
      if (dx * dx + dy * dy <= static_cast<double>(t * t)) ++hits;
    }
    r.precision_curve.push_back(hits / n);
  }
  double auc = 0;
  for (int t = 0; t <= 50; ++t) {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double ix = std::max(0.0, std::min(pred[i].x1(), gt[i].x1()) - std::max(pred[i].x0(), gt[i].x0()));
      const double iy = std::max(0.0, std::min(pred[i].y1(), gt[i].y1()) - std::max(pred[i].y0(), gt[i].y0()));
      const double inter = ix * iy;
      const double ap = (pred[i].x1() - pred[i].x0()) * (pred[i].y1() - pred[i].y0());
      const double ag = (gt[i].x1() - gt[i].x0()) * (gt[i].y1() - gt[i].y0());
      const double o = inter / (ap + ag - inter);
      if (o >= t / 50.0) ++hits;
    }
    r.success_curve.push_back(hits / n);
    auc += hits / n / 51.0;
  }
  r.success_auc = auc;
  r.precision_at_20 = r.precision_curve[20];
  return r;
}

}  // namespace

TEST(Evaluate, PerfectPredictions) {
  const std::vector<BBox> gt{{10, 10, 4, 6}, {20, 30, 8, 8}};
  const auto r = evaluate(gt, gt);
  EXPECT_EQ(r.precision_at_20, 1.0);
  EXPECT_EQ(r.success_auc, 1.0);
}

TEST(Evaluate, DisplacedTwentyFivePixels) {
  std::vector<BBox> gt, pred;
  for (int i = 0; i < 5; ++i) {
    gt.push_back({50.0 + i, 50, 10, 10});
    pred.push_back({50.0 + i + 15, 70, 10, 10});
  }
  const auto r = evaluate(pred, gt);
  EXPECT_EQ(r.precision_at_20, 0.0);
  for (std::size_t t = 0; t < 25; ++t) EXPECT_EQ(r.precision_curve[t], 0.0);
  for (std::size_t t = 25; t <= 50; ++t) EXPECT_EQ(r.precision_curve[t], 1.0);
}

TEST(Evaluate, TwoFramesIouOneAndZero) {
  const std::vector<BBox> gt{{10, 10, 4, 4}, {10, 10, 4, 4}};
  const std::vector<BBox> pred{{10, 10, 4, 4}, {30, 30, 4, 4}};
  const auto r = evaluate(pred, gt);
  EXPECT_EQ(r.success_curve[0], 1.0);
  for (std::size_t t = 1; t <= 50; ++t) EXPECT_EQ(r.success_curve[t], 0.5);
  EXPECT_NEAR(r.success_auc, brute_force(pred, gt).success_auc, 1e-9);
  EXPECT_NEAR(r.success_auc, (1.0 + 50 * 0.5) / 51, 1e-12);
}

TEST(Evaluate, MatchesBruteForceAndInvariants) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(0, 120), s(4, 40), jitter(-30, 30);
  for (int set = 0; set < 100; ++set) {
    const std::size_t n = 1 + rng() % 40;
    std::vector<BBox> gt, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gt.push_back({c(rng), c(rng), s(rng), s(rng)});
      pred.push_back({gt.back().cx + jitter(rng), gt.back().cy + jitter(rng), s(rng), s(rng)});
    }
    if (set % 10 == 0) pred[0] = gt[0];
    const auto r = evaluate(pred, gt);
    const auto b = brute_force(pred, gt);
    for (std::size_t t = 0; t <= 50; ++t) {
      EXPECT_NEAR(r.precision_curve[t], b.precision_curve[t], 1e-9);
      EXPECT_NEAR(r.success_curve[t], b.success_curve[t], 1e-9);
      if (t) {
        EXPECT_GE(r.precision_curve[t], r.precision_curve[t - 1]);
        EXPECT_LE(r.success_curve[t], r.success_curve[t - 1]);
      }
    }
    EXPECT_NEAR(r.success_auc, b.success_auc, 1e-9);
    EXPECT_EQ(r.precision_at_20, r.precision_curve[20]);

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<BBox> pp, gp;
    for (auto i : perm) {
      pp.push_back(pred[i]);
      gp.push_back(gt[i]);
    }
    const auto q = evaluate(pp, gp);
    EXPECT_EQ(q.precision_curve, r.precision_curve);
    EXPECT_EQ(q.success_curve, r.success_curve);
  }
}

TEST(Evaluate, Errors) {
  const std::vector<BBox> one{{1, 1, 1, 1}}, two{{1, 1, 1, 1}, {2, 2, 1, 1}};
  EXPECT_THROW(evaluate(one, two), std::invalid_argument);
  EXPECT_THROW(evaluate(std::vector<BBox>{}, std::vector<BBox>{}), std::invalid_argument);
}
