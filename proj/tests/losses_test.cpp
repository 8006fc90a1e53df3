/* Copyright 2026 The Panoslot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "panoslot/hungarian.hpp"
#include "panoslot/losses.hpp"
#include "panoslot/optimizer.hpp"
#include "test_util.hpp"

namespace panoslot {
namespace {

using testing::make_frame;
using testing::random_tensor;
using testing::stuff;
using testing::thing;

// 2 thing classes + 1 stuff class.
constexpr std::size_t kClasses = 3;

// 2x4 frame: stuff (class 2) on the left half, thing (class 0, track 7) on
// the right.
PanopticFrame two_segment_frame() {
  return make_frame(2, 4, {1, 1, 2, 2, 1, 1, 2, 2}, {stuff(1, 2), thing(2, 0, 7)});
}

// Head outputs whose slots reproduce `gt` exactly: slot i owns segment i,
// the rest predict no-object everywhere else.
FrameOutputs<double> perfect_outputs(Tape<double>& tape, const PanopticFrame& gt,
                                     std::size_t slots, double scale = 40.0) {
  FrameOutputs<double> f;
  Tensor<double> cls({slots, kClasses + 1}, -scale), mask({slots, gt.pixels()}, -scale);
  for (std::size_t s = 0; s < slots; ++s) {
    const bool real = s < gt.segments.size();
    cls[s * (kClasses + 1) + (real ? gt.segments[s].class_id : kClasses)] = scale;
    if (!real) continue;
    for (std::size_t p = 0; p < gt.pixels(); ++p) {
      if (gt.ids[p] == gt.segments[s].id) mask[s * gt.pixels() + p] = scale;
    }
  }
  f.class_logits = tape.constant(cls);
  f.mask_logits = tape.constant(mask);
  f.height = gt.height;
  f.width = gt.width;
  // One feature cell per 2x2 block; pixel embeddings aligned with the owner.
  f.feat_height = gt.height / 2;
  f.feat_width = gt.width / 2;
  Tensor<double> pix({f.feat_height * f.feat_width, slots}), emb({slots, slots});
  for (std::size_t s = 0; s < slots; ++s) emb[s * slots + s] = scale;
  for (std::size_t c = 0; c < f.feat_height * f.feat_width; ++c) {
    const std::size_t y = (c / f.feat_width) * 2 + 1, x = (c % f.feat_width) * 2 + 1;
    const std::uint16_t id = gt.ids[y * gt.width + x];
    for (std::size_t s = 0; s < gt.segments.size(); ++s) {
      if (gt.segments[s].id == id) pix[c * slots + s] = 1.0;
    }
  }
  f.pixel_embed = tape.constant(pix);
  f.mask_embed = tape.constant(emb);
  f.id_embed = tape.constant(emb);
  f.slots = tape.constant(emb);
  return f;
}

TEST(LossWeightsTest, DefaultsAsShipped) {
  const LossWeights w;
  EXPECT_EQ(w.pq, 3.0);
  EXPECT_EQ(w.inst_disc, 1.0);
  EXPECT_EQ(w.mask_id_ce, 0.3);
  EXPECT_EQ(w.semseg, 0.5);
  EXPECT_EQ(w.id, 0.5);
  LossWeights bad;
  bad.id = -1;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(HungarianTest, SpecExamples) {
  Eigen::MatrixXd c(2, 2);
  c << 1, 2, 2, 1;
  const Assignment a = hungarian(c);
  EXPECT_EQ(a.pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}}));
  EXPECT_DOUBLE_EQ(a.total_cost, 2.0);
  const Assignment z = hungarian(Eigen::MatrixXd::Zero(4, 4));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(z.pairs[i], std::make_pair(i, i));
}

TEST(MatchTest, PerfectPredictionCostsMinusOnePerPair) {
  Tape<double> tape;
  const PanopticFrame gt = two_segment_frame();
  const FrameOutputs<double> f = perfect_outputs(tape, gt, 4);
  const FrameMatch m = match_slots(class_prediction(f), mask_prediction(f), gt);
  EXPECT_EQ(m.pairs, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}}));
  EXPECT_EQ(m.unmatched_slots, (std::vector<std::size_t>{2, 3}));
  EXPECT_NEAR(m.total_cost, -2.0, 1e-9);
}

TEST(MatchTest, SingleSegmentPicksBestClassTimesDice) {
  std::mt19937_64 rng(1);
  const PanopticFrame gt = make_frame(2, 2, {1, 1, 1, 1}, {stuff(1, 2)});
  for (int rep = 0; rep < 20; ++rep) {
    ClassPrediction cls{random_tensor({4, kClasses + 1}, rng, 0.01, 1).matrix()};
    for (Eigen::Index r = 0; r < 4; ++r) cls.probs.row(r) /= cls.probs.row(r).sum();
    MaskPrediction masks{2, 2, random_tensor({4, 4}, rng, -3, 3).matrix()};
    const Eigen::MatrixXd cost = matching_cost(cls, masks, gt);
    Eigen::Index best = 0;
    cost.col(0).minCoeff(&best);
    const FrameMatch m = match_slots(cls, masks, gt);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0].first, static_cast<std::size_t>(best));
  }
}

TEST(MatchTest, CostIsClassProbabilityTimesDice) {
  std::mt19937_64 rng(2);
  const PanopticFrame gt = two_segment_frame();
  ClassPrediction cls{random_tensor({3, kClasses + 1}, rng, 0.01, 1).matrix()};
  for (Eigen::Index r = 0; r < 3; ++r) cls.probs.row(r) /= cls.probs.row(r).sum();
  MaskPrediction masks{2, 4, random_tensor({3, 8}, rng, -3, 3).matrix()};
  const Eigen::MatrixXd cost = matching_cost(cls, masks, gt);
  const Eigen::MatrixXd q = masks.slot_probabilities();
  for (Eigen::Index s = 0; s < 3; ++s) {
    for (std::size_t j = 0; j < 2; ++j) {
      double inter = 0, sum_q = 0, area = 0;
      for (std::size_t p = 0; p < 8; ++p) {
        const bool in = gt.ids[p] == gt.segments[j].id;
        inter += in ? q(s, static_cast<Eigen::Index>(p)) : 0;
        sum_q += q(s, static_cast<Eigen::Index>(p));
        area += in;
      }
      const double dice = (2 * inter + kDiceEps) / (sum_q + area + kDiceEps);
      EXPECT_NEAR(cost(s, static_cast<Eigen::Index>(j)),
                  -cls.probs(s, gt.segments[j].class_id) * dice, 1e-12);
    }
  }
}

TEST(MatchTest, AgreesWithBruteForceOnThreeSegmentsFourSlots) {
  std::mt19937_64 rng(3);
  const PanopticFrame gt =
      make_frame(2, 3, {1, 1, 2, 2, 3, 3}, {stuff(1, 2), thing(2, 0, 1), thing(3, 1, 2)});
  for (int rep = 0; rep < 20; ++rep) {
    ClassPrediction cls{random_tensor({4, kClasses + 1}, rng, 0.01, 1).matrix()};
    for (Eigen::Index r = 0; r < 4; ++r) cls.probs.row(r) /= cls.probs.row(r).sum();
    MaskPrediction masks{2, 3, random_tensor({4, 6}, rng, -3, 3).matrix()};
    const Eigen::MatrixXd cost = matching_cost(cls, masks, gt);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < 4; ++a) {
      for (std::size_t b = 0; b < 4; ++b) {
        for (std::size_t c = 0; c < 4; ++c) {
          if (a == b || b == c || a == c) continue;
          best = std::min(best, cost(static_cast<Eigen::Index>(a), 0) +
                                    cost(static_cast<Eigen::Index>(b), 1) +
                                    cost(static_cast<Eigen::Index>(c), 2));
        }
      }
    }
    EXPECT_NEAR(match_slots(cls, masks, gt).total_cost, best, 1e-12);
  }
}

TEST(MatchTest, TooFewSlotsIsAConfigError) {
  const PanopticFrame gt =
      make_frame(2, 3, {1, 1, 2, 2, 3, 3}, {stuff(1, 2), thing(2, 0, 1), thing(3, 1, 2)});
  ClassPrediction cls{Eigen::MatrixXd::Constant(2, kClasses + 1, 0.25)};
  MaskPrediction masks{2, 3, Eigen::MatrixXd::Zero(2, 6)};
  try {
    match_slots(cls, masks, gt);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('3'), std::string::npos) << msg;
    EXPECT_NE(msg.find('2'), std::string::npos) << msg;
  }
  EXPECT_EQ(match_slots(cls, masks, gt, true).pairs.size(), 2u);
}

TEST(TotalLossTest, PerfectPredictionsReachZeroLimit) {
  Tape<double> tape;
  const PanopticFrame gt = two_segment_frame();
  std::vector<FrameOutputs<double>> out = {perfect_outputs(tape, gt, 4),
                                           perfect_outputs(tape, gt, 4)};
  MatchResult match;
  const LossBreakdown<double> l = matched_loss(out, {gt, gt}, kClasses, LossOptions{}, &match);
  EXPECT_LT(l.pq, 1e-6);
  EXPECT_LT(l.mask_id_ce, 1e-6);
  EXPECT_LT(l.semseg, 1e-6);
  // The contrastive terms compare unit vectors at a fixed temperature, so
  // their floor for 4 orthogonal slots is log(1 + 3 exp(-1 / tau)), up to
  // the normalization epsilon.
  EXPECT_NEAR(l.inst_disc, std::log(1 + 3 * std::exp(-1 / 0.3)), 1e-7);
  EXPECT_NEAR(l.id, std::log(1 + 3 * std::exp(-1 / 0.1)), 1e-7);
  EXPECT_GE(l.total.value()[0], 0.0);
}

TEST(TotalLossTest, NonNegativeOnRandomOutputs) {
  std::mt19937_64 rng(4);
  const PanopticFrame gt = two_segment_frame();
  for (int rep = 0; rep < 20; ++rep) {
    Tape<double> tape;
    std::vector<FrameOutputs<double>> out;
    for (int t = 0; t < 2; ++t) {
      FrameOutputs<double> f = perfect_outputs(tape, gt, 3);
      f.class_logits = tape.constant(random_tensor({3, kClasses + 1}, rng, -3, 3));
      f.mask_logits = tape.constant(random_tensor({3, 8}, rng, -3, 3));
      f.pixel_embed = tape.constant(random_tensor({2, 3}, rng));
      f.mask_embed = tape.constant(random_tensor({3, 3}, rng));
      f.id_embed = tape.constant(random_tensor({3, 3}, rng));
      out.push_back(f);
    }
    const LossBreakdown<double> l = matched_loss(out, {gt, gt}, kClasses, LossOptions{});
    EXPECT_GT(l.total.value()[0], 0.0);
    for (double v : {l.pq, l.inst_disc, l.mask_id_ce, l.semseg, l.id}) EXPECT_GE(v, 0.0);
  }
}

TEST(TotalLossTest, EmptyFrameKeepsOnlyNoObjectAndSemantic) {
  Tape<double> tape;
  const PanopticFrame gt = make_frame(2, 4, std::vector<std::uint16_t>(8, 0), {});
  std::mt19937_64 rng(5);
  FrameOutputs<double> f = perfect_outputs(tape, gt, 3);
  f.class_logits = tape.constant(random_tensor({3, kClasses + 1}, rng, -3, 3));
  const LossBreakdown<double> l = matched_loss<double>({f}, {gt}, kClasses, LossOptions{});
  EXPECT_GT(l.pq, 0.0);
  EXPECT_EQ(l.inst_disc, 0.0);
  EXPECT_EQ(l.mask_id_ce, 0.0);
  EXPECT_EQ(l.id, 0.0);
}

TEST(TotalLossTest, InvariantUnderSlotPermutation) {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.backbone_width = 8;
  cfg.num_slots = 4;
  cfg.ffn_hidden = 16;
  cfg.num_thing_classes = 2;
  cfg.num_stuff_classes = 1;
  PanopticSlotModel<double> model(cfg);
  std::mt19937_64 rng(6);
  const std::vector<Tensor<double>> frames = {random_tensor({16, 16, 3}, rng),
                                              random_tensor({16, 16, 3}, rng)};
  std::vector<std::uint16_t> ids(256);
  for (std::size_t p = 0; p < 256; ++p) ids[p] = (p % 16) < 8 ? 1 : ((p / 16) < 8 ? 2 : 3);
  const PanopticFrame gt =
      make_frame(16, 16, ids, {stuff(1, 2), thing(2, 0, 1), thing(3, 1, 2)});
  auto loss = [&] {
    Tape<double> tape;
    return matched_loss(model.forward(tape, frames).frames, {gt, gt}, kClasses, LossOptions{})
        .total.value()[0];
  };
  const double base = loss();
  Tensor<double>& slots = model.pipeline().slots().value;
  const Tensor<double> orig = slots;
  const std::vector<std::size_t> perm = {2, 3, 1, 0};
  for (std::size_t i = 0; i < 4; ++i) slots.matrix().row(i) = orig.matrix().row(perm[i]);
  EXPECT_NEAR(loss(), base, 1e-6);
}

TEST(OptimizerTest, VanishingLearningRateLeavesParameters) {
  ParameterStore<double> store;
  auto& p = store.create("w", {3, 3}, InitSpec::normal(1.0));
  const Tensor<double> before = p.value;
  std::mt19937_64 rng(7);
  p.grad = random_tensor({3, 3}, rng);
  OptimizerConfig cfg;
  cfg.lr = 1e-300;
  AdamW<double> opt(store, cfg);
  opt.step();
  EXPECT_EQ(p.value.matrix(), before.matrix());
  EXPECT_EQ(p.grad.matrix().cwiseAbs().maxCoeff(), 0.0);
}

TEST(OptimizerTest, FirstStepMatchesClosedForm) {
  ParameterStore<double> store;
  auto& p = store.create("w", {2}, InitSpec::ones());
  p.grad[0] = 0.3;
  p.grad[1] = -0.4;
  OptimizerConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  AdamW<double> opt(store, cfg);
  EXPECT_NEAR(opt.step(), 0.5, 1e-15);
  // Norm 0.5 < clip: bias-corrected m / sqrt(v) = g / |g|.
  const double decayed = 1.0 - 0.01 * 0.1;
  EXPECT_NEAR(p.value[0], decayed - 0.01 * 0.3 / (0.3 + 1e-8), 1e-12);
  EXPECT_NEAR(p.value[1], decayed + 0.01 * 0.4 / (0.4 + 1e-8), 1e-12);
}

TEST(OptimizerTest, WarmupScalesEarlySteps) {
  // With g / |g| updates and no decay, step n moves by lr * n / warmup.
  ParameterStore<double> store;
  auto& p = store.create("w", {1}, InitSpec::zeros());
  OptimizerConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0;
  cfg.warmup_steps = 4;
  AdamW<double> opt(store, cfg);
  opt.set_epoch(0);
  double expected = 0.0;
  for (int n = 1; n <= 6; ++n) {
    p.grad[0] = 1.0;
    opt.step();
    expected -= 0.01 * std::min(1.0, n / 4.0) / (1.0 + 1e-8);
    EXPECT_NEAR(p.value[0], expected, 1e-12) << "step " << n;
  }
}

TEST(OptimizerTest, ClipsByGlobalNorm) {
  ParameterStore<double> a, b;
  auto& pa = a.create("w", {2}, InitSpec::zeros());
  auto& pb = b.create("w", {2}, InitSpec::zeros());
  pa.grad[0] = 30;
  pa.grad[1] = 40;
  pb.grad[0] = 0.6;
  pb.grad[1] = 0.8;
  OptimizerConfig cfg;
  cfg.weight_decay = 0;
  AdamW<double> oa(a, cfg), ob(b, cfg);
  EXPECT_NEAR(oa.step(), 50.0, 1e-12);
  ob.step();
  for (int rep = 0; rep < 2; ++rep) {
    pa.grad[0] = 30;
    pa.grad[1] = 40;
    pb.grad[0] = 0.6;
    pb.grad[1] = 0.8;
    oa.step();
    ob.step();
  }
  EXPECT_NEAR(pa.value[0], pb.value[0], 1e-15);
  EXPECT_NEAR(pa.value[1], pb.value[1], 1e-15);
}

TEST(OptimizerTest, StepScheduleDecaysAtMilestones) {
  OptimizerConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.lr_at_epoch(0), 1e-4);
  EXPECT_DOUBLE_EQ(cfg.lr_at_epoch(27), 1e-4);
  EXPECT_NEAR(cfg.lr_at_epoch(28), 1e-5, 1e-20);
  EXPECT_NEAR(cfg.lr_at_epoch(35), 1e-5, 1e-20);
  EXPECT_NEAR(cfg.lr_at_epoch(36), 1e-6, 1e-21);
  EXPECT_EQ(cfg.weight_decay, 1e-4);
  cfg.lr = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(OptimizerTest, StateRoundTrip) {
  ParameterStore<double> store;
  auto& p = store.create("w", {2}, InitSpec::ones());
  AdamW<double> a(store, OptimizerConfig{});
  p.grad.fill(0.5);
  a.step();
  AdamW<double> b(store, OptimizerConfig{});
  b.load_state(a.state_records());
  EXPECT_EQ(b.steps(), 1u);
  p.grad.fill(0.25);
  const Tensor<double> start = p.value;
  a.step();
  const Tensor<double> via_a = p.value;
  p.value = start;
  p.grad.fill(0.25);
  b.step();
  EXPECT_EQ(p.value.matrix(), via_a.matrix());
}

}  // namespace
}  // namespace panoslot
