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
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "panoslot/errors.hpp"
#include "panoslot/metrics.hpp"
#include "test_util.hpp"

namespace panoslot {
namespace {

using testing::make_frame;
using testing::stuff;
using testing::thing;

// Independent set-based reference: tubes are explicit sets of
// (frame, pixel) keyed by (class, track); windows are enumerated directly.
double reference_vpq(const std::vector<Video>& pred, const std::vector<Video>& gt,
                     const std::vector<std::size_t>& windows) {
  using Key = std::pair<std::uint32_t, std::uint32_t>;
  using Cells = std::set<std::pair<std::size_t, std::size_t>>;
  double total = 0.0;
  for (std::size_t k : windows) {
    std::map<std::uint32_t, std::tuple<double, double, double, double>> stats;  // iou, tp, fp, fn
    for (std::size_t v = 0; v < gt.size(); ++v) {
      const std::size_t n = gt[v].size();
      std::vector<std::size_t> starts;
      if (n < k + 1) {
        starts.push_back(0);
      } else {
        for (std::size_t s = 0; s + k + 1 <= n; ++s) starts.push_back(s);
      }
      for (std::size_t s : starts) {
        const std::size_t e = std::min(n, s + k + 1);
        auto tubes = [&](const Video& video) {
          std::map<Key, Cells> out;
          for (std::size_t f = s; f < e; ++f) {
            for (std::size_t x = 0; x < video[f].ids.size(); ++x) {
              if (gt[v][f].ids[x] == 0 || video[f].ids[x] == 0) continue;
              const SegmentInfo* seg = video[f].find(video[f].ids[x]);
              out[{seg->class_id, seg->is_thing ? seg->track_id : 0}].insert({f, x});
            }
          }
          return out;
        };
        const auto g = tubes(gt[v]);
        const auto p = tubes(pred[v]);
        std::set<Key> gm, pm;
        for (const auto& [gk, gc] : g) {
          for (const auto& [pk, pc] : p) {
            if (gk.first != pk.first) continue;
            Cells both, either;
            std::set_intersection(gc.begin(), gc.end(), pc.begin(), pc.end(),
                                  std::inserter(both, both.end()));
            std::set_union(gc.begin(), gc.end(), pc.begin(), pc.end(),
                           std::inserter(either, either.end()));
            const double iou = double(both.size()) / double(either.size());
            if (iou > 0.5) {
              std::get<0>(stats[gk.first]) += iou;
              std::get<1>(stats[gk.first]) += 1;
              gm.insert(gk);
              pm.insert(pk);
            }
          }
        }
        for (const auto& [gk, gc] : g) {
          if (!gm.count(gk)) std::get<3>(stats[gk.first]) += 1;
        }
        for (const auto& [pk, pc] : p) {
          if (!pm.count(pk)) std::get<2>(stats[pk.first]) += 1;
        }
      }
    }
    double sum = 0.0;
    int classes = 0;
    for (const auto& [c, st] : stats) {
      const auto [iou, tp, fp, fn] = st;
      sum += iou / (tp + 0.5 * fp + 0.5 * fn);
      ++classes;
    }
    total += classes ? sum / classes : 0.0;
  }
  return total / double(windows.size());
}

// One thing class; 2 x 5 frames; GT covers all 10 px with track 1.
Video gt_tube() {
  const std::vector<std::uint16_t> ids(10, 1);
  return {make_frame(2, 5, ids, {thing(1, 0, 1)}), make_frame(2, 5, ids, {thing(1, 0, 1)})};
}

Video eight_px(std::uint32_t track0, std::uint32_t track1) {
  std::vector<std::uint16_t> ids(10, 1);
  ids[8] = ids[9] = 0;
  return {make_frame(2, 5, ids, {thing(1, 0, track0)}),
          make_frame(2, 5, ids, {thing(1, 0, track1)})};
}

TEST(Vpq, ConsistentIdFixture) {
  const VpqReport r = compute_vpq({eight_px(7, 7)}, {gt_tube()}, {1});
  EXPECT_NEAR(r.vpq, 0.8, 1e-12);
  ASSERT_EQ(r.windows.size(), 1u);
  const ClassStats& s = r.windows[0].quality.per_class.at(0);
  EXPECT_EQ(s.tp, 1u);
  EXPECT_NEAR(s.iou_sum, 16.0 / 20.0, 1e-12);
}

TEST(Vpq, IdSwitchFixture) {
  const VpqReport r = compute_vpq({eight_px(7, 8)}, {gt_tube()}, {1});
  EXPECT_NEAR(r.vpq, 0.0, 1e-12);
  const ClassStats& s = r.windows[0].quality.per_class.at(0);
  EXPECT_EQ(s.tp, 0u);
  EXPECT_EQ(s.fp, 2u);
  EXPECT_EQ(s.fn, 1u);
  // Frame by frame the prediction is still good.
  EXPECT_NEAR(compute_vpq({eight_px(7, 8)}, {gt_tube()}, {0}).vpq, 0.8, 1e-12);
}

TEST(Vpq, WindowRanges) {
  using R = std::vector<std::pair<std::size_t, std::size_t>>;
  EXPECT_EQ(window_ranges(4, 1, WindowPolicy::kFull), (R{{0, 2}, {1, 3}, {2, 4}}));
  EXPECT_EQ(window_ranges(3, 5, WindowPolicy::kFull), (R{{0, 3}}));
  EXPECT_EQ(window_ranges(3, 1, WindowPolicy::kTruncatedTail), (R{{0, 2}, {1, 3}, {2, 3}}));
  EXPECT_TRUE(window_ranges(0, 1, WindowPolicy::kFull).empty());
}

TEST(Vpq, PerfectPredictionIsOne) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Video gt = testing::random_video(rng, 5, 12, 12, 2, 4);
    const VpqReport r = compute_vpq({gt}, {gt});
    if (r.vacuous) continue;
    EXPECT_NEAR(r.vpq, 1.0, 1e-12);
  }
}

TEST(Vpq, VacuousWhenNothingPresent) {
  const Video empty = {make_frame(2, 2, {0, 0, 0, 0}, {})};
  const VpqReport r = compute_vpq({empty}, {empty});
  EXPECT_TRUE(r.vacuous);
  EXPECT_EQ(r.vpq, 0.0);
}

TEST(Vpq, MatchesOraclesOnRandomInstances) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> frames(1, 6), side(2, 16), videos(1, 3);
  std::bernoulli_distribution independent(0.2);
  const std::vector<std::size_t> windows = {0, 1, 2, 5};
  for (int i = 0; i < 200; ++i) {
    std::vector<Video> gt, pred;
    const std::size_t nv = videos(rng);
    for (std::size_t v = 0; v < nv; ++v) {
      const std::size_t t = frames(rng), h = side(rng), w = side(rng);
      gt.push_back(testing::random_video(rng, t, h, w, 2, 4));
      pred.push_back(independent(rng) ? testing::random_video(rng, t, h, w, 2, 4)
                                      : testing::perturb_video(rng, gt.back(), 2, 4));
    }
    for (WindowPolicy policy : {WindowPolicy::kFull, WindowPolicy::kTruncatedTail}) {
      const VpqReport fast = compute_vpq(pred, gt, windows, policy);
      const VpqReport slow = brute_force_vpq_oracle(pred, gt, windows, policy);
      ASSERT_NEAR(fast.vpq, slow.vpq, 1e-9) << "instance " << i;
      ASSERT_NEAR(fast.vpq_thing, slow.vpq_thing, 1e-9);
      ASSERT_NEAR(fast.vpq_stuff, slow.vpq_stuff, 1e-9);
    }
    ASSERT_NEAR(compute_vpq(pred, gt, windows).vpq, reference_vpq(pred, gt, windows), 1e-9)
        << "instance " << i;
  }
}

TEST(Vpq, OracleRejectsLargeInputs) {
  const Video big = {make_frame(17, 1, std::vector<std::uint16_t>(17, 1), {stuff(1, 0)})};
  EXPECT_THROW(brute_force_vpq_oracle({big}, {big}), ConfigError);
}

TEST(Vpq, InvariantToIdRelabelling) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const Video gt = testing::random_video(rng, 4, 10, 10, 2, 4);
    const Video pred = testing::perturb_video(rng, gt, 2, 4);
    Video relabelled = pred;
    for (auto& f : relabelled) {
      for (auto& s : f.segments) {
        s.id = static_cast<std::uint16_t>(s.id + 1000);
        if (s.is_thing) s.track_id = s.track_id * 7 + 3;
      }
      for (auto& id : f.ids) {
        if (id) id = static_cast<std::uint16_t>(id + 1000);
      }
    }
    EXPECT_NEAR(compute_vpq({pred}, {gt}).vpq, compute_vpq({relabelled}, {gt}).vpq, 1e-12);
  }
}

TEST(Vpq, SingleFrameWindowEqualsPq) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<Video> gt, pred;
    std::vector<PanopticFrame> gt_flat, pred_flat;
    for (int v = 0; v < 2; ++v) {
      gt.push_back(testing::random_video(rng, 3, 8, 8, 2, 4));
      pred.push_back(testing::perturb_video(rng, gt.back(), 2, 4));
      gt_flat.insert(gt_flat.end(), gt.back().begin(), gt.back().end());
      pred_flat.insert(pred_flat.end(), pred.back().begin(), pred.back().end());
    }
    const QualitySummary pq = compute_pq(pred_flat, gt_flat);
    const VpqReport r = compute_vpq(pred, gt, {0});
    EXPECT_NEAR(r.vpq, pq.all, 1e-12);
    EXPECT_NEAR(r.vpq_thing, pq.thing, 1e-12);
    EXPECT_NEAR(r.vpq_stuff, pq.stuff, 1e-12);
  }
}

TEST(Vpq, DegradesMonotonicallyAsPixelsAreDropped) {
  std::mt19937_64 rng(21);
  const Video gt = testing::random_video(rng, 4, 12, 12, 2, 4);
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t f = 0; f < gt.size(); ++f) {
    for (std::size_t x = 0; x < gt[f].ids.size(); ++x) cells.push_back({f, x});
  }
  std::shuffle(cells.begin(), cells.end(), rng);
  Video pred = gt;
  double last = compute_vpq({pred}, {gt}).vpq;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    pred[cells[i].first].ids[cells[i].second] = 0;
    if (i % 16 != 15) continue;
    const double now = compute_vpq({pred}, {gt}).vpq;
    EXPECT_LE(now, last + 1e-12);
    last = now;
  }
  EXPECT_EQ(last, 0.0);
}

TEST(Pq, LowIouIsNotAMatch) {
  // The prediction covers 2 of 6 GT pixels: IoU 1/3.
  const PanopticFrame gt = make_frame(1, 6, {1, 1, 1, 1, 1, 1}, {thing(1, 0, 1)});
  const PanopticFrame pred = make_frame(1, 6, {1, 1, 0, 0, 0, 0}, {thing(1, 0, 1)});
  const QualitySummary q = compute_pq(pred, gt);
  EXPECT_EQ(q.all, 0.0);
  EXPECT_EQ(q.per_class.at(0).fp, 1u);
  EXPECT_EQ(q.per_class.at(0).fn, 1u);
}

TEST(Pq, VoidGroundTruthIsIgnored) {
  // Predicted pixels over GT void do not count against the prediction.
  const PanopticFrame gt = make_frame(1, 4, {1, 1, 0, 0}, {stuff(1, 2)});
  const PanopticFrame pred = make_frame(1, 4, {1, 1, 1, 1}, {stuff(1, 2)});
  EXPECT_NEAR(compute_pq(pred, gt).all, 1.0, 1e-12);
}

TEST(Vpq, RejectsMisalignedInputs) {
  const Video a = gt_tube();
  Video shorter = {a[0]};
  EXPECT_THROW(compute_vpq({shorter}, {a}), ShapeError);
  EXPECT_THROW(compute_vpq({a, a}, {a}), ShapeError);
  Video resized = a;
  resized[1] = make_frame(1, 10, std::vector<std::uint16_t>(10, 1), {thing(1, 0, 1)});
  EXPECT_THROW(compute_vpq({resized}, {a}), ShapeError);
}

TEST(Vpq, TableListsEveryWindow) {
  const VpqReport r = compute_vpq({eight_px(7, 7)}, {gt_tube()});
  const std::string table = format_vpq_table(r);
  for (const char* k : {"0", "5", "10", "15", "mean"}) {
    EXPECT_NE(table.find(k), std::string::npos) << k;
  }
}

}  // namespace
}  // namespace panoslot
