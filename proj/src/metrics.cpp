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

#include "panoslot/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

#include "panoslot/errors.hpp"

namespace panoslot {
namespace {

constexpr double kMatchIou = 0.5;

struct TubeKey {
  std::uint32_t class_id;
  std::uint32_t track;
  bool operator<(const TubeKey& o) const {
    return class_id != o.class_id ? class_id < o.class_id : track < o.track;
  }
  bool operator==(const TubeKey& o) const = default;
};

TubeKey key_of(const SegmentInfo& s) {
  return {s.class_id, s.is_thing ? s.track_id : 0u};
}

void check_alignment(const std::vector<Video>& pred, const std::vector<Video>& gt) {
  if (pred.size() != gt.size()) {
    throw ShapeError("vpq: " + std::to_string(pred.size()) + " predicted videos vs " +
                     std::to_string(gt.size()) + " ground-truth videos");
  }
  for (std::size_t v = 0; v < gt.size(); ++v) {
    if (pred[v].size() != gt[v].size()) {
      throw ShapeError("vpq: video " + std::to_string(v) + " length mismatch (" +
                       std::to_string(pred[v].size()) + " vs " +
                       std::to_string(gt[v].size()) + ")");
    }
    for (std::size_t f = 0; f < gt[v].size(); ++f) {
      const auto& p = pred[v][f];
      const auto& g = gt[v][f];
      if (p.height != g.height || p.width != g.width ||
          p.ids.size() != g.ids.size() || g.ids.size() != g.pixels()) {
        throw ShapeError("vpq: frame size mismatch in video " + std::to_string(v) +
                         ", frame " + std::to_string(f));
      }
    }
  }
}

// Per-frame map from segment id to tube index within the current window.
using SegmentToTube = std::unordered_map<std::uint16_t, std::size_t>;

struct WindowTubes {
  std::vector<TubeKey> keys;
  std::vector<bool> thing;
  std::vector<SegmentToTube> per_frame;
};

WindowTubes build_tubes(const Video& video, std::size_t begin, std::size_t end) {
  WindowTubes t;
  std::map<TubeKey, std::size_t> index;
  for (std::size_t f = begin; f < end; ++f) {
    SegmentToTube m;
    for (const auto& s : video[f].segments) {
      const TubeKey key = key_of(s);
      auto [it, inserted] = index.emplace(key, t.keys.size());
      if (inserted) {
        t.keys.push_back(key);
        t.thing.push_back(s.is_thing);
      }
      m[s.id] = it->second;
    }
    t.per_frame.push_back(std::move(m));
  }
  return t;
}

void accumulate_window(const Video& pred, const Video& gt, std::size_t begin,
                       std::size_t end, std::map<std::uint32_t, ClassStats>& stats) {
  const WindowTubes gt_tubes = build_tubes(gt, begin, end);
  const WindowTubes pred_tubes = build_tubes(pred, begin, end);
  const std::size_t ng = gt_tubes.keys.size(), np = pred_tubes.keys.size();
  std::vector<std::size_t> gt_area(ng, 0), pred_area(np, 0);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> inter;
  for (std::size_t f = begin; f < end; ++f) {
    const auto& gmap = gt_tubes.per_frame[f - begin];
    const auto& pmap = pred_tubes.per_frame[f - begin];
    const auto& gids = gt[f].ids;
    const auto& pids = pred[f].ids;
    for (std::size_t x = 0; x < gids.size(); ++x) {
      if (gids[x] == kVoidId) continue;
      const std::size_t g = gmap.at(gids[x]);
      ++gt_area[g];
      if (pids[x] == kVoidId) continue;
      auto it = pmap.find(pids[x]);
      if (it == pmap.end()) {
        throw ConfigError("vpq: predicted pixel id without segment record");
      }
      ++pred_area[it->second];
      ++inter[{g, it->second}];
    }
  }
  std::vector<char> gt_matched(ng, 0), pred_matched(np, 0);
  for (const auto& [pair, count] : inter) {
    const auto [g, p] = pair;
    if (gt_tubes.keys[g].class_id != pred_tubes.keys[p].class_id) continue;
    const double iou = static_cast<double>(count) /
                       static_cast<double>(gt_area[g] + pred_area[p] - count);
    if (iou <= kMatchIou) continue;
    if (gt_matched[g] || pred_matched[p]) {
      throw NumericError("vpq: tube matched twice at IoU > 0.5");
    }
    gt_matched[g] = pred_matched[p] = 1;
    auto& s = stats[gt_tubes.keys[g].class_id];
    s.is_thing = s.is_thing || gt_tubes.thing[g];
    s.iou_sum += iou;
    ++s.tp;
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (gt_matched[g] || gt_area[g] == 0) continue;
    auto& s = stats[gt_tubes.keys[g].class_id];
    s.is_thing = s.is_thing || gt_tubes.thing[g];
    ++s.fn;
  }
  for (std::size_t p = 0; p < np; ++p) {
    if (pred_matched[p] || pred_area[p] == 0) continue;
    auto& s = stats[pred_tubes.keys[p].class_id];
    s.is_thing = s.is_thing || pred_tubes.thing[p];
    ++s.fp;
  }
}

VpqReport combine(std::vector<WindowReport> windows) {
  VpqReport r;
  r.windows = std::move(windows);
  if (r.windows.empty()) return r;
  for (const auto& w : r.windows) {
    r.vpq += w.quality.all;
    r.vpq_thing += w.quality.thing;
    r.vpq_stuff += w.quality.stuff;
    r.vacuous = r.vacuous && w.quality.vacuous;
  }
  const double n = static_cast<double>(r.windows.size());
  r.vpq /= n;
  r.vpq_thing /= n;
  r.vpq_stuff /= n;
  return r;
}

}  // namespace

QualitySummary summarize(std::map<std::uint32_t, ClassStats> per_class) {
  QualitySummary q;
  q.per_class = std::move(per_class);
  for (const auto& [c, s] : q.per_class) {
    if (!s.present()) continue;
    const double v = s.quality();
    q.all += v;
    ++q.classes;
    if (s.is_thing) {
      q.thing += v;
      ++q.thing_classes;
    } else {
      q.stuff += v;
      ++q.stuff_classes;
    }
  }
  q.vacuous = q.classes == 0;
  if (q.classes) q.all /= static_cast<double>(q.classes);
  if (q.thing_classes) q.thing /= static_cast<double>(q.thing_classes);
  if (q.stuff_classes) q.stuff /= static_cast<double>(q.stuff_classes);
  return q;
}

std::vector<std::pair<std::size_t, std::size_t>> window_ranges(std::size_t frames,
                                                               std::size_t k,
                                                               WindowPolicy policy) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (frames == 0) return out;
  const std::size_t span = k + 1;
  const std::size_t last = policy == WindowPolicy::kFull
                               ? (frames >= span ? frames - span : 0)
                               : frames - 1;
  for (std::size_t s = 0; s <= last; ++s) out.push_back({s, std::min(frames, s + span)});
  return out;
}

VpqReport compute_vpq(const std::vector<Video>& predictions,
                      const std::vector<Video>& ground_truth,
                      const std::vector<std::size_t>& windows, WindowPolicy policy) {
  check_alignment(predictions, ground_truth);
  std::vector<WindowReport> reports;
  for (std::size_t k : windows) {
    std::map<std::uint32_t, ClassStats> stats;
    for (std::size_t v = 0; v < ground_truth.size(); ++v) {
      for (const auto& [b, e] : window_ranges(ground_truth[v].size(), k, policy)) {
        accumulate_window(predictions[v], ground_truth[v], b, e, stats);
      }
    }
    reports.push_back({k, summarize(std::move(stats))});
  }
  return combine(std::move(reports));
}

QualitySummary compute_pq(const std::vector<PanopticFrame>& predictions,
                          const std::vector<PanopticFrame>& ground_truth) {
  if (predictions.size() != ground_truth.size()) {
    throw ShapeError("pq: frame count mismatch");
  }
  std::map<std::uint32_t, ClassStats> stats;
  for (std::size_t f = 0; f < ground_truth.size(); ++f) {
    const Video p{predictions[f]}, g{ground_truth[f]};
    check_alignment({p}, {g});
    accumulate_window(p, g, 0, 1, stats);
  }
  return summarize(std::move(stats));
}

QualitySummary compute_pq(const PanopticFrame& prediction,
                          const PanopticFrame& ground_truth) {
  return compute_pq(std::vector<PanopticFrame>{prediction},
                    std::vector<PanopticFrame>{ground_truth});
}

VpqReport brute_force_vpq_oracle(const std::vector<Video>& predictions,
                                 const std::vector<Video>& ground_truth,
                                 const std::vector<std::size_t>& windows,
                                 WindowPolicy policy) {
  check_alignment(predictions, ground_truth);
  for (const auto& v : ground_truth) {
    if (v.size() > 6) throw ConfigError("oracle: more than 6 frames");
    for (const auto& f : v) {
      if (f.height > 16 || f.width > 16) {
        throw ConfigError("oracle: frame larger than 16x16");
      }
    }
  }
  // A tube is identified by its key; membership of (frame, pixel) is decided
  // by looking the pixel's segment up in that frame's records.
  struct Tube {
    TubeKey key;
    bool thing;
  };
  auto collect = [](const Video& video, std::size_t b, std::size_t e) {
    std::vector<Tube> tubes;
    for (std::size_t f = b; f < e; ++f) {
      for (const auto& s : video[f].segments) {
        const TubeKey k = key_of(s);
        bool seen = false;
        for (const auto& t : tubes) seen = seen || t.key == k;
        if (!seen) tubes.push_back({k, s.is_thing});
      }
    }
    return tubes;
  };
  auto member = [](const PanopticFrame& frame, std::size_t x, const TubeKey& k) {
    const std::uint16_t id = frame.ids[x];
    if (id == kVoidId) return false;
    const SegmentInfo* s = frame.find(id);
    return s && key_of(*s) == k;
  };

  std::vector<WindowReport> reports;
  for (std::size_t k : windows) {
    std::map<std::uint32_t, ClassStats> stats;
    for (std::size_t v = 0; v < ground_truth.size(); ++v) {
      const Video& gt = ground_truth[v];
      const Video& pr = predictions[v];
      for (const auto& [s, e] : window_ranges(gt.size(), k, policy)) {
        const auto gts = collect(gt, s, e);
        const auto prs = collect(pr, s, e);
        auto area = [&](const Video& video, const TubeKey& key) {
          std::size_t a = 0;
          for (std::size_t f = s; f < e; ++f) {
            for (std::size_t x = 0; x < gt[f].pixels(); ++x) {
              if (gt[f].ids[x] != kVoidId && member(video[f], x, key)) ++a;
            }
          }
          return a;
        };
        std::vector<char> gm(gts.size(), 0), pm(prs.size(), 0);
        for (std::size_t i = 0; i < gts.size(); ++i) {
          for (std::size_t j = 0; j < prs.size(); ++j) {
            if (gts[i].key.class_id != prs[j].key.class_id) continue;
            std::size_t inter = 0, uni = 0;
            for (std::size_t f = s; f < e; ++f) {
              for (std::size_t x = 0; x < gt[f].pixels(); ++x) {
                if (gt[f].ids[x] == kVoidId) continue;
                const bool in_g = member(gt[f], x, gts[i].key);
                const bool in_p = member(pr[f], x, prs[j].key);
                inter += (in_g && in_p) ? 1 : 0;
                uni += (in_g || in_p) ? 1 : 0;
              }
            }
            if (uni == 0) continue;
            const double iou = static_cast<double>(inter) / static_cast<double>(uni);
            if (iou > kMatchIou) {
              gm[i] = pm[j] = 1;
              auto& st = stats[gts[i].key.class_id];
              st.is_thing = st.is_thing || gts[i].thing;
              st.iou_sum += iou;
              ++st.tp;
            }
          }
        }
        for (std::size_t i = 0; i < gts.size(); ++i) {
          if (gm[i] || area(gt, gts[i].key) == 0) continue;
          auto& st = stats[gts[i].key.class_id];
          st.is_thing = st.is_thing || gts[i].thing;
          ++st.fn;
        }
        for (std::size_t j = 0; j < prs.size(); ++j) {
          if (pm[j] || area(pr, prs[j].key) == 0) continue;
          auto& st = stats[prs[j].key.class_id];
          st.is_thing = st.is_thing || prs[j].thing;
          ++st.fp;
        }
      }
    }
    reports.push_back({k, summarize(std::move(stats))});
  }
  return combine(std::move(reports));
}

std::string format_vpq_table(const VpqReport& report) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %8s %8s %8s\n", "k", "VPQ", "VPQ^Th",
                "VPQ^St");
  out += line;
  for (const auto& w : report.windows) {
    std::snprintf(line, sizeof(line), "%-8zu %8.4f %8.4f %8.4f\n", w.k,
                  w.quality.all, w.quality.thing, w.quality.stuff);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-8s %8.4f %8.4f %8.4f\n", "mean", report.vpq,
                report.vpq_thing, report.vpq_stuff);
  out += line;
  return out;
}

}  // namespace panoslot
