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

#ifndef PANOSLOT_METRICS_HPP_
#define PANOSLOT_METRICS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "panoslot/panoptic.hpp"

namespace panoslot {

using Video = std::vector<PanopticFrame>;

inline const std::vector<std::size_t>& default_vpq_windows() {
  static const std::vector<std::size_t> k = {0, 5, 10, 15};
  return k;
}

// Where snippet windows of k + 1 frames may start. kFull slides only over
// positions where the whole window fits; a video shorter than the window is
// one window clipped to its length. kTruncatedTail also starts a window at
// every later frame, truncated at the end of the video.
enum class WindowPolicy { kFull, kTruncatedTail };

// Half-open [begin, end) frame ranges of every window of span k.
std::vector<std::pair<std::size_t, std::size_t>> window_ranges(std::size_t frames,
                                                               std::size_t k,
                                                               WindowPolicy policy);

struct ClassStats {
  double iou_sum = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool is_thing = false;

  bool present() const { return tp + fp + fn > 0; }
  double quality() const {
    const double denom = static_cast<double>(tp) + 0.5 * static_cast<double>(fp) +
                         0.5 * static_cast<double>(fn);
    return denom > 0 ? iou_sum / denom : 0.0;
  }
};

// Class-averaged quality over present classes. `vacuous` is set when no class
// is present, in which case every average is 0.
struct QualitySummary {
  std::map<std::uint32_t, ClassStats> per_class;
  double all = 0.0, thing = 0.0, stuff = 0.0;
  std::size_t classes = 0, thing_classes = 0, stuff_classes = 0;
  bool vacuous = true;
};

QualitySummary summarize(std::map<std::uint32_t, ClassStats> per_class);

struct WindowReport {
  std::size_t k = 0;
  QualitySummary quality;
};

struct VpqReport {
  std::vector<WindowReport> windows;
  double vpq = 0.0, vpq_thing = 0.0, vpq_stuff = 0.0;
  bool vacuous = true;
};

// Video panoptic quality over a dataset of videos. For each k, windows of
// k + 1 consecutive frames slide with stride 1 (see WindowPolicy). Within a window, segments sharing (class,
// track) form a tube (stuff: one tube per class). A GT/prediction tube pair
// of the same class is a true positive iff tube IoU > 0.5. Pixels that are
// void in the ground truth are removed from every tube. Statistics are summed
// over all windows of all videos before the per-class quality is taken.
VpqReport compute_vpq(const std::vector<Video>& predictions,
                      const std::vector<Video>& ground_truth,
                      const std::vector<std::size_t>& windows = default_vpq_windows(),
                      WindowPolicy policy = WindowPolicy::kFull);

// Image panoptic quality of one frame, or accumulated over aligned frames.
QualitySummary compute_pq(const PanopticFrame& prediction,
                          const PanopticFrame& ground_truth);
QualitySummary compute_pq(const std::vector<PanopticFrame>& predictions,
                          const std::vector<PanopticFrame>& ground_truth);

// Reference implementation for tiny inputs (<= 16x16, <= 6 frames per
// video): every GT tube is compared against every predicted tube by scanning
// pixels directly. Throws ConfigError for larger inputs.
VpqReport brute_force_vpq_oracle(const std::vector<Video>& predictions,
                                 const std::vector<Video>& ground_truth,
                                 const std::vector<std::size_t>& windows = default_vpq_windows(),
                                 WindowPolicy policy = WindowPolicy::kFull);

// Fixed-width table with VPQ / VPQ^Th / VPQ^St per k and their mean.
std::string format_vpq_table(const VpqReport& report);

}  // namespace panoslot

#endif  // PANOSLOT_METRICS_HPP_
