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

#include "panoslot/postprocess.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "panoslot/errors.hpp"
#include "panoslot/hungarian.hpp"

namespace panoslot {

Eigen::MatrixXd MaskPrediction::slot_probabilities() const {
  Eigen::MatrixXd p = logits;
  for (Eigen::Index x = 0; x < p.cols(); ++x) {
    const double mx = p.col(x).maxCoeff();
    p.col(x) = (p.col(x).array() - mx).exp();
    p.col(x) /= p.col(x).sum();
  }
  return p;
}

std::vector<std::size_t> MaskPrediction::assignment() const {
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.cols()), 0);
  for (Eigen::Index x = 0; x < logits.cols(); ++x) {
    Eigen::Index best = 0;
    logits.col(x).maxCoeff(&best);
    out[static_cast<std::size_t>(x)] = static_cast<std::size_t>(best);
  }
  return out;
}

void FilterConfig::validate() const {
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string("filter.") + name + " must be in [0, 1]");
    }
  };
  prob(class_conf, "class_conf");
  prob(pixel_conf, "pixel_conf");
  prob(overlap_ratio, "overlap_ratio");
  if (!(stuff_min_area >= 0)) throw ConfigError("filter.stuff_min_area < 0");
  if (!(reference_area > 0)) throw ConfigError("filter.reference_area <= 0");
}

PanopticFrame postprocess(const ClassPrediction& cls, const MaskPrediction& masks,
                          std::size_t num_thing_classes, const FilterConfig& cfg,
                          const std::vector<std::uint32_t>* track_ids) {
  const std::size_t num_slots = cls.num_slots();
  const std::size_t k = cls.num_classes();
  const std::size_t pixels = masks.height * masks.width;
  if (static_cast<std::size_t>(masks.logits.rows()) != num_slots ||
      static_cast<std::size_t>(masks.logits.cols()) != pixels) {
    throw ShapeError("postprocess: mask logits do not match slots/frame size");
  }
  if (track_ids && track_ids->size() != num_slots) {
    throw ShapeError("postprocess: track id count != slot count");
  }

  PanopticFrame frame;
  frame.height = masks.height;
  frame.width = masks.width;
  frame.ids.assign(pixels, kVoidId);
  if (num_slots == 0) return frame;

  struct Candidate {
    std::size_t slot;
    std::uint32_t class_id;
    double confidence;
  };
  std::vector<Candidate> things, stuff;
  for (std::size_t l = 0; l < num_slots; ++l) {
    Eigen::Index best = 0;
    const double conf =
        cls.probs.row(static_cast<Eigen::Index>(l)).head(static_cast<Eigen::Index>(k)).maxCoeff(&best);
    if (conf < cfg.class_conf) continue;
    Candidate c{l, static_cast<std::uint32_t>(best), conf};
    (static_cast<std::size_t>(best) < num_thing_classes ? things : stuff).push_back(c);
  }
  auto by_confidence = [](const Candidate& a, const Candidate& b) {
    return a.confidence != b.confidence ? a.confidence > b.confidence : a.slot < b.slot;
  };
  std::sort(things.begin(), things.end(), by_confidence);

  const Eigen::MatrixXd probs = masks.slot_probabilities();
  const std::vector<std::size_t> winner = masks.assignment();
  // Whether each slot's best real class is a thing class, decided for every
  // slot regardless of survival.
  std::vector<char> thing_slot(num_slots, 0);
  for (std::size_t l = 0; l < num_slots; ++l) {
    Eigen::Index best = 0;
    cls.probs.row(static_cast<Eigen::Index>(l)).head(static_cast<Eigen::Index>(k)).maxCoeff(&best);
    thing_slot[l] = static_cast<std::size_t>(best) < num_thing_classes;
  }

  std::uint16_t next_id = 1;
  std::vector<char> painted(pixels, 0);
  for (const Candidate& c : things) {
    std::vector<std::size_t> mask;
    for (std::size_t x = 0; x < pixels; ++x) {
      if (thing_slot[winner[x]] &&
          probs(static_cast<Eigen::Index>(c.slot), static_cast<Eigen::Index>(x)) >=
              cfg.pixel_conf) {
        mask.push_back(x);
      }
    }
    if (mask.empty()) continue;
    std::size_t overlap = 0;
    for (std::size_t x : mask) overlap += painted[x] ? 1 : 0;
    if (static_cast<double>(overlap) >
        cfg.overlap_ratio * static_cast<double>(mask.size())) {
      continue;
    }
    const std::uint16_t id = next_id++;
    for (std::size_t x : mask) {
      if (!painted[x]) {
        painted[x] = 1;
        frame.ids[x] = id;
      }
    }
    const std::uint32_t track =
        track_ids ? (*track_ids)[c.slot] : static_cast<std::uint32_t>(c.slot + 1);
    frame.segments.push_back({id, c.class_id, true, track, c.confidence});
  }

  std::map<std::uint32_t, std::vector<const Candidate*>> stuff_by_class;
  for (const Candidate& c : stuff) stuff_by_class[c.class_id].push_back(&c);
  const double min_area = cfg.stuff_area_threshold(masks.height, masks.width);
  for (const auto& [class_id, members] : stuff_by_class) {
    std::vector<char> member(num_slots, 0);
    double confidence = 0.0;
    for (const Candidate* c : members) {
      member[c->slot] = 1;
      confidence = std::max(confidence, c->confidence);
    }
    std::vector<std::size_t> region;
    for (std::size_t x = 0; x < pixels; ++x) {
      if (member[winner[x]]) region.push_back(x);
    }
    if (region.empty() || static_cast<double>(region.size()) < min_area) continue;
    const std::uint16_t id = next_id++;
    for (std::size_t x : region) frame.ids[x] = id;
    frame.segments.push_back({id, class_id, false, 0, confidence});
  }
  return frame;
}

Eigen::MatrixXd cosine_similarity(const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("cosine_similarity: embedding widths differ");
  }
  auto normalized = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      const double n = m.row(r).norm();
      if (n > 0) out.row(r) /= n;
    }
    return out;
  };
  return normalized(a) * normalized(b).transpose();
}

TrackAssignment initial_tracks(std::size_t num_slots, std::uint32_t first_id) {
  TrackAssignment t;
  for (std::size_t l = 0; l < num_slots; ++l) {
    t.ids.push_back(first_id + static_cast<std::uint32_t>(l));
  }
  t.next_id = first_id + static_cast<std::uint32_t>(num_slots);
  return t;
}

TrackAssignment assign_tracks(const Eigen::MatrixXd& current,
                              const Eigen::MatrixXd& previous,
                              const TrackAssignment& previous_tracks,
                              double threshold, TrackMatching matching) {
  if (current.cols() != previous.cols()) {
    throw ShapeError("assign_tracks: embedding widths differ");
  }
  if (previous_tracks.ids.size() != static_cast<std::size_t>(previous.rows())) {
    throw ShapeError("assign_tracks: previous assignment does not cover all slots");
  }
  const Eigen::MatrixXd sim = cosine_similarity(current, previous);
  const std::size_t n = static_cast<std::size_t>(sim.rows());
  const std::size_t m = static_cast<std::size_t>(sim.cols());

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (matching == TrackMatching::kHungarian) {
    pairs = hungarian(-sim).pairs;
  } else {
    struct Entry {
      double sim;
      std::size_t i, j;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        entries.push_back({sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), i, j});
      }
    }
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.sim > b.sim; });
    std::vector<char> row_used(n, 0), col_used(m, 0);
    for (const Entry& e : entries) {
      if (row_used[e.i] || col_used[e.j]) continue;
      row_used[e.i] = col_used[e.j] = 1;
      pairs.emplace_back(e.i, e.j);
    }
  }

  TrackAssignment out;
  out.ids.assign(n, 0);
  out.next_id = previous_tracks.next_id;
  for (const auto& [i, j] : pairs) {
    if (sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) >= threshold) {
      out.ids[i] = previous_tracks.ids[j];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (out.ids[i] == 0) out.ids[i] = out.next_id++;
  }
  return out;
}

}  // namespace panoslot
