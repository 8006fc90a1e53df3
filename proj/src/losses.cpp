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

#include "panoslot/losses.hpp"

#include <map>
#include <string>

#include "panoslot/errors.hpp"
#include "panoslot/hungarian.hpp"
#include "panoslot/ops.hpp"

namespace panoslot {
namespace {

void check_frame(const MaskPrediction& masks, const PanopticFrame& gt) {
  if (masks.height != gt.height || masks.width != gt.width ||
      static_cast<std::size_t>(masks.logits.cols()) != gt.pixels()) {
    throw ShapeError("matching: prediction is " + std::to_string(masks.height) + "x" +
                     std::to_string(masks.width) + ", ground truth " +
                     std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
}

// Index into gt.segments of every pixel's segment, or -1 for void.
std::vector<long> segment_index_map(const PanopticFrame& gt) {
  std::map<std::uint16_t, long> index;
  for (std::size_t j = 0; j < gt.segments.size(); ++j) {
    index[gt.segments[j].id] = static_cast<long>(j);
  }
  std::vector<long> out(gt.ids.size(), -1);
  for (std::size_t p = 0; p < gt.ids.size(); ++p) {
    if (gt.ids[p] == kVoidId) continue;
    auto it = index.find(gt.ids[p]);
    if (it == index.end()) throw ConfigError("ground truth pixel id without record");
    out[p] = it->second;
  }
  return out;
}

// Identity of a segment across frames: things by track, stuff by class.
std::pair<bool, std::uint32_t> identity(const SegmentInfo& s) {
  return {s.is_thing, s.is_thing ? s.track_id : s.class_id};
}

template <typename S>
Var<S> accumulate(const Var<S>& acc, const Var<S>& term, double weight) {
  Var<S> w = scale(term, static_cast<S>(weight));
  return acc.valid() ? add(acc, w) : w;
}

template <typename S>
double scalar_value(const Var<S>& v) {
  return v.valid() ? static_cast<double>(v.value()[0]) : 0.0;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {pq, inst_disc, mask_id_ce, semseg, id}) {
    if (!(w >= 0)) throw ConfigError("loss weights must be >= 0");
  }
}

Eigen::MatrixXd matching_cost(const ClassPrediction& cls, const MaskPrediction& masks,
                              const PanopticFrame& gt) {
  check_frame(masks, gt);
  const std::size_t l = cls.num_slots(), n = gt.segments.size();
  if (static_cast<std::size_t>(masks.logits.rows()) != l) {
    throw ShapeError("matching: class and mask predictions disagree on slot count");
  }
  const Eigen::MatrixXd q = masks.slot_probabilities();
  const std::vector<long> seg = segment_index_map(gt);
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l),
                                                static_cast<Eigen::Index>(n));
  Eigen::VectorXd q_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(l));
  Eigen::VectorXd m_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t p = 0; p < seg.size(); ++p) {
    if (seg[p] < 0) continue;
    const auto col = q.col(static_cast<Eigen::Index>(p));
    inter.col(seg[p]) += col;
    q_sum += col;
    m_sum[seg[p]] += 1.0;
  }
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      const double dice = (2.0 * inter(i, j) + kDiceEps) / (q_sum[i] + m_sum[j] + kDiceEps);
      const auto c = static_cast<Eigen::Index>(gt.segments[static_cast<std::size_t>(j)].class_id);
      if (c >= cls.probs.cols() - 1) throw ConfigError("matching: class id out of range");
      cost(i, j) = -cls.probs(i, c) * dice;
    }
  }
  return cost;
}

FrameMatch match_slots(const ClassPrediction& cls, const MaskPrediction& masks,
                       const PanopticFrame& gt, bool allow_partial) {
  const std::size_t l = cls.num_slots(), n = gt.segments.size();
  if (n > l && !allow_partial) {
    throw ConfigError("matching: " + std::to_string(n) +
                      " ground-truth segments but only " + std::to_string(l) + " slots");
  }
  FrameMatch m;
  std::vector<char> used(l, 0);
  if (n > 0) {
    const Assignment a = hungarian(matching_cost(cls, masks, gt));
    m.pairs = a.pairs;
    m.total_cost = a.total_cost;
    for (const auto& [slot, seg] : m.pairs) used[slot] = 1;
  } else {
    check_frame(masks, gt);
  }
  for (std::size_t s = 0; s < l; ++s) {
    if (!used[s]) m.unmatched_slots.push_back(s);
  }
  return m;
}

template <typename S>
ClassPrediction class_prediction(const FrameOutputs<S>& f) {
  const auto logits = f.class_logits.value().matrix().template cast<double>();
  Eigen::MatrixXd p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return {p};
}

template <typename S>
MaskPrediction mask_prediction(const FrameOutputs<S>& f) {
  return {f.height, f.width, f.mask_logits.value().matrix().template cast<double>()};
}

template <typename S>
LossBreakdown<S> total_loss(const std::vector<FrameOutputs<S>>& outputs,
                            const std::vector<PanopticFrame>& gt,
                            const MatchResult& match, std::size_t num_classes,
                            const LossOptions& options) {
  if (outputs.empty() || outputs.size() != gt.size() || match.size() != gt.size()) {
    throw ShapeError("total_loss: need matching, non-empty output/GT/match lists");
  }
  options.weights.validate();
  const LossWeights& w = options.weights;
  const double frames = static_cast<double>(outputs.size());
  LossBreakdown<S> out;
  Var<S> total;

  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const FrameOutputs<S>& f = outputs[t];
    const PanopticFrame& g = gt[t];
    const FrameMatch& m = match[t];
    Tape<S>& tape = f.class_logits.tape();
    const std::size_t l = f.class_logits.dim(0);
    const std::size_t hw = g.pixels();
    if (f.mask_logits.dim(1) != hw || f.height != g.height || f.width != g.width) {
      throw ShapeError("total_loss: frame " + std::to_string(t) + " size mismatch");
    }
    const std::vector<long> seg = segment_index_map(g);
    std::vector<long> seg_slot(g.segments.size(), -1);
    std::vector<std::size_t> slot_class(l, num_classes);
    for (const auto& [slot, j] : m.pairs) {
      seg_slot[j] = static_cast<long>(slot);
      slot_class[slot] = g.segments[j].class_id;
    }

    // PQ-style: class NLL split between matched and no-object slots, plus
    // Dice on matched masks.
    Var<S> nll = scale(pick(log_softmax(f.class_logits, 1), slot_class), S(-1));
    Var<S> pq;
    if (options.positive_weight < 0 || m.pairs.empty() || m.unmatched_slots.empty()) {
      pq = mean(nll);
    } else {
      std::vector<std::size_t> matched;
      for (const auto& pr : m.pairs) matched.push_back(pr.first);
      const S alpha = S(options.positive_weight);
      pq = add(scale(mean(gather_rows(reshape(nll, {l, 1}), matched)), alpha),
               scale(mean(gather_rows(reshape(nll, {l, 1}), m.unmatched_slots)), S(1) - alpha));
    }
    Var<S> q = softmax(f.mask_logits, 0);
    if (!m.pairs.empty()) {
      std::vector<std::size_t> slots;
      Tensor<S> target({m.pairs.size(), hw}), valid({m.pairs.size(), hw});
      Tensor<S> area({m.pairs.size()});
      for (std::size_t r = 0; r < m.pairs.size(); ++r) {
        slots.push_back(m.pairs[r].first);
        for (std::size_t p = 0; p < hw; ++p) {
          if (seg[p] < 0) continue;
          valid[r * hw + p] = S(1);
          if (static_cast<std::size_t>(seg[p]) == m.pairs[r].second) {
            target[r * hw + p] = S(1);
            area[r] += S(1);
          }
        }
      }
      Var<S> qv = mul(gather_rows(q, slots), tape.constant(std::move(valid)));
      Var<S> inter = reduce_sum(mul(qv, tape.constant(std::move(target))), 1);
      Var<S> denom = add_scalar(add(reduce_sum(qv, 1), tape.constant(std::move(area))),
                                S(kDiceEps));
      Var<S> dice = div(add_scalar(scale(inter, S(2)), S(kDiceEps)), denom);
      pq = add(pq, add_scalar(scale(mean(dice), S(-1)), S(1)));
    }
    out.pq += scalar_value(pq) / frames;
    total = accumulate(total, pq, w.pq / frames);

    // Per-pixel slot cross-entropy against the matched slot.
    std::vector<std::size_t> px, px_slot, sem_px, sem_class;
    for (std::size_t p = 0; p < hw; ++p) {
      if (seg[p] < 0) continue;
      sem_px.push_back(p);
      sem_class.push_back(g.segments[static_cast<std::size_t>(seg[p])].class_id);
      const long s = seg_slot[static_cast<std::size_t>(seg[p])];
      if (s < 0) continue;
      px.push_back(p);
      px_slot.push_back(static_cast<std::size_t>(s));
    }
    if (!px.empty()) {
      Var<S> logq = transpose(log_softmax(f.mask_logits, 0));
      Var<S> ce = scale(mean(pick(gather_rows(logq, px), px_slot)), S(-1));
      out.mask_id_ce += scalar_value(ce) / frames;
      total = accumulate(total, ce, w.mask_id_ce / frames);
    }

    // Semantic cross-entropy of the class-marginalized mask distribution.
    if (!sem_px.empty()) {
      Var<S> probs = slice(softmax(f.class_logits, 1), 1, 0, num_classes);
      Var<S> marg = matmul(transpose(q), probs);
      Var<S> ce = scale(
          mean(pick(log(add_scalar(gather_rows(marg, sem_px), S(1e-8))), sem_class)),
          S(-1));
      out.semseg += scalar_value(ce) / frames;
      total = accumulate(total, ce, w.semseg / frames);
    }

    // Instance discrimination at feature resolution, GT sampled at cell centers.
    if (!m.pairs.empty()) {
      const std::size_t fh = f.feat_height, fw = f.feat_width;
      std::vector<std::size_t> cells, cell_slot;
      for (std::size_t i = 0; i < fh; ++i) {
        const std::size_t y = std::min(g.height - 1, (2 * i + 1) * g.height / (2 * fh));
        for (std::size_t j = 0; j < fw; ++j) {
          const std::size_t x = std::min(g.width - 1, (2 * j + 1) * g.width / (2 * fw));
          const long sg = seg[y * g.width + x];
          if (sg < 0 || seg_slot[static_cast<std::size_t>(sg)] < 0) continue;
          cells.push_back(i * fw + j);
          cell_slot.push_back(static_cast<std::size_t>(seg_slot[static_cast<std::size_t>(sg)]));
        }
      }
      if (!cells.empty()) {
        Var<S> pix = l2_normalize_rows(gather_rows(f.pixel_embed, cells));
        Var<S> slots = l2_normalize_rows(f.mask_embed);
        Var<S> logits =
            scale(matmul(pix, transpose(slots)), S(1.0 / options.disc_temperature));
        Var<S> ce = scale(mean(pick(log_softmax(logits, 1), cell_slot)), S(-1));
        out.inst_disc += scalar_value(ce) / frames;
        total = accumulate(total, ce, w.inst_disc / frames);
      }
    }
  }

  // Identification: both-direction CE on the cross-frame similarity matrix.
  if (outputs.size() > 1) {
    const double pairs = frames - 1.0;
    for (std::size_t t = 1; t < outputs.size(); ++t) {
      std::map<std::pair<bool, std::uint32_t>, std::size_t> prev_slot;
      for (const auto& [slot, j] : match[t - 1].pairs) {
        prev_slot[identity(gt[t - 1].segments[j])] = slot;
      }
      std::vector<std::size_t> cur, prev;
      for (const auto& [slot, j] : match[t].pairs) {
        auto it = prev_slot.find(identity(gt[t].segments[j]));
        if (it == prev_slot.end()) continue;
        cur.push_back(slot);
        prev.push_back(it->second);
      }
      if (cur.empty()) continue;
      Var<S> a = l2_normalize_rows(outputs[t].id_embed);
      Var<S> b = l2_normalize_rows(outputs[t - 1].id_embed);
      Var<S> sim = scale(matmul(a, transpose(b)), S(1.0 / options.id_temperature));
      Var<S> fwd = mean(pick(gather_rows(log_softmax(sim, 1), cur), prev));
      Var<S> bwd = mean(pick(gather_rows(log_softmax(transpose(sim), 1), prev), cur));
      Var<S> ce = scale(add(fwd, bwd), S(-0.5));
      out.id += scalar_value(ce) / pairs;
      total = accumulate(total, ce, w.id / pairs);
    }
  }
  out.total = total;
  return out;
}

template <typename S>
LossBreakdown<S> matched_loss(const std::vector<FrameOutputs<S>>& outputs,
                              const std::vector<PanopticFrame>& gt,
                              std::size_t num_classes, const LossOptions& options,
                              MatchResult* match_out) {
  if (outputs.size() != gt.size()) throw ShapeError("matched_loss: frame count mismatch");
  MatchResult match;
  for (std::size_t t = 0; t < gt.size(); ++t) {
    match.push_back(match_slots(class_prediction(outputs[t]), mask_prediction(outputs[t]),
                                gt[t], options.allow_partial_match));
  }
  auto out = total_loss(outputs, gt, match, num_classes, options);
  if (match_out) *match_out = std::move(match);
  return out;
}

#define PANOSLOT_INSTANTIATE(S)                                                    \
  template ClassPrediction class_prediction<S>(const FrameOutputs<S>&);            \
  template MaskPrediction mask_prediction<S>(const FrameOutputs<S>&);              \
  template LossBreakdown<S> total_loss<S>(const std::vector<FrameOutputs<S>>&,     \
                                          const std::vector<PanopticFrame>&,       \
                                          const MatchResult&, std::size_t,         \
                                          const LossOptions&);                     \
  template LossBreakdown<S> matched_loss<S>(const std::vector<FrameOutputs<S>>&,   \
                                            const std::vector<PanopticFrame>&,     \
                                            std::size_t, const LossOptions&,       \
                                            MatchResult*);
PANOSLOT_INSTANTIATE(float)
PANOSLOT_INSTANTIATE(double)
#undef PANOSLOT_INSTANTIATE

}  // namespace panoslot
