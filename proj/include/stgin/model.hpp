/*
 * Copyright 2026 The stgin authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stgin/graph.hpp"
#include "stgin/params.hpp"
#include "stgin/tape.hpp"
#include "stgin/timeslot.hpp"

namespace stgin {

inline constexpr double kDefaultLeakySlope = 0.2;
inline constexpr double kDefaultMargin = 0.5;

// Model variants: the full model plus the ablations used in evaluation.
enum class Variant {
  Full,           // STGIN
  NoRealtime,     // STGIN-RT: drops the real-time behavior sequence
  NoTemporal,     // STGIN-Temporal: drops temporal-view subgraphs
  NoSpatial,      // STGIN-Spatial: drops spatial-view subgraphs
  NoInteraction,  // STGIN-Interaction: plain concat of u_h and u_r
  OnlyTemporal,   // only the slot-matched temporal view
  SumTemporal,    // sum pooling over temporal views
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "none";
    case Variant::NoRealtime: return "rt";
    case Variant::NoTemporal: return "temporal";
    case Variant::NoSpatial: return "spatial";
    case Variant::NoInteraction: return "interaction";
    case Variant::OnlyTemporal: return "only_temporal";
    case Variant::SumTemporal: return "sum_temporal";
  }
  return "?";
}

inline const char* variant_display_name(Variant v) {
  switch (v) {
    case Variant::Full: return "STGIN";
    case Variant::NoRealtime: return "STGIN-RT";
    case Variant::NoTemporal: return "STGIN-Temporal";
    case Variant::NoSpatial: return "STGIN-Spatial";
    case Variant::NoInteraction: return "STGIN-Interaction";
    case Variant::OnlyTemporal: return "STGIN_Only_Temporal";
    case Variant::SumTemporal: return "STGIN_Sum_Temporal";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::Full, Variant::NoRealtime, Variant::NoTemporal, Variant::NoSpatial,
                    Variant::NoInteraction, Variant::OnlyTemporal, Variant::SumTemporal})
    if (s == variant_name(v)) return v;
  throw ParseError("unknown variant: " + s);
}

// Collects attention distributions produced during a forward pass so tests
// can assert they are normalized.
template <typename Real>
struct AttnProbe {
  std::vector<std::pair<std::string, std::vector<Real>>> rows;
  void record(const char* tag, std::span<const Real> v) {
    rows.emplace_back(tag, std::vector<Real>(v.begin(), v.end()));
  }
};

// --- GAT -------------------------------------------------------------------

// One graph-attention layer with a self loop and no bias:
//   scores over {center} u neighbors, e_j = leaky(a . [W c || W h_j])
//   alpha = softmax(e), out = leaky(sum_j alpha_j W h_j)
template <typename Real>
typename Tape<Real>::Id gat_layer(Tape<Real>& t, typename Tape<Real>::Id w,
                                  typename Tape<Real>::Id a, Real slope,
                                  typename Tape<Real>::Id center,
                                  std::span<const typename Tape<Real>::Id> neighbors,
                                  AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  const Id wc = t.matvec(w, center);
  std::vector<Id> projected;
  projected.reserve(neighbors.size() + 1);
  projected.push_back(wc);
  for (Id n : neighbors) projected.push_back(t.matvec(w, n));
  std::vector<Id> scores;
  scores.reserve(projected.size());
  for (Id p : projected) scores.push_back(t.leaky_relu(t.dot(a, t.concat({wc, p})), slope));
  const Id alpha = t.softmax(t.concat(scores));
  if (probe) probe->record("gat", t.value(alpha));
  return t.leaky_relu(t.combine(alpha, projected), slope);
}

// Two-layer aggregation over a meta-path neighbor tree. Layer 1 runs per
// hop-1 POI over its hop-2 co-click neighbors (features are POI id
// embeddings); layer 2 aggregates the center feature with the layer-1
// outputs. The result is L2-normalized: raw two-layer outputs come out an
// order of magnitude smaller than the context embeddings, which starves the
// downstream gating, so every tower output lives on the unit sphere.
template <typename Real>
typename Tape<Real>::Id tree_embedding(Tape<Real>& t, const NeighborTree& tree,
                                       typename Tape<Real>::Id center_feat, int poi_emb_pidx,
                                       const char* l1w, const char* l1a, const char* l2w,
                                       const char* l2a, Real slope,
                                       AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  const Id w1 = t.param(l1w), a1 = t.param(l1a);
  std::vector<Id> hop1_out;
  hop1_out.reserve(tree.hop1.size());
  for (const auto& hop : tree.hop1) {
    std::vector<Id> feats;
    feats.reserve(hop.hop2.size());
    for (std::uint32_t n : hop.hop2) feats.push_back(t.lookup(poi_emb_pidx, n));
    hop1_out.push_back(
        gat_layer<Real>(t, w1, a1, slope, t.lookup(poi_emb_pidx, hop.node), feats, probe));
  }
  return t.l2_normalize(
      gat_layer<Real>(t, t.param(l2w), t.param(l2a), slope, center_feat, hop1_out, probe));
}

// --- multi-view interaction --------------------------------------------------

// View embeddings feeding one query encode; -1 marks an absent view, which
// is excluded from every softmax (masking, not imputation).
template <typename Real>
struct ViewNodes {
  using Id = typename Tape<Real>::Id;
  Id u_g = -1;
  Id u_s = -1;
  std::array<Id, kNumSlots> u_t{-1, -1, -1, -1};
  std::array<Id, kNumSlots> u_st{-1, -1, -1, -1};
};

// Attention over the per-slot views of one family, guided by the global
// view; logit_i = leaky(attn . [e_|t_i - t_q| || u_{t_i} || u_g]). Softmax
// runs over present views only; all-absent yields the zero vector.
template <typename Real>
typename Tape<Real>::Id slot_view_attention(Tape<Real>& t, const char* attn_param,
                                            const std::array<typename Tape<Real>::Id, kNumSlots>& views,
                                            typename Tape<Real>::Id u_g, int query_slot,
                                            std::uint32_t d, Real slope, const char* probe_tag,
                                            AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  const Id attn = t.param(attn_param);
  const int diff_pidx = t.param_index(pname::slot_diff_emb);
  std::vector<Id> logits, present;
  for (int slot = 0; slot < kNumSlots; ++slot) {
    if (views[std::size_t(slot)] < 0) continue;
    const Id diff = t.lookup(diff_pidx, std::uint32_t(circular_slot_distance(slot, query_slot)));
    const Id cat = t.concat({diff, views[std::size_t(slot)], u_g});
    logits.push_back(t.leaky_relu(t.dot(attn, cat), slope));
    present.push_back(views[std::size_t(slot)]);
  }
  if (present.empty()) return t.zeros(d);
  const Id alpha = t.softmax(t.concat(logits));
  if (probe) probe->record(probe_tag, t.value(alpha));
  return t.combine(alpha, present);
}

// u_h = leaky(W_h . [u_g || u_s || u_t || u_st])
template <typename Real>
typename Tape<Real>::Id fuse_views(Tape<Real>& t, typename Tape<Real>::Id u_g,
                                   typename Tape<Real>::Id u_s, typename Tape<Real>::Id u_t,
                                   typename Tape<Real>::Id u_st, Real slope) {
  return t.leaky_relu(t.matvec(t.param(pname::fuse_h), t.concat({u_g, u_s, u_t, u_st})), slope);
}

// One recently clicked POI as seen by the realtime attention.
template <typename Real>
struct RealtimeItem {
  typename Tape<Real>::Id e_p = -1;
  int slot_distance = 0;    // circular |t_ri - t_q|
  int distance_bucket = 0;  // haversine bucket |s_ri - s_q|
};

// u_r = sum_i alpha_i e_p_i with logits over
// [e_|t_ri - t_q| || e_|s_ri - s_q| || e_p_i || u_h]; the u_h factor is
// dropped by the plain-concat variant (attn_param then has width 3d).
template <typename Real>
typename Tape<Real>::Id realtime_interest(Tape<Real>& t, const char* attn_param, bool condition_on_uh,
                                          std::span<const RealtimeItem<Real>> items,
                                          typename Tape<Real>::Id u_h, std::uint32_t d, Real slope,
                                          AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  if (items.empty()) return t.zeros(d);
  const Id attn = t.param(attn_param);
  const int diff_pidx = t.param_index(pname::slot_diff_emb);
  const int dist_pidx = t.param_index(pname::dist_emb);
  std::vector<Id> logits, vecs;
  logits.reserve(items.size());
  vecs.reserve(items.size());
  for (const auto& item : items) {
    const Id dt = t.lookup(diff_pidx, std::uint32_t(item.slot_distance));
    const Id ds = t.lookup(dist_pidx, std::uint32_t(item.distance_bucket));
    const Id cat = condition_on_uh ? t.concat({dt, ds, item.e_p, u_h})
                                   : t.concat({dt, ds, item.e_p});
    logits.push_back(t.leaky_relu(t.dot(attn, cat), slope));
    vecs.push_back(item.e_p);
  }
  const Id alpha = t.softmax(t.concat(logits));
  if (probe) probe->record("realtime", t.value(alpha));
  return t.combine(alpha, vecs);
}

// --- adaptive fusion ---------------------------------------------------------

template <typename Real>
struct EncodedQuery {
  using Id = typename Tape<Real>::Id;
  Id u_h = -1;
  Id u_r = -1;
  Id e_q = -1;  // l2-normalized
  std::array<Real, 3> gates{0, 0, 0};
};

// Gating fusion e_q = a1 u_h + a2 u_r + a3 Wctx [e_tq || e_sq], gates from
// softmax([w_h.u_h, w_r.u_r, w_c.[e_tq||e_sq]]). The NoRealtime variant
// gates over two terms; NoInteraction projects [u_h || u_r] instead of
// gating. e_q is l2-normalized so cosine scores are a plain dot product.
template <typename Real>
EncodedQuery<Real> adaptive_fusion(Tape<Real>& t, typename Tape<Real>::Id u_h,
                                   typename Tape<Real>::Id u_r, int query_slot,
                                   std::uint32_t cell_row, Variant variant, Real slope,
                                   AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  EncodedQuery<Real> out;
  out.u_h = u_h;
  out.u_r = u_r;

  if (variant == Variant::NoInteraction) {
    const Id cat = t.concat({u_h, u_r});
    out.e_q = t.l2_normalize(t.matvec(t.param(pname::concat_proj), cat));
    return out;
  }

  const Id ctx_cat = t.concat({t.lookup(pname::slot_emb, std::uint32_t(query_slot)),
                               t.lookup(pname::cell_emb, cell_row)});
  const Id ctx = t.matvec(t.param(pname::ctx_proj), ctx_cat);

  if (variant == Variant::NoRealtime) {
    const Id logits = t.concat({t.dot(t.param(pname::gate_h), u_h),
                                t.dot(t.param(pname::gate_c), ctx_cat)});
    const Id gates = t.softmax(logits);
    if (probe) probe->record("gates", t.value(gates));
    auto gv = t.value(gates);
    out.gates = {gv[0], Real(0), gv[1]};
    out.e_q = t.l2_normalize(t.combine(gates, {u_h, ctx}));
    return out;
  }

  const Id logits = t.concat({t.dot(t.param(pname::gate_h), u_h),
                              t.dot(t.param(pname::gate_r), u_r),
                              t.dot(t.param(pname::gate_c), ctx_cat)});
  const Id gates = t.softmax(logits);
  if (probe) probe->record("gates", t.value(gates));
  auto gv = t.value(gates);
  out.gates = {gv[0], gv[1], gv[2]};
  out.e_q = t.l2_normalize(t.combine(gates, {u_h, u_r, ctx}));
  return out;
}

// Runs Eqs. 3-9 given already-materialized view embeddings. Shared between
// the training/eval path (views from GAT over sampled trees) and the serving
// path (views from the key-value snapshot).
template <typename Real>
EncodedQuery<Real> encode_from_views(Tape<Real>& t, const ViewNodes<Real>& views,
                                     std::span<const RealtimeItem<Real>> realtime, int query_slot,
                                     std::uint32_t cell_row, std::uint32_t d, Variant variant,
                                     Real slope, AttnProbe<Real>* probe = nullptr) {
  using Id = typename Tape<Real>::Id;
  const Id zero = t.zeros(d);
  const Id u_g = views.u_g >= 0 ? views.u_g : zero;
  const Id u_s = views.u_s >= 0 ? views.u_s : zero;

  Id u_t;
  switch (variant) {
    case Variant::NoTemporal:
      u_t = zero;
      break;
    case Variant::OnlyTemporal:
      u_t = views.u_t[std::size_t(query_slot)] >= 0 ? views.u_t[std::size_t(query_slot)] : zero;
      break;
    case Variant::SumTemporal: {
      Id acc = zero;
      for (Id v : views.u_t)
        if (v >= 0) acc = t.add(acc, v);
      u_t = acc;
      break;
    }
    default:
      u_t = slot_view_attention<Real>(t, pname::attn_t, views.u_t, u_g, query_slot, d, slope,
                                      "temporal", probe);
  }
  const Id u_st = slot_view_attention<Real>(t, pname::attn_st, views.u_st, u_g, query_slot, d,
                                            slope, "spatiotemporal", probe);
  const Id u_h = fuse_views<Real>(t, u_g, variant == Variant::NoSpatial ? zero : u_s, u_t, u_st,
                                  slope);

  Id u_r;
  if (variant == Variant::NoRealtime) {
    u_r = t.zeros(d);
  } else if (variant == Variant::NoInteraction) {
    u_r = realtime_interest<Real>(t, pname::attn_r_flat, false, realtime, u_h, d, slope, probe);
  } else {
    u_r = realtime_interest<Real>(t, pname::attn_r, true, realtime, u_h, d, slope, probe);
  }
  return adaptive_fusion<Real>(t, u_h, u_r, query_slot, cell_row, variant, slope, probe);
}

// --- similarity & loss --------------------------------------------------------

// Cosine similarity; both sides are normalized, the zero vector scores zero.
template <typename Real>
typename Tape<Real>::Id cosine(Tape<Real>& t, typename Tape<Real>::Id a,
                               typename Tape<Real>::Id b) {
  return t.dot(t.l2_normalize(a), t.l2_normalize(b));
}

// Pairwise hinge over K negatives:
//   sum_j max(0, margin - sim(e_q, p+) + sim(e_q, p_j-))
// e_q_normalized must already be unit length (adaptive_fusion's output is).
template <typename Real>
typename Tape<Real>::Id hinge_loss(Tape<Real>& t, typename Tape<Real>::Id e_q_normalized,
                                   typename Tape<Real>::Id positive,
                                   std::span<const typename Tape<Real>::Id> negatives,
                                   Real margin) {
  using Id = typename Tape<Real>::Id;
  const Id sim_pos = t.dot(e_q_normalized, t.l2_normalize(positive));
  std::vector<Id> terms;
  terms.reserve(negatives.size());
  for (Id neg : negatives) {
    const Id sim_neg = t.dot(e_q_normalized, t.l2_normalize(neg));
    terms.push_back(t.relu(t.add_scalar(t.sub(sim_neg, sim_pos), margin)));
  }
  return t.sum(t.concat(terms));
}

}  // namespace stgin
