#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <vector>

#include "helios/autodiff.hpp"
#include "helios/config.hpp"
#include "helios/error.hpp"

namespace helios {

struct LossConfig {
  double m1 = 0.02;
  double m2 = 0.19;
  double beta = std::numbers::e - 1.0;
  double omega1 = 0.1;
  double omega2 = 0.1;
  std::size_t tsap_top_k = 2;
  double tsap_temperature = 0.01;
  /// When false the guided-triplet terms are dropped (ranking loss only).
  bool use_guided = true;

  void validate() const {
    if (!(m1 > 0 && m2 > 0 && beta > 0)) throw InvalidParameter("m1, m2 and beta must be > 0");
    if (!(omega1 >= 0 && omega2 >= 0)) throw InvalidParameter("omega weights must be >= 0");
    if (tsap_top_k < 1) throw InvalidParameter("tsap_top_k must be >= 1");
    if (!(tsap_temperature > 0)) throw InvalidParameter("tsap_temperature must be > 0");
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("loss.m1", m1);
    kv.set("loss.m2", m2);
    kv.set("loss.beta", beta);
    kv.set("loss.omega1", omega1);
    kv.set("loss.omega2", omega2);
    kv.set("loss.tsap_top_k", tsap_top_k);
    kv.set("loss.tsap_temperature", tsap_temperature);
    kv.set("loss.use_guided", use_guided);
    return kv;
  }

  static LossConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, LossConfig{}); }

  static LossConfig from_key_values(const KeyValues& kv, LossConfig c) {
    c.m1 = kv.get("loss.m1", c.m1);
    c.m2 = kv.get("loss.m2", c.m2);
    c.beta = kv.get("loss.beta", c.beta);
    c.omega1 = kv.get("loss.omega1", c.omega1);
    c.omega2 = kv.get("loss.omega2", c.omega2);
    c.tsap_top_k = kv.get("loss.tsap_top_k", c.tsap_top_k);
    c.tsap_temperature = kv.get("loss.tsap_temperature", c.tsap_temperature);
    c.use_guided = kv.get("loss.use_guided", c.use_guided);
    c.validate();
    return c;
  }
};

/// OV(o) = log(β·o + 1).
inline double overlap_transform(double overlap, double beta) {
  if (!(overlap >= 0.0 && overlap <= 1.0)) {
    throw InvalidParameter("overlap " + std::to_string(overlap) + " outside [0, 1]");
  }
  if (!(beta > 0.0)) throw InvalidParameter("beta must be > 0");
  return std::log(beta * overlap + 1.0);
}

enum class MarginKind { PositiveSemi, SemiNegative };

/// Overlap-adaptive margins on transformed overlaps:
///   ps: m1 · (OV(q,p) − OV(q,s))      (may be negative; the hinge absorbs it)
///   sn: m2 · (OV(q,s) − OV(q,n) + 1)
inline double adaptive_margin(MarginKind kind, double ov_q_p, double ov_q_s, double ov_q_n,
                              const LossConfig& cfg) {
  return kind == MarginKind::PositiveSemi ? cfg.m1 * (ov_q_p - ov_q_s)
                                          : cfg.m2 * (ov_q_s - ov_q_n + 1.0);
}

/// Euclidean distance between two descriptors of equal shape.
inline ad::Var embedding_distance(const ad::Var& a, const ad::Var& b) {
  const ad::Var diff = ad::sub(a, b);
  return ad::sqrt(ad::sum(ad::mul(diff, diff)));
}

/// max(d(q,u) − d(q,v) + α, 0).
inline ad::Var guided_triplet(const ad::Var& q, const ad::Var& u, const ad::Var& v, double alpha) {
  if (q.shape() != u.shape() || q.shape() != v.shape()) {
    throw ShapeError("guided_triplet: descriptor shapes " + ad::shape_str(q.shape()) + ", " +
                     ad::shape_str(u.shape()) + ", " + ad::shape_str(v.shape()) + " differ");
  }
  const ad::Var gap = ad::sub(embedding_distance(q, u), embedding_distance(q, v));
  return ad::relu(ad::add_scalar(gap, alpha));
}

/// Truncated smooth-AP loss 1 − AP̃ over the k most similar positives.
///
/// Similarity is the dot product with the query. For a selected positive i,
///   R_P(i) = 1 + Σ_{j∈P, j≠i} σ((s_j − s_i)/T)
///   R_Ω(i) = R_P(i) + Σ_{n∈N} σ((s_n − s_i)/T)
/// and AP̃ is the mean of R_P(i)/R_Ω(i). Positive selection is by current
/// similarity (ties to the lower index) and is not differentiated.
inline ad::Var tsap_loss(const ad::Var& query, const std::vector<ad::Var>& candidates,
                         const std::vector<bool>& relevant, const LossConfig& cfg) {
  cfg.validate();
  if (candidates.size() != relevant.size()) {
    throw ShapeError("tsap_loss: " + std::to_string(candidates.size()) + " candidates but " +
                     std::to_string(relevant.size()) + " relevance flags");
  }
  const auto n_pos = static_cast<std::size_t>(std::count(relevant.begin(), relevant.end(), true));
  if (n_pos == 0) throw ContractError("tsap_loss: no positive candidate");
  if (n_pos == candidates.size()) throw ContractError("tsap_loss: no negative candidate");

  std::vector<ad::Var> sims;
  sims.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (c.shape() != query.shape()) {
      throw ShapeError("tsap_loss: candidate shape " + ad::shape_str(c.shape()) +
                       " vs query shape " + ad::shape_str(query.shape()));
    }
    sims.push_back(ad::sum(ad::mul(query, c)));
  }
  const std::size_t count = candidates.size();
  const ad::Var s = ad::concat(sims, 0);  // shape {count}

  std::vector<std::size_t> positives;
  for (std::size_t i = 0; i < count; ++i) {
    if (relevant[i]) positives.push_back(i);
  }
  std::stable_sort(positives.begin(), positives.end(), [&](std::size_t a, std::size_t b) {
    return s.value()[a] > s.value()[b];
  });
  positives.resize(std::min(positives.size(), cfg.tsap_top_k));

  ad::Tape& tape = *query.tape();
  ad::Tensor neg_mask({count});
  for (std::size_t j = 0; j < count; ++j) neg_mask[j] = relevant[j] ? 0.0 : 1.0;
  const ad::Var neg = tape.constant(neg_mask);

  std::vector<ad::Var> ratios;
  for (std::size_t i : positives) {
    ad::Tensor pos_mask({count});
    for (std::size_t j = 0; j < count; ++j) pos_mask[j] = (relevant[j] && j != i) ? 1.0 : 0.0;
    const ad::Var diff = ad::sub(s, ad::expand(ad::slice(s, 0, i, i + 1), {count}));
    const ad::Var sig = ad::sigmoid(ad::scale(diff, 1.0 / cfg.tsap_temperature));
    const ad::Var r_pos = ad::add_scalar(ad::sum(ad::mul(sig, tape.constant(pos_mask))), 1.0);
    const ad::Var r_all = ad::add(r_pos, ad::sum(ad::mul(sig, neg)));
    ratios.push_back(ad::div(r_pos, r_all));
  }
  const ad::Var ap = ad::mean(ad::concat(ratios, 0));
  return ad::add_scalar(ad::scale(ap, -1.0), 1.0);
}

/// Descriptors of one training tuple plus the query's overlap with each.
struct BatchEmbedding {
  ad::Var query;
  std::vector<ad::Var> positives;
  std::vector<ad::Var> semi_positives;
  std::vector<ad::Var> negatives;
  std::vector<double> positive_overlaps;
  std::vector<double> semi_overlaps;
  std::vector<double> negative_overlaps;
};

struct LossTerms {
  ad::Var total;
  ad::Var tsap;
  std::optional<ad::Var> guided_ps;  // mean over (p, s) pairs
  std::optional<ad::Var> guided_sn;  // mean over (s, n) pairs

  [[nodiscard]] double guided_ps_value() const { return guided_ps ? guided_ps->value().item() : 0.0; }
  [[nodiscard]] double guided_sn_value() const { return guided_sn ? guided_sn->value().item() : 0.0; }
};

namespace detail {

inline ad::Var mean_of(const std::vector<ad::Var>& terms) {
  ad::Var acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = ad::add(acc, terms[i]);
  return ad::scale(acc, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace detail

/// L = L_TSAP + ω1·mean L_GT(q,p,s) + ω2·mean L_GT(q,s,n). The ranking term
/// uses positives against negatives; without semi-positives L = L_TSAP.
inline LossTerms total_loss(const BatchEmbedding& b, const LossConfig& cfg) {
  cfg.validate();
  if (b.positive_overlaps.size() != b.positives.size() ||
      b.semi_overlaps.size() != b.semi_positives.size() ||
      b.negative_overlaps.size() != b.negatives.size()) {
    throw ContractError("total_loss: overlap lists do not match descriptor lists");
  }
  std::vector<ad::Var> candidates = b.positives;
  candidates.insert(candidates.end(), b.negatives.begin(), b.negatives.end());
  std::vector<bool> relevant(b.positives.size(), true);
  relevant.resize(candidates.size(), false);

  LossTerms terms;
  terms.tsap = tsap_loss(b.query, candidates, relevant, cfg);
  terms.total = terms.tsap;
  if (!cfg.use_guided || b.semi_positives.empty()) return terms;

  const auto ov = [&](double o) { return overlap_transform(o, cfg.beta); };
  std::vector<ad::Var> ps;
  for (std::size_t i = 0; i < b.positives.size(); ++i) {
    for (std::size_t j = 0; j < b.semi_positives.size(); ++j) {
      const double alpha = adaptive_margin(MarginKind::PositiveSemi, ov(b.positive_overlaps[i]),
                                           ov(b.semi_overlaps[j]), 0.0, cfg);
      ps.push_back(guided_triplet(b.query, b.positives[i], b.semi_positives[j], alpha));
    }
  }
  std::vector<ad::Var> sn;
  for (std::size_t j = 0; j < b.semi_positives.size(); ++j) {
    for (std::size_t k = 0; k < b.negatives.size(); ++k) {
      const double alpha = adaptive_margin(MarginKind::SemiNegative, 0.0, ov(b.semi_overlaps[j]),
                                           ov(b.negative_overlaps[k]), cfg);
      sn.push_back(guided_triplet(b.query, b.semi_positives[j], b.negatives[k], alpha));
    }
  }
  if (!ps.empty()) {
    terms.guided_ps = detail::mean_of(ps);
    terms.total = ad::add(terms.total, ad::scale(*terms.guided_ps, cfg.omega1));
  }
  if (!sn.empty()) {
    terms.guided_sn = detail::mean_of(sn);
    terms.total = ad::add(terms.total, ad::scale(*terms.guided_sn, cfg.omega2));
  }
  return terms;
}

}  // namespace helios
