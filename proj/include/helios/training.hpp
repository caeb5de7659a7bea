#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "helios/config.hpp"
#include "helios/encoder.hpp"
#include "helios/error.hpp"
#include "helios/losses.hpp"
#include "helios/mining.hpp"
#include "helios/random.hpp"

namespace helios {

/// SGD with momentum and a two-milestone step decay.
struct TrainConfig {
  std::size_t steps = 2000;
  double learning_rate = 0.02;
  double momentum = 0.9;
  std::size_t milestone1 = 1200;
  std::size_t milestone2 = 1700;
  double gamma = 0.1;
  std::size_t tuples_per_step = 2;
  /// Negatives drawn per tuple and step from the tuple's mined list; 0 uses all.
  std::size_t negatives_per_step = 8;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InvalidParameter("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidParameter("momentum must be in [0, 1)");
    if (milestone1 > milestone2) throw InvalidParameter("milestone1 must be <= milestone2");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidParameter("gamma must be in (0, 1]");
    if (tuples_per_step < 1) throw InvalidParameter("tuples_per_step must be >= 1");
    if (!(grad_clip >= 0.0)) throw InvalidParameter("grad_clip must be >= 0");
  }

  [[nodiscard]] double rate_at(std::size_t step) const {
    double lr = learning_rate;
    if (step >= milestone1) lr *= gamma;
    if (step >= milestone2) lr *= gamma;
    return lr;
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("train.steps", steps);
    kv.set("train.learning_rate", learning_rate);
    kv.set("train.momentum", momentum);
    kv.set("train.milestone1", milestone1);
    kv.set("train.milestone2", milestone2);
    kv.set("train.gamma", gamma);
    kv.set("train.tuples_per_step", tuples_per_step);
    kv.set("train.negatives_per_step", negatives_per_step);
    kv.set("train.grad_clip", grad_clip);
    return kv;
  }

  static TrainConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, TrainConfig{}); }

  static TrainConfig from_key_values(const KeyValues& kv, TrainConfig c) {
    c.steps = kv.get("train.steps", c.steps);
    c.learning_rate = kv.get("train.learning_rate", c.learning_rate);
    c.momentum = kv.get("train.momentum", c.momentum);
    c.milestone1 = kv.get("train.milestone1", c.milestone1);
    c.milestone2 = kv.get("train.milestone2", c.milestone2);
    c.gamma = kv.get("train.gamma", c.gamma);
    c.tuples_per_step = kv.get("train.tuples_per_step", c.tuples_per_step);
    c.negatives_per_step = kv.get("train.negatives_per_step", c.negatives_per_step);
    c.grad_clip = kv.get("train.grad_clip", c.grad_clip);
    c.validate();
    return c;
  }
};

struct TrainLogEntry {
  std::size_t step = 0;
  double learning_rate = 0.0;
  double tsap = 0.0;
  double guided_ps = 0.0;
  double guided_sn = 0.0;
  double total = 0.0;

  friend bool operator==(const TrainLogEntry&, const TrainLogEntry&) = default;
};

struct TrainResult {
  ParameterSet params;
  std::vector<TrainLogEntry> log;
};

/// Loss terms and parameter gradients for one tuple.
struct TupleGradient {
  LossTerms terms;
  double tsap = 0.0;
  double guided_ps = 0.0;
  double guided_sn = 0.0;
  double total = 0.0;
  ParameterSet gradients;
};

inline TupleGradient tuple_gradient(const ParameterSet& params, const TrainingTuple& tuple,
                                    const std::map<std::string, PointCloud>& clouds,
                                    const EncoderConfig& enc, const LossConfig& loss) {
  const auto cloud = [&](const std::string& id) -> const PointCloud& {
    auto it = clouds.find(id);
    if (it == clouds.end()) throw ContractError("no preprocessed cloud for scan '" + id + "'");
    return it->second;
  };
  const auto overlap = [&](const std::string& id) {
    auto it = tuple.overlaps.find(id);
    if (it == tuple.overlaps.end()) {
      throw ContractError("tuple for '" + tuple.query_id + "' lacks overlap for '" + id + "'");
    }
    return it->second;
  };

  ad::Tape tape;
  const BoundParameters bound(tape, params, true);
  BatchEmbedding b;
  b.query = encode(bound, cloud(tuple.query_id), enc);
  for (const auto& id : tuple.positive_ids) {
    b.positives.push_back(encode(bound, cloud(id), enc));
    b.positive_overlaps.push_back(overlap(id));
  }
  if (loss.use_guided) {
    for (const auto& id : tuple.semi_positive_ids) {
      b.semi_positives.push_back(encode(bound, cloud(id), enc));
      b.semi_overlaps.push_back(overlap(id));
    }
  }
  for (const auto& id : tuple.negative_ids) {
    b.negatives.push_back(encode(bound, cloud(id), enc));
    b.negative_overlaps.push_back(overlap(id));
  }
  TupleGradient out;
  out.terms = total_loss(b, loss);
  tape.backward(out.terms.total);
  out.tsap = out.terms.tsap.value().item();
  out.guided_ps = out.terms.guided_ps_value();
  out.guided_sn = out.terms.guided_sn_value();
  out.total = out.terms.total.value().item();
  out.gradients = bound.gradients();
  return out;
}

using TrainCallback = std::function<void(const TrainLogEntry&)>;

/// Tuples are visited in seeded epoch-wise permutations. Zero steps returns
/// the initial parameters unchanged.
inline TrainResult train(ParameterSet params, const std::vector<TrainingTuple>& tuples,
                         const std::map<std::string, PointCloud>& clouds,
                         const EncoderConfig& enc, const LossConfig& loss, const TrainConfig& cfg,
                         const TrainCallback& on_step = {}) {
  enc.validate();
  loss.validate();
  cfg.validate();
  TrainResult result;
  if (cfg.steps == 0) {
    result.params = std::move(params);
    return result;
  }
  if (tuples.empty()) throw EmptyMining("train: no training tuples");

  Rng rng(mix_seed(cfg.seed, 0x7472a1e5ULL));
  std::vector<std::size_t> order(tuples.size());
  std::size_t cursor = order.size();

  ParameterSet velocity;
  for (const auto& [name, t] : params) velocity.emplace(name, ad::Tensor(t.shape()));

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    ParameterSet grad;
    for (const auto& [name, t] : params) grad.emplace(name, ad::Tensor(t.shape()));
    TrainLogEntry entry;
    entry.step = step;
    entry.learning_rate = cfg.rate_at(step);
    for (std::size_t b = 0; b < cfg.tuples_per_step; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order);
        cursor = 0;
      }
      const TrainingTuple& full = tuples[order[cursor++]];
      TrainingTuple tuple = full;
      if (cfg.negatives_per_step > 0 && cfg.negatives_per_step < full.negative_ids.size()) {
        auto picked = rng.sample_without_replacement(full.negative_ids.size(),
                                                     cfg.negatives_per_step);
        std::sort(picked.begin(), picked.end());
        tuple.negative_ids.clear();
        for (std::size_t i : picked) tuple.negative_ids.push_back(full.negative_ids[i]);
      }
      const TupleGradient g = tuple_gradient(params, tuple, clouds, enc, loss);
      for (auto& [name, t] : grad) {
        const auto& src = g.gradients.at(name).data();
        for (std::size_t i = 0; i < t.size(); ++i) t[i] += src[i];
      }
      entry.tsap += g.tsap;
      entry.guided_ps += g.guided_ps;
      entry.guided_sn += g.guided_sn;
      entry.total += g.total;
    }
    const double inv = 1.0 / static_cast<double>(cfg.tuples_per_step);
    entry.tsap *= inv;
    entry.guided_ps *= inv;
    entry.guided_sn *= inv;
    entry.total *= inv;

    double norm_sq = 0.0;
    for (auto& [name, t] : grad) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        t[i] *= inv;
        norm_sq += t[i] * t[i];
      }
    }
    double clip = 1.0;
    if (cfg.grad_clip > 0.0 && std::sqrt(norm_sq) > cfg.grad_clip) {
      clip = cfg.grad_clip / std::sqrt(norm_sq);
    }
    for (auto& [name, p] : params) {
      ad::Tensor& v = velocity.at(name);
      const ad::Tensor& g = grad.at(name);
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = cfg.momentum * v[i] + clip * g[i];
        p[i] -= entry.learning_rate * v[i];
      }
    }
    if (on_step) on_step(entry);
    result.log.push_back(entry);
  }
  result.params = std::move(params);
  return result;
}

inline std::string format_train_log(const std::vector<TrainLogEntry>& log,
                                    const std::string& header = "") {
  std::ostringstream out;
  out << header << "step lr tsap gt_ps gt_sn total\n";
  char buf[192];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu %.6g %.9f %.9f %.9f %.9f\n", e.step, e.learning_rate,
                  e.tsap, e.guided_ps, e.guided_sn, e.total);
    out << buf;
  }
  return out.str();
}

}  // namespace helios
