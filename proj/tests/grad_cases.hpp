#pragma once

#include <functional>
#include <string>
#include <vector>

#include "helios/autodiff.hpp"
#include "helios/encoder.hpp"
#include "helios/losses.hpp"
#include "test_util.hpp"

// Gradient-check cases shared by the unit suite and the acceptance binary.
namespace helios::test {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

// Reduces any output to a scalar through fixed random weights so every
// output element contributes a distinct coefficient.
inline Var project(Tape& t, const Var& y, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xfeed));
  return ad::sum(ad::mul(y, t.constant(random_tensor(rng, y.shape()))));
}

struct OpCase {
  const char* name;
  std::function<std::vector<Tensor>(Rng&)> inputs;
  std::function<Var(Tape&, const std::vector<Var>&)> fn;
  ad::GradcheckOptions options{1e-5, 1e-4, 1e-7};
};

inline std::vector<OpCase> op_cases() {
  const auto mat = [](std::size_t r, std::size_t c, double lo = -1, double hi = 1) {
    return [=](Rng& g) { return std::vector<Tensor>{random_tensor(g, {r, c}, lo, hi)}; };
  };
  const auto two = [](Shape a, Shape b, double lo = -1, double hi = 1) {
    return [=](Rng& g) {
      return std::vector<Tensor>{random_tensor(g, a, lo, hi), random_tensor(g, b, lo, hi)};
    };
  };
  // Entries separated by at least 0.1 so max has no near-ties.
  const auto spread = [](Rng& g) {
    Tensor t({3, 4});
    std::vector<double> vals;
    for (int i = 0; i < 12; ++i) vals.push_back(0.1 * i);
    g.shuffle(vals);
    t.data() = vals;
    return std::vector<Tensor>{t};
  };
  // Avoids the relu/clamp kink.
  const auto away_from_zero = [](Rng& g) {
    Tensor t({3, 4});
    for (auto& v : t.data()) v = (g.uniform() < 0.5 ? -1 : 1) * g.uniform(0.1, 1.0);
    return std::vector<Tensor>{t};
  };
  return {
      {"add", two({3, 4}, {3, 4}), [](Tape&, auto& v) { return ad::add(v[0], v[1]); }},
      {"add_scalar_broadcast", two({1}, {3, 4}), [](Tape&, auto& v) { return ad::add(v[0], v[1]); }},
      {"sub", two({3, 4}, {3, 4}), [](Tape&, auto& v) { return ad::sub(v[0], v[1]); }},
      {"mul", two({3, 4}, {3, 4}), [](Tape&, auto& v) { return ad::mul(v[0], v[1]); }},
      {"mul_scalar_broadcast", two({3, 4}, {1}), [](Tape&, auto& v) { return ad::mul(v[0], v[1]); }},
      {"div", two({3, 4}, {3, 4}, 0.5, 2.0), [](Tape&, auto& v) { return ad::div(v[0], v[1]); }},
      {"scale", mat(3, 4), [](Tape&, auto& v) { return ad::scale(v[0], -2.5); }},
      {"add_constant", mat(3, 4), [](Tape&, auto& v) { return ad::add_scalar(v[0], 0.7); }},
      {"scalar_pow", mat(3, 4, 0.2, 2.0), [](Tape&, auto& v) { return ad::scalar_pow(v[0], 2.7); }},
      {"exp", mat(3, 4), [](Tape&, auto& v) { return ad::exp(v[0]); }},
      {"log", mat(3, 4, 0.2, 3.0), [](Tape&, auto& v) { return ad::log(v[0]); }},
      {"sqrt", mat(3, 4, 0.2, 3.0), [](Tape&, auto& v) { return ad::sqrt(v[0]); }},
      {"tanh", mat(3, 4, -2, 2), [](Tape&, auto& v) { return ad::tanh(v[0]); }},
      {"sigmoid", mat(3, 4, -4, 4), [](Tape&, auto& v) { return ad::sigmoid(v[0]); }},
      {"relu", away_from_zero, [](Tape&, auto& v) { return ad::relu(v[0]); }},
      {"clamp_min", away_from_zero, [](Tape&, auto& v) { return ad::clamp_min(v[0], 0.0); }},
      {"matmul", two({3, 5}, {5, 2}), [](Tape&, auto& v) { return ad::matmul(v[0], v[1]); }},
      {"transpose", mat(3, 5), [](Tape&, auto& v) { return ad::transpose(v[0]); }},
      {"reshape", mat(3, 4), [](Tape&, auto& v) { return ad::reshape(v[0], {2, 6}); }},
      {"expand_rows", mat(1, 4), [](Tape&, auto& v) { return ad::expand(v[0], {5, 4}); }},
      {"expand_cols", mat(3, 1), [](Tape&, auto& v) { return ad::expand(v[0], {3, 6}); }},
      {"slice", mat(4, 6), [](Tape&, auto& v) { return ad::slice(v[0], 1, 2, 5); }},
      {"concat_cols", two({3, 2}, {3, 4}), [](Tape&, auto& v) { return ad::concat({v[0], v[1]}, 1); }},
      {"concat_rows", two({2, 4}, {3, 4}), [](Tape&, auto& v) { return ad::concat({v[0], v[1]}, 0); }},
      {"sum", mat(3, 4), [](Tape&, auto& v) { return ad::sum(v[0]); }},
      {"mean", mat(3, 4), [](Tape&, auto& v) { return ad::mean(v[0]); }},
      {"sum_along_axis", mat(3, 4), [](Tape&, auto& v) { return ad::sum_along_axis(v[0], 1); }},
      {"mean_along_axis", mat(3, 4), [](Tape&, auto& v) { return ad::mean_along_axis(v[0], 0); }},
      {"max_along_axis", spread, [](Tape&, auto& v) { return ad::max_along_axis(v[0], 1); }},
      {"softmax_along_axis", mat(3, 4, -2, 2), [](Tape&, auto& v) { return ad::softmax_along_axis(v[0], 1); }},
      {"logsumexp_along_axis", mat(3, 4, -2, 2), [](Tape&, auto& v) { return ad::logsumexp_along_axis(v[0], 0); }},
      {"l2_normalize", mat(1, 6), [](Tape&, auto& v) { return ad::l2_normalize(v[0]); }},
      {"grouped_attention",
       [](Rng& g) {
         return std::vector<Tensor>{random_tensor(g, {6, 3}), random_tensor(g, {6, 3}),
                                    random_tensor(g, {6, 2})};
       },
       [](Tape&, auto& v) {
         return ad::grouped_attention(v[0], v[1], v[2], {{0, 2, 5}, {1}, {3, 4}}, 0.7);
       }},
  };
}


inline EncoderConfig grad_encoder_config() {
  EncoderConfig c;
  c.feature_dim = 8;
  c.cluster_count = 3;
  c.cluster_dim = 4;
  c.global_dim = 4;
  c.global_hidden = 6;
  c.attention_heads = 2;
  c.sinkhorn_iterations = 5;
  c.levels = 1;
  c.window_spec.cubic_size = 0.5;
  c.window_spec.radial_size = 40.0;
  c.window_spec.theta_size = 60.0;
  c.window_spec.phi_size = 90.0;
  return c;
}

inline Tensor unit_row(Rng& rng, std::size_t d) {
  Tensor t = random_tensor(rng, {1, d});
  double s = 0;
  for (double v : t.data()) s += v * v;
  for (double& v : t.data()) v /= std::sqrt(s);
  return t;
}

// Encoder blocks and losses. Inputs are drawn per seed; centers for the
// attention case come from the same generator.
inline std::vector<OpCase> module_cases() {
  std::vector<OpCase> out;
  out.push_back({"gem_pool",
                 [](Rng& g) {
                   return std::vector<Tensor>{random_tensor(g, {8, 4}, 0.1, 2.0), Tensor::scalar(3.0)};
                 },
                 [](Tape&, auto& v) { return gem_pool(v[0], v[1]); }});
  out.push_back({"salad_aggregate",
                 [](Rng& g) {
                   return std::vector<Tensor>{random_tensor(g, {5, 6}), random_tensor(g, {6, 3}),
                                              random_tensor(g, {1, 3}), Tensor::scalar(g.uniform()),
                                              random_tensor(g, {6, 4}), random_tensor(g, {1, 4})};
                 },
                 [](Tape&, auto& v) {
                   return salad_aggregate(v[0], SaladWeights{v[1], v[2], v[3], v[4], v[5]}, 5);
                 }});
  // Centers are fixed per case; 12 points spread over the normalized cube.
  static const std::vector<Point3> centers = [] {
    Rng g(0xce);
    std::vector<Point3> pts;
    for (int i = 0; i < 12; ++i) {
      pts.push_back({g.uniform(-0.9, 0.9), g.uniform(-0.9, 0.9), g.uniform(-0.3, 0.3)});
    }
    return pts;
  }();
  out.push_back({"windowed_attention",
                 [](Rng& g) {
                   std::vector<Tensor> in{random_tensor(g, {12, 8})};
                   for (int i = 0; i < 4; ++i) in.push_back(random_tensor(g, {8, 8}, -0.6, 0.6));
                   return in;
                 },
                 [](Tape&, auto& v) {
                   return windowed_attention(v[0], centers, AttentionWeights{v[1], v[2], v[3], v[4]},
                                             grad_encoder_config(), 0);
                 }});
  out.push_back({"guided_triplet",
                 [](Rng& g) {
                   return std::vector<Tensor>{unit_row(g, 5), unit_row(g, 5), unit_row(g, 5)};
                 },
                 [](Tape&, auto& v) { return guided_triplet(v[0], v[1], v[2], 3.0); }});
  out.push_back({"tsap_loss",
                 [](Rng& g) {
                   std::vector<Tensor> in;
                   for (int i = 0; i < 6; ++i) in.push_back(unit_row(g, 4));
                   return in;
                 },
                 [](Tape&, auto& v) {
                   LossConfig c;
                   c.tsap_temperature = 0.5;
                   return tsap_loss(v[0], {v.begin() + 1, v.end()}, {true, true, true, false, false}, c);
                 }});
  out.push_back({"total_loss",
                 [](Rng& g) {
                   std::vector<Tensor> in;
                   for (int i = 0; i < 7; ++i) in.push_back(unit_row(g, 5));
                   return in;
                 },
                 [](Tape&, auto& v) {
                   LossConfig c;
                   c.tsap_temperature = 0.3;
                   BatchEmbedding b;
                   b.query = v[0];
                   b.positives = {v[1], v[2]};
                   b.semi_positives = {v[3], v[4]};
                   b.negatives = {v[5], v[6]};
                   b.positive_overlaps = {0.7, 0.95};
                   b.semi_overlaps = {0.2, 0.45};
                   b.negative_overlaps = {0, 0};
                   return total_loss(b, c).total;
                 },
                 {1e-6, 1e-3, 1e-7}});
  out.push_back({"embed_then_gem",
                 [](Rng& g) {
                   // Raw features of 10 voxels and the embedding weights.
                   return std::vector<Tensor>{random_tensor(g, {10, 7}, -0.5, 0.5),
                                              random_tensor(g, {7, 8}, -0.8, 0.8)};
                 },
                 [](Tape& t, auto& v) {
                   return gem_pool(ad::tanh(ad::matmul(v[0], v[1])), t.constant(Tensor::scalar(3.0)));
                 },
                 {1e-6, 1e-3, 1e-7}});
  return out;
}

inline ad::GradcheckReport run_case(const OpCase& c, std::uint64_t seed) {
  Rng rng(seed);
  const auto inputs = c.inputs(rng);
  return ad::gradcheck(
      [&](Tape& t, const std::vector<Var>& v) { return project(t, c.fn(t, v), seed); }, inputs,
      c.options);
}

}  // namespace helios::test
