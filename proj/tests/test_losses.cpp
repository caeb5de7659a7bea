#include <gtest/gtest.h>

#include <numbers>

#include "helios/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace helios {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Tensor unit_row(Rng& rng, std::size_t d) {
  Tensor t = test::random_tensor(rng, {1, d});
  double s = 0;
  for (double v : t.data()) s += v * v;
  for (double& v : t.data()) v /= std::sqrt(s);
  return t;
}

TEST(LossConfig, DefaultsAreThePublishedConstants) {
  const LossConfig c;
  EXPECT_EQ(c.m1, 0.02);
  EXPECT_EQ(c.m2, 0.19);
  EXPECT_EQ(c.beta, std::numbers::e - 1.0);
  EXPECT_EQ(c.omega1, 0.1);
  EXPECT_EQ(c.omega2, 0.1);
}

TEST(LossConfig, Validation) {
  LossConfig c;
  c.m1 = 0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = {};
  c.omega2 = -0.1;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = {};
  c.tsap_top_k = 0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  c = {};
  c.tsap_temperature = 0;
  EXPECT_THROW(c.validate(), InvalidParameter);
  EXPECT_EQ(LossConfig::from_key_values(LossConfig{}.to_key_values()).to_key_values().format(),
            LossConfig{}.to_key_values().format());
}

TEST(OverlapTransform, HandValues) {
  const double beta = std::numbers::e - 1.0;
  EXPECT_EQ(overlap_transform(0.0, beta), 0.0);
  EXPECT_NEAR(overlap_transform(1.0, beta), 1.0, 1e-15);
  EXPECT_NEAR(overlap_transform(0.5, beta), 0.62011, 1e-5);
  EXPECT_NEAR(overlap_transform(0.5, beta), std::log(1.859141), 1e-6);
  EXPECT_THROW(overlap_transform(1.5, beta), InvalidParameter);
  EXPECT_THROW(overlap_transform(0.5, 0.0), InvalidParameter);
}

TEST(OverlapTransform, MonotoneAndAmplifiesSmallOverlaps) {
  const double beta = std::numbers::e - 1.0;
  const double high_slope = (overlap_transform(1.0, beta) - overlap_transform(0.9, beta)) / 0.1;
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    double a = rng.uniform(0, 0.1), b = rng.uniform(0, 0.1);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    EXPECT_LT(overlap_transform(a, beta), overlap_transform(b, beta));
    EXPECT_GT((overlap_transform(b, beta) - overlap_transform(a, beta)) / (b - a), high_slope);
  }
}

TEST(AdaptiveMargin, HandValues) {
  const LossConfig c;
  const auto ov = [&](double o) { return overlap_transform(o, c.beta); };
  EXPECT_EQ(adaptive_margin(MarginKind::PositiveSemi, 0.4, 0.4, 0, c), 0.0);
  EXPECT_NEAR(adaptive_margin(MarginKind::SemiNegative, 0, ov(0), ov(0), c), 0.19, 1e-12);
  EXPECT_NEAR(adaptive_margin(MarginKind::PositiveSemi, ov(1), ov(0), 0, c), 0.02, 1e-12);
  EXPECT_LT(adaptive_margin(MarginKind::PositiveSemi, ov(0.2), ov(0.4), 0, c), 0.0);
}

TEST(AdaptiveMargin, SemiNegativeNeverBelowBase) {
  const LossConfig c;
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const double s = overlap_transform(rng.uniform(0, 0.5), c.beta);
    EXPECT_GE(adaptive_margin(MarginKind::SemiNegative, 0, s, 0.0, c), c.m2);
  }
}

// q at origin, u and v on the x-axis at the given distances.
struct Line {
  Tape t;
  Var q, u, v;
  Line(double du, double dv)
      : q(t.leaf(Tensor({1, 2}, {0, 0}))),
        u(t.leaf(Tensor({1, 2}, {du, 0}))),
        v(t.leaf(Tensor({1, 2}, {0, dv}))) {}
};

TEST(GuidedTriplet, HandValues) {
  {
    Line l(0.5, 1.0);
    EXPECT_EQ(guided_triplet(l.q, l.u, l.v, 0.02).value().item(), 0.0);
  }
  {
    Line l(0.7, 0.7);
    EXPECT_NEAR(guided_triplet(l.q, l.u, l.v, 0.19).value().item(), 0.19, 1e-15);
  }
  {
    Line l(0.7, 0.7);
    EXPECT_EQ(guided_triplet(l.q, l.u, l.u, -0.3).value().item(), 0.0);
    EXPECT_NEAR(guided_triplet(l.q, l.u, l.u, 0.3).value().item(), 0.3, 1e-15);
  }
}

TEST(GuidedTriplet, FlatRegionHasZeroGradient) {
  Line l(0.2, 1.2);
  const Var loss = guided_triplet(l.q, l.u, l.v, 0.1);
  EXPECT_EQ(loss.value().item(), 0.0);
  l.t.backward(loss);
  for (const Var& x : {l.q, l.u, l.v}) {
    const Tensor g = x.grad();
    for (double v : g.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(GuidedTriplet, NonNegativeAndShapeChecked) {
  Rng rng(3);
  Tape t;
  for (int i = 0; i < 200; ++i) {
    const Var q = t.constant(unit_row(rng, 6)), u = t.constant(unit_row(rng, 6)),
              v = t.constant(unit_row(rng, 6));
    EXPECT_GE(guided_triplet(q, u, v, rng.uniform(-0.5, 0.5)).value().item(), 0.0);
  }
  EXPECT_THROW(guided_triplet(t.constant(Tensor({1, 3})), t.constant(Tensor({1, 4})),
                              t.constant(Tensor({1, 3})), 0.1),
               ShapeError);
}

TEST(GuidedTriplet, Gradcheck) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    // Margin chosen so the hinge is active and away from its kink.
    const std::vector<Tensor> in{unit_row(rng, 5), unit_row(rng, 5), unit_row(rng, 5)};
    const auto r = ad::gradcheck(
        [](Tape&, const std::vector<Var>& v) { return guided_triplet(v[0], v[1], v[2], 3.0); }, in);
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.summary();
  }
}

std::vector<Var> candidates_with_sims(Tape& t, const Var& q, const std::vector<double>& sims) {
  // q = e0, candidate i = sims[i]·e0 + sqrt(1 - sims²)·e_{i+1}.
  std::vector<Var> out;
  const std::size_t d = q.shape()[1];
  for (std::size_t i = 0; i < sims.size(); ++i) {
    Tensor c({1, d});
    c[0] = sims[i];
    c[1 + i] = std::sqrt(1 - sims[i] * sims[i]);
    out.push_back(t.constant(c));
  }
  return out;
}

TEST(Tsap, PerfectRankingNearZero) {
  LossConfig c;
  c.tsap_temperature = 1e-4;
  Tape t;
  Tensor qt({1, 5});
  qt[0] = 1;
  const Var q = t.constant(qt);
  const auto cands = candidates_with_sims(t, q, {0.9, 0.2, -0.1});
  EXPECT_LT(tsap_loss(q, cands, {true, false, false}, c).value().item(), 1e-12);
}

TEST(Tsap, PositiveRankedSecondHardLimit) {
  LossConfig c;
  c.tsap_temperature = 1e-4;
  Tape t;
  Tensor qt({1, 3});
  qt[0] = 1;
  const Var q = t.constant(qt);
  const auto cands = candidates_with_sims(t, q, {0.3, 0.8});
  const double loss = tsap_loss(q, cands, {true, false}, c).value().item();
  EXPECT_NEAR(loss, 1.0 - oracle::hard_truncated_ap({0.3, 0.8}, {true, false}, 2), 1e-12);
  EXPECT_NEAR(loss, 0.5, 1e-12);
}

TEST(Tsap, HardLimitMatchesBruteForceAp) {
  LossConfig c;
  c.tsap_temperature = 1e-6;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const std::size_t n = 3 + rng.below(8);
    std::vector<double> sims;
    std::vector<bool> rel(n, false);
    // Well-separated similarities so the sigmoid is saturated.
    std::vector<double> grid;
    for (std::size_t i = 0; i < n; ++i) grid.push_back(-0.9 + 1.8 * double(i) / double(n));
    rng.shuffle(grid);
    sims = grid;
    rel[0] = true;
    rel[1] = false;
    for (std::size_t i = 2; i < n; ++i) rel[i] = rng.uniform() < 0.4;
    c.tsap_top_k = 1 + rng.below(3);
    Tape t;
    Tensor qt({1, n + 1});
    qt[0] = 1;
    const Var q = t.constant(qt);
    const double loss = tsap_loss(q, candidates_with_sims(t, q, sims), rel, c).value().item();
    EXPECT_NEAR(loss, 1.0 - oracle::hard_truncated_ap(sims, rel, c.tsap_top_k), 1e-9) << seed;
  }
}

TEST(Tsap, PermutationInvariant) {
  const LossConfig c;
  Rng rng(4);
  std::vector<Tensor> cands;
  for (int i = 0; i < 7; ++i) cands.push_back(unit_row(rng, 6));
  const Tensor q = unit_row(rng, 6);
  std::vector<bool> rel{true, false, true, false, false, true, false};
  const auto loss = [&](const std::vector<std::size_t>& order) {
    Tape t;
    std::vector<Var> cs;
    std::vector<bool> r;
    for (auto i : order) {
      cs.push_back(t.constant(cands[i]));
      r.push_back(rel[i]);
    }
    return tsap_loss(t.constant(q), cs, r, c).value().item();
  };
  std::vector<std::size_t> order{0, 1, 2, 3, 4, 5, 6};
  const double base = loss(order);
  for (int trial = 0; trial < 10; ++trial) {
    rng.shuffle(order);
    EXPECT_NEAR(loss(order), base, 1e-14);
  }
}

TEST(Tsap, Contracts) {
  const LossConfig c;
  Tape t;
  const Var q = t.constant(Tensor({1, 2}, {1, 0}));
  const Var a = t.constant(Tensor({1, 2}, {0, 1}));
  EXPECT_THROW(tsap_loss(q, {a, a}, {false, false}, c), ContractError);
  EXPECT_THROW(tsap_loss(q, {a, a}, {true, true}, c), ContractError);
  EXPECT_THROW(tsap_loss(q, {a}, {true, false}, c), ShapeError);
  EXPECT_THROW(tsap_loss(q, {a, t.constant(Tensor({1, 3}))}, {true, false}, c), ShapeError);
}

TEST(Tsap, Gradcheck) {
  LossConfig c;
  c.tsap_temperature = 0.5;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> in{unit_row(rng, 4)};
    for (int i = 0; i < 5; ++i) in.push_back(unit_row(rng, 4));
    const std::vector<bool> rel{true, true, true, false, false};
    // Top-k selection must not flip under the probe; check the gap.
    c.tsap_top_k = 2;
    const auto r = ad::gradcheck(
        [&](Tape&, const std::vector<Var>& v) {
          return tsap_loss(v[0], {v.begin() + 1, v.end()}, rel, c);
        },
        in);
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.summary();
  }
}

BatchEmbedding batch_on(Tape& t, const std::vector<Tensor>& x, std::size_t np, std::size_t ns,
                        std::size_t nn, bool grad) {
  BatchEmbedding b;
  std::size_t i = 0;
  b.query = t.leaf(x[i++], grad);
  for (std::size_t k = 0; k < np; ++k) b.positives.push_back(t.leaf(x[i++], grad));
  for (std::size_t k = 0; k < ns; ++k) b.semi_positives.push_back(t.leaf(x[i++], grad));
  for (std::size_t k = 0; k < nn; ++k) b.negatives.push_back(t.leaf(x[i++], grad));
  for (std::size_t k = 0; k < np; ++k) b.positive_overlaps.push_back(0.6 + 0.1 * double(k));
  for (std::size_t k = 0; k < ns; ++k) b.semi_overlaps.push_back(0.1 + 0.15 * double(k));
  b.negative_overlaps.assign(nn, 0.0);
  return b;
}

TEST(TotalLoss, NoSemiPositivesIsTsapExactly) {
  Rng rng(5);
  std::vector<Tensor> x;
  for (int i = 0; i < 5; ++i) x.push_back(unit_row(rng, 6));
  Tape t;
  const BatchEmbedding b = batch_on(t, x, 2, 0, 2, false);
  const LossTerms terms = total_loss(b, LossConfig{});
  EXPECT_EQ(terms.total.value().item(), terms.tsap.value().item());
  EXPECT_FALSE(terms.guided_ps.has_value());
  Tape t2;
  std::vector<Var> cands{t2.constant(x[1]), t2.constant(x[2]), t2.constant(x[3]), t2.constant(x[4])};
  EXPECT_EQ(terms.total.value().item(),
            tsap_loss(t2.constant(x[0]), cands, {true, true, false, false}, {}).value().item());
}

TEST(TotalLoss, ManualCompositionOneEach) {
  // q=(1,0,0); p at distance 0.3, s at 0.5, n at 0.6 along separate axes.
  const LossConfig c;
  Tape t;
  BatchEmbedding b;
  b.query = t.constant(Tensor({1, 4}, {1, 0, 0, 0}));
  const auto at = [&](double dist, std::size_t axis) {
    // Unit vector at Euclidean distance `dist` from q.
    const double cosv = 1 - dist * dist / 2;
    Tensor v({1, 4});
    v[0] = cosv;
    v[axis] = std::sqrt(1 - cosv * cosv);
    return t.constant(v);
  };
  b.positives = {at(0.3, 1)};
  b.semi_positives = {at(0.5, 2)};
  b.negatives = {at(0.6, 3)};
  b.positive_overlaps = {0.9};
  b.semi_overlaps = {0.25};
  b.negative_overlaps = {0.0};
  const LossTerms terms = total_loss(b, c);

  const double ov_p = std::log((std::numbers::e - 1) * 0.9 + 1);
  const double ov_s = std::log((std::numbers::e - 1) * 0.25 + 1);
  const double gt_ps = std::max(0.3 - 0.5 + 0.02 * (ov_p - ov_s), 0.0);
  const double gt_sn = std::max(0.5 - 0.6 + 0.19 * (ov_s + 1), 0.0);
  // Smooth-AP with one positive and one negative.
  const double sp = 1 - 0.3 * 0.3 / 2, sn = 1 - 0.6 * 0.6 / 2;
  const double sig = 1 / (1 + std::exp(-(sn - sp) / 0.01));
  const double tsap = 1 - 1 / (1 + sig);
  EXPECT_NEAR(terms.tsap.value().item(), tsap, 1e-12);
  EXPECT_NEAR(terms.guided_ps_value(), gt_ps, 1e-12);
  EXPECT_NEAR(terms.guided_sn_value(), gt_sn, 1e-12);
  EXPECT_NEAR(terms.total.value().item(), tsap + 0.1 * gt_ps + 0.1 * gt_sn, 1e-12);
  EXPECT_GT(gt_sn, 0.0);
}

TEST(TotalLoss, GuidedTermsAverageOverPairs) {
  Rng rng(6);
  std::vector<Tensor> x;
  for (int i = 0; i < 8; ++i) x.push_back(unit_row(rng, 6));
  const LossConfig c;
  Tape t;
  const BatchEmbedding b = batch_on(t, x, 2, 2, 3, false);
  const LossTerms terms = total_loss(b, c);
  double ps = 0, sn = 0;
  const auto ov = [&](double o) { return overlap_transform(o, c.beta); };
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      ps += guided_triplet(b.query, b.positives[i], b.semi_positives[j],
                           c.m1 * (ov(b.positive_overlaps[i]) - ov(b.semi_overlaps[j])))
                .value()
                .item();
    }
  }
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t k = 0; k < 3; ++k) {
      sn += guided_triplet(b.query, b.semi_positives[j], b.negatives[k],
                           c.m2 * (ov(b.semi_overlaps[j]) + 1))
                .value()
                .item();
    }
  }
  EXPECT_NEAR(terms.guided_ps_value(), ps / 4, 1e-14);
  EXPECT_NEAR(terms.guided_sn_value(), sn / 6, 1e-14);
  LossConfig off = c;
  off.use_guided = false;
  EXPECT_EQ(total_loss(b, off).total.value().item(), terms.tsap.value().item());
}

TEST(TotalLoss, Gradcheck) {
  LossConfig c;
  c.tsap_temperature = 0.3;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> x;
    for (int i = 0; i < 7; ++i) x.push_back(unit_row(rng, 5));
    const auto r = ad::gradcheck(
        [&](Tape& t, const std::vector<Var>& v) {
          BatchEmbedding b;
          b.query = v[0];
          b.positives = {v[1], v[2]};
          b.semi_positives = {v[3], v[4]};
          b.negatives = {v[5], v[6]};
          b.positive_overlaps = {0.7, 0.95};
          b.semi_overlaps = {0.2, 0.45};
          b.negative_overlaps = {0, 0};
          (void)t;
          return total_loss(b, c).total;
        },
        x, {1e-6, 1e-3, 1e-7});
    EXPECT_TRUE(r.passed) << "seed " << seed << ": " << r.summary();
  }
}

TEST(TotalLoss, CloserNegativeNeverLowersLoss) {
  const LossConfig c;
  Tape t;
  BatchEmbedding b;
  b.query = t.constant(Tensor({1, 3}, {1, 0, 0}));
  const auto unit = [&](double angle) {
    return t.constant(Tensor({1, 3}, {std::cos(angle), 0, std::sin(angle)}));
  };
  b.positives = {t.constant(Tensor({1, 3}, {std::cos(0.35), std::sin(0.35), 0}))};
  b.semi_positives = {t.constant(Tensor({1, 3}, {std::cos(0.5), -std::sin(0.5), 0}))};
  b.positive_overlaps = {0.8};
  b.semi_overlaps = {0.3};
  b.negative_overlaps = {0.0};
  double prev = -1;
  // Negative sweeps from far toward q through the active regions.
  for (double angle = 0.62; angle >= 0.3; angle -= 0.005) {
    b.negatives = {unit(angle)};
    const double loss = total_loss(b, c).total.value().item();
    EXPECT_GE(loss, prev - 1e-15) << angle;
    prev = loss;
  }
}

}  // namespace
}  // namespace helios
