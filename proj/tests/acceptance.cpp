// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.
//
//   helios_acceptance --workdir DIR

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <numeric>

#include "grad_cases.hpp"
#include "helios/pipeline.hpp"
#include "oracles.hpp"

using namespace helios;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void emit(int id, const std::string& what, const Verdict& v) {
  std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << what << "  ["
            << v.detail << "]" << std::endl;
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Pinned tolerances and budgets.
constexpr double kHandTol = 5e-7;           // 6 decimal places
constexpr double kMarginTol = 1e-12;
constexpr double kRowSumTol = 1e-6;
constexpr double kRadialTol = 1e-12;
constexpr double kOracleBudget = 10.0;      // s
constexpr double kGradBudget = 60.0;        // s
constexpr double kLearnBudget = 600.0;      // s
constexpr double kMinGain = 3.0;
constexpr double kMinFinalAr1 = 0.8;
constexpr std::size_t kMaxSteps = 2000;

Verdict overlap_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const OverlapConfig cfg;
  std::size_t equal = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(mix_seed(1, seed));
    const PointCloud a = test::random_cloud(rng, 1 + rng.below(500), 60.0);
    PointCloud b = test::random_cloud(rng, 1 + rng.below(500), 60.0);
    for (auto& p : b.points) p.x += rng.uniform(-40, 40);
    if (symmetric_overlap(a, b, cfg) ==
        oracle::brute_symmetric_overlap(a, b, cfg.voxel_size, cfg.nn_threshold)) {
      ++equal;
    }
  }
  const double secs = seconds_since(t0);
  return {equal == 50 && secs < kOracleBudget,
          fmt("%.0f/50 pairs equal, %.2f s", double(equal), secs)};
}

Verdict hand_cases() {
  const OverlapConfig cfg;
  PointCloud single, pair, far;
  single.points = {{0, 0, 0}};
  pair.points = {{0, 0, 0}, {100, 0, 0}};
  far.points = {{50, 50, 0}};
  Rng rng(2);
  const PointCloud self = voxel_downsample(test::random_cloud(rng, 400, 60.0), cfg.voxel_size);
  const double o_self = directed_overlap(self, self, cfg);
  const double o_disjoint = directed_overlap(single, far, cfg);
  const double o_hand = directed_overlap(single, pair, cfg);
  bool ok = std::abs(o_self - 1.0) < kHandTol && std::abs(o_disjoint) < kHandTol &&
            std::abs(o_hand - 2.0 / 3.0) < kHandTol;
  std::size_t symmetric = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r(mix_seed(2, seed));
    const PointCloud a = test::random_cloud(r, 1 + r.below(400), 40.0);
    PointCloud b = test::random_cloud(r, 1 + r.below(400), 40.0);
    for (auto& p : b.points) p.y += r.uniform(-30, 30);
    if (symmetric_overlap(a, b, cfg) == symmetric_overlap(b, a, cfg)) ++symmetric;
  }
  ok = ok && symmetric == 100;
  return {ok, fmt("self %.6f, disjoint %.6f, hand %.6f", o_self, o_disjoint, o_hand) +
                  fmt(", %.0f/100 symmetric", double(symmetric))};
}

Verdict class_thresholds() {
  const std::pair<double, PairClass> probes[] = {{0.0, PairClass::Negative},
                                                 {1e-9, PairClass::SemiPositive},
                                                 {0.5, PairClass::SemiPositive},
                                                 {0.5 + 1e-9, PairClass::Positive},
                                                 {1.0, PairClass::Positive}};
  std::string detail;
  bool ok = true;
  for (const auto& [o, want] : probes) {
    const PairClass got = classify_pair(o);
    ok = ok && got == want;
    detail += (detail.empty() ? "" : ", ") + fmt("%.10g", o) + "->" + std::string(to_string(got));
  }
  return {ok, detail};
}

Verdict margin_constants() {
  LossConfig c;
  c.m1 = 0.02;
  c.m2 = 0.19;
  c.beta = std::numbers::e - 1.0;
  const double ov1 = overlap_transform(1.0, c.beta), ov0 = overlap_transform(0.0, c.beta);
  const double ps = adaptive_margin(MarginKind::PositiveSemi, ov1, ov0, 0.0, c);
  const double sn = adaptive_margin(MarginKind::SemiNegative, 0.0, ov0, ov0, c);
  return {std::abs(ps - 0.02) <= kMarginTol && std::abs(sn - 0.19) <= kMarginTol,
          fmt("alpha_ps %.15g, alpha_sn %.15g", ps, sn)};
}

Verdict gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t checks = 0, passed = 0;
  std::string first_failure;
  auto cases = test::op_cases();
  const auto modules = test::module_cases();
  cases.insert(cases.end(), modules.begin(), modules.end());
  for (const auto& c : cases) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto r = test::run_case(c, seed);
      ++checks;
      if (r.passed) {
        ++passed;
      } else if (first_failure.empty()) {
        first_failure = std::string(c.name) + " seed " + std::to_string(seed) + " " + r.summary();
      }
    }
  }
  const double secs = seconds_since(t0);
  std::string detail = fmt("%.0f/%.0f checks over %.0f cases", double(passed), double(checks),
                           double(cases.size())) +
                       fmt(", %.1f s", secs);
  if (!first_failure.empty()) detail += "; " + first_failure;
  return {passed == checks && secs < kGradBudget, detail};
}

Verdict sinkhorn_marginals() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(mix_seed(6, seed));
    const std::size_t n = 1 + rng.below(32);
    const std::size_t m = 1 + rng.below(8);
    ad::Tape t;
    const ad::Var p =
        ad::exp(sinkhorn_log(t.constant(test::random_tensor(rng, {n, m + 1}, -3, 3)), 10));
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0;
      for (std::size_t j = 0; j <= m; ++j) s += p.value().at(i, j);
      worst = std::max(worst, std::abs(s - 1.0));
    }
  }
  return {worst <= kRowSumTol, fmt("max |row sum - 1| = %.3g over 100 matrices", worst)};
}

std::size_t encoded_length(std::size_t m, std::size_t l, std::size_t e) {
  EncoderConfig c;
  c.cluster_count = m;
  c.cluster_dim = l;
  c.global_dim = e;
  c.levels = 1;
  Rng rng(7);
  PointCloud cloud;
  for (int i = 0; i < 200; ++i) {
    cloud.points.push_back({rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.2, 0.2)});
  }
  return encode_descriptor(init_parameters(c, 1), cloud, c).values.size();
}

Verdict descriptor_dims() {
  const std::size_t a = encoded_length(8, 32, 0), b = encoded_length(64, 128, 256);
  return {a == 256 && b == 8448, fmt("(8,32,0) -> %.0f, (64,128,256) -> %.0f", double(a), double(b))};
}

Verdict window_partition() {
  const double phis[] = {1.8, 3.6, 10, 45, 90, 120};
  std::size_t matched = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(mix_seed(8, seed));
    WindowSpec s;
    s.radial_size = rng.uniform(0.5, 30);
    s.theta_size = rng.uniform(1, 40);
    s.phi_size = phis[rng.below(6)];
    s.cubic_size = rng.uniform(0.1, 10);
    std::vector<Point3> pts;
    for (int i = 0; i < 1000; ++i) {
      pts.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-20, 20)});
    }
    for (auto kind : {WindowKind::Spherical, WindowKind::Cubic}) {
      for (int level = 0; level <= 2; ++level) {
        ++total;
        const auto got = partition(pts, s, level, kind);
        const auto want = oracle::group_by_bins(pts, s, level, kind);
        bool same = got.size() == want.size();
        auto w = want.begin();
        for (auto g = got.begin(); same && g != got.end(); ++g, ++w) {
          same = g->first.bins == w->first && g->second == w->second;
        }
        if (same) ++matched;
      }
    }
  }
  const WindowSpec def;
  double worst = 0;
  for (int level = 0; level <= 2; ++level) {
    worst = std::max(worst, std::abs(def.radial_width(level) - 10.0 * std::pow(1.5, level)));
  }
  return {matched == total && worst <= kRadialTol,
          fmt("%.0f/%.0f partitions match, radial width error %.3g", double(matched), double(total),
              worst)};
}

// ---------------------------------------------------------------------------

struct Dataset {
  fs::path dir;
  fs::path manifest() const { return dir / "manifest.txt"; }
  fs::path matrix() const { return dir / "overlap.txt"; }
  fs::path tuples() const { return dir / "tuples.txt"; }
};

constexpr std::uint64_t kDataSeed = 7;

EvalConfig cross_profile_eval() {
  EvalConfig c;
  c.correctness_overlap = 0.5;
  c.cross_session_only = true;
  return c;
}

Dataset build_dataset(const fs::path& dir, std::uint64_t seed, std::size_t scenes,
                      std::size_t negatives) {
  GenOptions g;
  g.scene_count = scenes;
  g.poses_per_scene = 1;
  g.profiles = {"wide", "narrow", "rosette"};
  cmd_gen(seed, g, dir);
  cmd_overlap(seed, dir / "manifest.txt", OverlapConfig{}, 1, dir / "overlap.txt");
  MineConfig mc;
  mc.counts.negatives = negatives;
  cmd_mine(seed, dir / "overlap.txt", dir / "manifest.txt", mc, dir / "tuples.txt");
  return {dir};
}

EvalReport train_and_eval(const Dataset& d, std::uint64_t train_seed, bool guided, std::size_t steps,
                          const std::string& tag) {
  TrainRun run;
  run.loss.use_guided = guided;
  run.train.steps = steps;
  if (steps < run.train.milestone2) {
    run.train.milestone1 = steps * 6 / 10;
    run.train.milestone2 = steps * 85 / 100;
  }
  const fs::path weights = d.dir / (tag + ".hlkw");
  cmd_train(train_seed, d.manifest(), d.tuples(), run, weights);
  return cmd_eval(weights, d.manifest(), d.matrix(), cross_profile_eval(), d.dir / (tag + ".txt"));
}

// Same-scene cross-profile pairs against different-scene pairs, by cosine.
std::string heterogeneity_note(const fs::path& store) {
  const auto descs = read_descriptor_store(store);
  const auto scene = [](const Descriptor& d) { return d.scan_id.substr(0, 4); };
  const auto cosine = [](const Descriptor& a, const Descriptor& b) {
    return std::inner_product(a.values.begin(), a.values.end(), b.values.begin(), 0.0);
  };
  std::size_t closer = 0, triples = 0;
  for (const auto& a : descs) {
    for (const auto& b : descs) {
      if (&a == &b || scene(a) != scene(b)) continue;
      const double same = cosine(a, b);
      for (const auto& c : descs) {
        if (scene(c) == scene(a)) continue;
        ++triples;
        if (same > cosine(a, c)) ++closer;
      }
    }
  }
  return fmt("same-scene cross-profile pair closer than a different-scene pair in %.1f%% of %.0f "
             "triples",
             100.0 * double(closer) / double(std::max<std::size_t>(triples, 1)), double(triples));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"helios acceptance run"};
  std::string workdir = (fs::temp_directory_path() / "helios_acceptance").string();
  app.add_option("--workdir", workdir, "Scratch directory (recreated)");
  CLI11_PARSE(app, argc, argv);
  const fs::path root(workdir);
  fs::remove_all(root);
  fs::create_directories(root);

  try {
    emit(1, "overlap grid equals exhaustive NN on 50 pairs, < 10 s", overlap_oracle());
    emit(2, "directed overlap hand cases to 6 dp; symmetric overlap bit-exact symmetric",
         hand_cases());
    emit(3, "classify_pair boundary probes", class_thresholds());
    emit(4, "adaptive margins 0.02 and 0.19 within 1e-12", margin_constants());
    emit(5, "central-difference gradcheck over 20 seeds, < 60 s", gradient_suite());
    emit(6, "Sinkhorn row sums within 1e-6 after 10 iterations", sinkhorn_marginals());
    emit(7, "descriptor lengths 256 and 8448", descriptor_dims());
    emit(8, "window partition equals group-by oracle; radial width 10*1.5^l", window_partition());

    // 30 scenes x 3 profiles, every other scene mined as a negative.
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset d = build_dataset(root / "learn", kDataSeed, 30, 87);
    const EvalReport base = train_and_eval(d, kDataSeed, true, 0, "untrained");
    const EvalReport trained = train_and_eval(d, kDataSeed, true, kMaxSteps, "guided_7");
    const double secs9 = seconds_since(t0);
    const double b1 = base.recall_at(1), f1 = trained.recall_at(1);
    emit(9, "desk-scale learning: AR@1 x3 over untrained and >= 0.8 within 10 min",
         {f1 >= kMinGain * b1 && f1 >= kMinFinalAr1 && secs9 < kLearnBudget,
          fmt("untrained %.4f, trained %.4f", b1, f1) +
              fmt(", gain x%.2f, %.0f s, ", b1 > 0 ? f1 / b1 : 0.0, secs9) +
              std::to_string(trained.evaluated_queries) + " queries"});
    std::cout << "note: " << heterogeneity_note(d.dir / "guided_7.txt.hlkd") << std::endl;

    double guided_sum = f1, plain_sum = 0;
    std::string detail;
    for (std::uint64_t s : {7ULL, 8ULL, 9ULL}) {
      const double g = s == 7 ? f1 : train_and_eval(d, s, true, kMaxSteps, "guided_" + std::to_string(s)).recall_at(1);
      if (s != 7) guided_sum += g;
      const double p = train_and_eval(d, s, false, kMaxSteps, "tsap_" + std::to_string(s)).recall_at(1);
      plain_sum += p;
      detail += fmt("seed %.0f: guided %.4f tsap %.4f; ", double(s), g, p);
    }
    const double gm = guided_sum / 3, pm = plain_sum / 3;
    emit(10, "mean AR@1 with guided terms >= ranking loss alone over 3 seeds",
         {gm >= pm, detail + fmt("mean guided %.4f, tsap %.4f", gm, pm)});

    const auto once = [&](const std::string& name) {
      const Dataset small = build_dataset(root / name, 11, 6, 8);
      return train_and_eval(small, 11, true, 30, "run");
    };
    const EvalReport r1 = once("determinism_a");
    const EvalReport r2 = once("determinism_b");
    const bool same_text = io::read_file(root / "determinism_a" / "run.txt") ==
                           io::read_file(root / "determinism_b" / "run.txt");
    emit(11, "gen->overlap->mine->train->eval twice gives identical EvalReports",
         {r1 == r2 && same_text,
          fmt("AR@1 %.4f vs %.4f, ", r1.recall_at(1), r2.recall_at(1)) +
              (same_text ? "report files identical" : "report files differ")});
  } catch (const std::exception& e) {
    std::cout << "acceptance aborted: " << e.what() << std::endl;
    return 2;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
