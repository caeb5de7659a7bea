// helios command-line front end.
//
//   helios gen     --out DIR [--scenes N --poses N --profiles wide,narrow,rosette]
//   helios overlap --out DIR [--manifest PATH --threads N]
//   helios mine    --out DIR [--matrix PATH --positives N --semi N --negatives N]
//   helios train   --out DIR [--tuples PATH --steps N --lr X --no-guided]
//   helios eval    --out DIR [--weights PATH --database PATH --correctness X]
//   helios plot    --out DIR [--report PATH]
//
// Global: --seed, --config <key=value file>, --set key=value (repeatable).
// Exit codes: 0 success, 2 contract/validation error, 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "helios/pipeline.hpp"

namespace {

using namespace helios;

struct Global {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string out = ".";
  std::vector<std::string> overrides;
  unsigned threads = 1;
};

KeyValues load_config(const Global& g) {
  KeyValues kv;
  if (!g.config_path.empty()) {
    require_input(g.config_path, "a hand-written key=value config");
    kv = KeyValues::read(g.config_path);
  }
  for (const auto& o : g.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw InvalidParameter("--set expects key=value, got '" + o + "'");
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  return kv;
}

template <typename T>
void put(KeyValues& kv, const std::string& key, const std::optional<T>& v) {
  if (v) kv.set(key, *v);
}

fs::path or_default(const std::string& given, const fs::path& fallback) {
  return given.empty() ? fallback : fs::path(given);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HeLiOS heterogeneous-LiDAR place recognition toolkit"};
  app.fallthrough();
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "Seed recorded in every output")->capture_default_str();
  app.add_option("--config", g.config_path, "Flat key=value config file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--set", g.overrides, "Config override key=value (repeatable)");
  app.add_option("--threads", g.threads, "Worker threads for overlap/eval")->capture_default_str();

  auto* gen = app.add_subcommand("gen", "Generate a synthetic multi-sensor dataset");
  std::optional<std::size_t> scenes, poses;
  std::optional<std::string> profiles;
  gen->add_option("--scenes", scenes, "Scene count");
  gen->add_option("--poses", poses, "Poses per scene");
  gen->add_option("--profiles", profiles, "Comma-separated sensor profiles");

  auto* ovl = app.add_subcommand("overlap", "Compute the pairwise overlap matrix");
  std::string manifest_arg;
  std::optional<double> voxel, nn, trunc;
  ovl->add_option("--manifest", manifest_arg, "Dataset manifest (default OUT/manifest.txt)");
  ovl->add_option("--voxel-size", voxel);
  ovl->add_option("--nn-threshold", nn);
  ovl->add_option("--truncation", trunc);

  auto* mine = app.add_subcommand("mine", "Mine training tuples from the overlap matrix");
  std::string matrix_arg;
  std::optional<std::size_t> n_pos, n_semi, n_neg;
  bool same_sensor = false;
  mine->add_option("--matrix", matrix_arg, "Overlap matrix (default OUT/overlap.txt)");
  mine->add_option("--manifest", manifest_arg);
  mine->add_option("--positives", n_pos);
  mine->add_option("--semi", n_semi);
  mine->add_option("--negatives", n_neg);
  mine->add_flag("--same-sensor", same_sensor, "Restrict candidates to the query's sensor");

  auto* tr = app.add_subcommand("train", "Train the toy encoder");
  std::string tuples_arg, weights_arg;
  std::optional<std::size_t> steps;
  std::optional<double> lr;
  bool no_guided = false;
  tr->add_option("--manifest", manifest_arg);
  tr->add_option("--tuples", tuples_arg, "Training tuples (default OUT/tuples.txt)");
  tr->add_option("--weights", weights_arg, "Checkpoint path (default OUT/weights.hlkw)");
  tr->add_option("--steps", steps);
  tr->add_option("--lr", lr);
  tr->add_flag("--no-guided", no_guided, "Ranking loss only (drop guided-triplet terms)");

  auto* ev = app.add_subcommand("eval", "Encode the dataset and evaluate retrieval");
  std::string database_arg, report_arg;
  std::optional<double> correctness, exclusion;
  std::optional<std::size_t> k_max;
  bool cross_only = false;
  ev->add_option("--weights", weights_arg);
  ev->add_option("--manifest", manifest_arg);
  ev->add_option("--matrix", matrix_arg);
  ev->add_option("--database", database_arg, "Descriptor store used as the database");
  ev->add_option("--report", report_arg, "Report path (default OUT/report.txt)");
  ev->add_option("--correctness", correctness, "Correctness overlap threshold");
  ev->add_option("--exclusion", exclusion, "Intra-session exclusion window, seconds");
  ev->add_option("--k-max", k_max);
  ev->add_flag("--cross-session", cross_only, "Only retrieve from other sessions");

  auto* plot = app.add_subcommand("plot", "Render AR@k and PR curves");
  plot->add_option("--report", report_arg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    KeyValues kv = load_config(g);
    const fs::path out(g.out);
    const fs::path manifest = or_default(manifest_arg, out / "manifest.txt");
    const fs::path matrix = or_default(matrix_arg, out / "overlap.txt");
    const fs::path tuples = or_default(tuples_arg, out / "tuples.txt");
    const fs::path weights = or_default(weights_arg, out / "weights.hlkw");
    const fs::path report = or_default(report_arg, out / "report.txt");

    if (gen->parsed()) {
      put(kv, "gen.scene_count", scenes);
      put(kv, "gen.poses_per_scene", poses);
      put(kv, "gen.profiles", profiles);
      const GenResult r = cmd_gen(g.seed, GenOptions::from_key_values(kv), out);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << r.manifest.entries.size() << " scans -> " << (out / "manifest.txt").string()
                << '\n';
    } else if (ovl->parsed()) {
      OverlapConfig cfg;
      cfg.voxel_size = kv.get("overlap.voxel_size", cfg.voxel_size);
      cfg.nn_threshold = kv.get("overlap.nn_threshold", cfg.nn_threshold);
      cfg.truncation_distance = kv.get("overlap.truncation_distance", cfg.truncation_distance);
      if (voxel) cfg.voxel_size = *voxel;
      if (nn) cfg.nn_threshold = *nn;
      if (trunc) cfg.truncation_distance = *trunc;
      const auto m = cmd_overlap(g.seed, manifest, cfg, g.threads, out / "overlap.txt");
      std::cout << m.size() << " scans -> " << (out / "overlap.txt").string() << '\n';
    } else if (mine->parsed()) {
      put(kv, "mine.positives", n_pos);
      put(kv, "mine.semi_positives", n_semi);
      put(kv, "mine.negatives", n_neg);
      if (same_sensor) kv.set("mine.mix_sensors", false);
      const MineConfig cfg = MineConfig::from_key_values(kv);
      std::optional<fs::path> tags;
      if (!cfg.mix_sensors || fs::exists(manifest)) tags = manifest;
      const auto t = cmd_mine(g.seed, matrix, tags, cfg, out / "tuples.txt");
      std::cout << t.size() << " tuples -> " << (out / "tuples.txt").string() << '\n';
    } else if (tr->parsed()) {
      put(kv, "train.steps", steps);
      put(kv, "train.learning_rate", lr);
      if (no_guided) kv.set("loss.use_guided", false);
      const TrainRun run = TrainRun::from_key_values(kv);
      const auto r = cmd_train(g.seed, manifest, tuples, run, weights);
      std::cout << r.log.size() << " steps -> " << weights.string() << '\n';
    } else if (ev->parsed()) {
      put(kv, "eval.correctness_overlap", correctness);
      put(kv, "eval.exclusion_window", exclusion);
      put(kv, "eval.k_max", k_max);
      if (cross_only) kv.set("eval.cross_session_only", true);
      const EvalConfig cfg = EvalConfig::from_key_values(kv);
      std::optional<fs::path> db;
      if (!database_arg.empty()) db = fs::path(database_arg);
      const auto r = cmd_eval(weights, manifest, matrix, cfg, report, db, g.threads);
      std::cout << "AR@1 " << r.recall_at(1) << " over " << r.evaluated_queries << " queries -> "
                << report.string() << '\n';
    } else if (plot->parsed()) {
      fs::path prefix = report;
      prefix.replace_extension();
      cmd_plot(report, prefix);
      std::cout << prefix.string() << ".svg\n";
    }
    return 0;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 3;
  }
}
