#pragma once

// File-level pipeline steps behind the command-line tool:
// gen -> overlap -> mine -> train -> eval -> plot.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "helios/config.hpp"
#include "helios/encoder.hpp"
#include "helios/error.hpp"
#include "helios/geometry.hpp"
#include "helios/losses.hpp"
#include "helios/mining.hpp"
#include "helios/overlap.hpp"
#include "helios/random.hpp"
#include "helios/retrieval.hpp"
#include "helios/scan_io.hpp"
#include "helios/training.hpp"

namespace helios {

namespace fs = std::filesystem;

/// FNV-1a; stable across platforms, used to derive per-scan seeds.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Header lines recorded in every output: the seed, then the config.
inline std::vector<std::string> run_header(std::uint64_t seed, const KeyValues& cfg) {
  std::vector<std::string> lines{"seed=" + std::to_string(seed)};
  for (const auto& [k, v] : cfg.entries()) lines.push_back(k + "=" + v);
  return lines;
}

inline std::string header_text(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += "# " + l + "\n";
  return out;
}

/// Throws IoError naming the subcommand expected to produce `path`.
inline void require_input(const fs::path& path, std::string_view producer) {
  if (!fs::exists(path)) {
    throw IoError("missing input " + path.string() + " (produced by `helios " +
                  std::string(producer) + "`)");
  }
}

struct PreprocessConfig {
  double max_range = 100.0;
  std::size_t point_budget = 4096;

  void validate() const {
    if (!(max_range > 0.0)) throw InvalidParameter("preprocess.max_range must be > 0");
    if (point_budget == 0) throw InvalidParameter("preprocess.point_budget must be > 0");
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("preprocess.max_range", max_range);
    kv.set("preprocess.point_budget", point_budget);
    return kv;
  }

  static PreprocessConfig from_key_values(const KeyValues& kv) {
    PreprocessConfig c;
    c.max_range = kv.get("preprocess.max_range", c.max_range);
    c.point_budget = kv.get("preprocess.point_budget", c.point_budget);
    c.validate();
    return c;
  }
};

/// Loads and preprocesses every manifest scan; per-scan sampling seeds derive
/// from (seed, scan_id).
inline std::map<std::string, PointCloud> prepare_clouds(const Manifest& manifest,
                                                        const PreprocessConfig& cfg,
                                                        std::uint64_t seed) {
  cfg.validate();
  std::map<std::string, PointCloud> clouds;
  for (const auto& e : manifest.entries) {
    clouds.emplace(e.scan_id, preprocess_scan(manifest.load(e), cfg.max_range, cfg.point_budget,
                                              mix_seed(seed, stable_hash(e.scan_id))));
  }
  return clouds;
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

struct GenOptions {
  std::size_t scene_count = 30;
  std::size_t poses_per_scene = 1;
  std::vector<std::string> profiles{"wide", "narrow", "rosette"};
  /// Distance between consecutive poses of one scene, meters.
  double pose_step = 6.0;
  /// Scenes are laid out this far apart in the world frame.
  double scene_spacing = 1000.0;
  double sensor_height = 1.8;

  void validate() const {
    if (profiles.empty()) throw InvalidParameter("gen: at least one profile is required");
    for (const auto& p : profiles) (void)profile_by_name(p);
    if (!(pose_step >= 0.0)) throw InvalidParameter("gen.pose_step must be >= 0");
    if (!(scene_spacing > 0.0)) throw InvalidParameter("gen.scene_spacing must be > 0");
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("gen.scene_count", scene_count);
    kv.set("gen.poses_per_scene", poses_per_scene);
    std::string joined;
    for (std::size_t i = 0; i < profiles.size(); ++i) joined += (i ? "," : "") + profiles[i];
    kv.set("gen.profiles", joined);
    kv.set("gen.pose_step", pose_step);
    kv.set("gen.scene_spacing", scene_spacing);
    kv.set("gen.sensor_height", sensor_height);
    return kv;
  }

  static GenOptions from_key_values(const KeyValues& kv) {
    GenOptions g;
    g.scene_count = kv.get("gen.scene_count", g.scene_count);
    g.poses_per_scene = kv.get("gen.poses_per_scene", g.poses_per_scene);
    if (kv.has("gen.profiles")) {
      g.profiles.clear();
      std::istringstream in(kv.get("gen.profiles", std::string{}));
      std::string item;
      while (std::getline(in, item, ',')) {
        if (!item.empty()) g.profiles.push_back(item);
      }
    }
    g.pose_step = kv.get("gen.pose_step", g.pose_step);
    g.scene_spacing = kv.get("gen.scene_spacing", g.scene_spacing);
    g.sensor_height = kv.get("gen.sensor_height", g.sensor_height);
    g.validate();
    return g;
  }
};

struct GenResult {
  Manifest manifest;
  std::vector<std::string> warnings;
};

inline std::string scan_name(std::size_t scene, std::size_t pose, std::string_view profile) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "s%03zu_p%02zu_", scene, pose);
  return buf + std::string(profile);
}

/// Writes out/manifest.txt and out/scans/<scan_id>.hlks. Scene s sits at
/// x = s · scene_spacing; its poses walk along a seeded heading. Every profile
/// observes each pose. Timestamps: 100 s per scene, 10 s per pose.
inline GenResult cmd_gen(std::uint64_t seed, const GenOptions& opts, const fs::path& out_dir) {
  opts.validate();
  GenResult result;
  Manifest& m = result.manifest;
  m.base_dir = out_dir;
  KeyValues cfg = opts.to_key_values();
  m.header = run_header(seed, cfg);
  if (opts.scene_count == 0 || opts.poses_per_scene == 0) {
    result.warnings.push_back("gen: no scenes or poses requested; manifest is empty");
  }
  for (std::size_t s = 0; s < opts.scene_count; ++s) {
    const std::uint64_t scene_seed = mix_seed(seed, s);
    Rng rng(mix_seed(scene_seed, 0x9e11));
    const double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double yaw0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t p = 0; p < opts.poses_per_scene; ++p) {
      const double step = opts.pose_step * static_cast<double>(p);
      const double lx = step * std::cos(heading);
      const double ly = step * std::sin(heading);
      const double yaw = yaw0 + rng.uniform(-0.3, 0.3) * (p > 0 ? 1.0 : 0.0);
      const Pose local = Pose::from_yaw(yaw, lx, ly, opts.sensor_height);
      const Pose world =
          Pose::from_yaw(yaw, lx + opts.scene_spacing * static_cast<double>(s), ly,
                         opts.sensor_height);
      for (const auto& name : opts.profiles) {
        const SensorProfile profile = profile_by_name(name);
        PointCloud cloud = generate_synthetic_scene_scan(scene_seed, local, profile);
        ManifestEntry e;
        e.scan_id = scan_name(s, p, name);
        e.path = "scans/" + e.scan_id + ".hlks";
        e.sensor_tag = profile.tag;
        e.timestamp = 100.0 * static_cast<double>(s) + 10.0 * static_cast<double>(p);
        e.pose = world;
        cloud.scan_id = e.scan_id;
        cloud.timestamp = e.timestamp;
        write_scan(out_dir / e.path, cloud);
        m.entries.push_back(std::move(e));
      }
    }
  }
  write_manifest(out_dir / "manifest.txt", m);
  return result;
}

// ---------------------------------------------------------------------------
// overlap / mine
// ---------------------------------------------------------------------------

inline OverlapMatrix cmd_overlap(std::uint64_t seed, const fs::path& manifest_path,
                                 const OverlapConfig& cfg, std::size_t threads,
                                 const fs::path& out_path) {
  require_input(manifest_path, "gen");
  const Manifest manifest = read_manifest(manifest_path);
  OverlapMatrix matrix = build_overlap_matrix(manifest, cfg, threads);
  KeyValues kv;
  kv.set("manifest", manifest_path.filename().string());
  matrix.header = run_header(seed, kv);
  write_overlap_matrix(out_path, matrix);
  return matrix;
}

struct MineConfig {
  TupleCounts counts;
  bool mix_sensors = true;

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("mine.positives", counts.positives);
    kv.set("mine.semi_positives", counts.semi_positives);
    kv.set("mine.negatives", counts.negatives);
    kv.set("mine.mix_sensors", mix_sensors);
    return kv;
  }

  static MineConfig from_key_values(const KeyValues& kv) {
    MineConfig c;
    c.counts.positives = kv.get("mine.positives", c.counts.positives);
    c.counts.semi_positives = kv.get("mine.semi_positives", c.counts.semi_positives);
    c.counts.negatives = kv.get("mine.negatives", c.counts.negatives);
    c.mix_sensors = kv.get("mine.mix_sensors", c.mix_sensors);
    return c;
  }
};

/// Sensor tags come from the manifest when given (needed for mix_sensors=false).
inline std::vector<TrainingTuple> cmd_mine(std::uint64_t seed, const fs::path& matrix_path,
                                           const std::optional<fs::path>& manifest_path,
                                           const MineConfig& cfg, const fs::path& out_path) {
  require_input(matrix_path, "overlap");
  const OverlapMatrix matrix = read_overlap_matrix(matrix_path);
  MiningOptions options;
  options.counts = cfg.counts;
  options.mix_sensors = cfg.mix_sensors;
  if (manifest_path) {
    require_input(*manifest_path, "gen");
    for (const auto& e : read_manifest(*manifest_path).entries) {
      options.sensor_tags[e.scan_id] = e.sensor_tag;
    }
  }
  const auto tuples = mine_tuples(matrix, options, mix_seed(seed, 0x313e));
  io::write_file(out_path, format_tuples(tuples, run_header(seed, cfg.to_key_values())));
  return tuples;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainRun {
  EncoderConfig encoder;
  LossConfig loss;
  TrainConfig train;
  PreprocessConfig preprocess;

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv = encoder.to_key_values();
    kv.merge(loss.to_key_values());
    kv.merge(train.to_key_values());
    kv.merge(preprocess.to_key_values());
    return kv;
  }

  static TrainRun from_key_values(const KeyValues& kv) {
    return {EncoderConfig::from_key_values(kv), LossConfig::from_key_values(kv),
            TrainConfig::from_key_values(kv), PreprocessConfig::from_key_values(kv)};
  }
};

/// Trains from a seeded initialization and writes the checkpoint plus a
/// per-step loss log next to it (<checkpoint>.log).
inline TrainResult cmd_train(std::uint64_t seed, const fs::path& manifest_path,
                             const fs::path& tuples_path, TrainRun run,
                             const fs::path& checkpoint_path, const TrainCallback& on_step = {}) {
  require_input(manifest_path, "gen");
  require_input(tuples_path, "mine");
  run.train.seed = seed;
  const Manifest manifest = read_manifest(manifest_path);
  const auto tuples = parse_tuples(io::read_file(tuples_path));
  const auto clouds = prepare_clouds(manifest, run.preprocess, seed);
  ParameterSet init = init_parameters(run.encoder, mix_seed(seed, 0x1417));
  TrainResult result = train(std::move(init), tuples, clouds, run.encoder, run.loss, run.train,
                             on_step);

  Checkpoint ck;
  ck.config = run.encoder;
  ck.params = result.params;
  ck.extra = run.to_key_values();
  ck.extra.set("seed", std::to_string(seed));
  write_checkpoint(checkpoint_path, ck);
  fs::path log_path = checkpoint_path;
  log_path += ".log";
  io::write_file(log_path,
                 format_train_log(result.log, header_text(run_header(seed, ck.extra))));
  return result;
}

// ---------------------------------------------------------------------------
// eval / plot
// ---------------------------------------------------------------------------

/// Encodes every manifest scan with the checkpoint and evaluates them as
/// queries. The database is the same descriptor set unless a descriptor
/// store is given. Writes the report and the query descriptors
/// (<report>.hlkd).
inline EvalReport cmd_eval(const fs::path& checkpoint_path, const fs::path& manifest_path,
                           const fs::path& matrix_path, const EvalConfig& cfg,
                           const fs::path& report_path,
                           const std::optional<fs::path>& database_path = std::nullopt,
                           unsigned threads = 1) {
  require_input(checkpoint_path, "train");
  require_input(manifest_path, "gen");
  require_input(matrix_path, "overlap");
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const Manifest manifest = read_manifest(manifest_path);
  const OverlapMatrix matrix = read_overlap_matrix(matrix_path);
  const std::uint64_t seed = std::stoull(ck.extra.get("seed", std::string("0")));
  const PreprocessConfig pre = PreprocessConfig::from_key_values(ck.extra);
  const auto clouds = prepare_clouds(manifest, pre, seed);

  std::vector<Descriptor> queries;
  queries.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) {
    queries.push_back(encode_descriptor(ck.params, clouds.at(e.scan_id), ck.config));
  }
  std::vector<Descriptor> database = queries;
  if (database_path) {
    require_input(*database_path, "eval");
    database = read_descriptor_store(*database_path);
    const std::size_t qdim = ck.config.descriptor_dim();
    for (auto& d : database) {
      if (d.values.size() != qdim) {
        throw ShapeError("database descriptor dimension " + std::to_string(d.values.size()) +
                         " does not match query descriptor dimension " + std::to_string(qdim));
      }
    }
    std::map<std::string, double> stamps;
    for (const auto& e : manifest.entries) stamps[e.scan_id] = e.timestamp;
    for (auto& d : database) {
      if (auto it = stamps.find(d.scan_id); it != stamps.end()) d.timestamp = it->second;
    }
  }
  EvalReport report = evaluate(queries, database, matrix, cfg, threads);

  KeyValues kv = ck.extra;
  kv.merge(cfg.to_key_values());
  io::write_file(report_path, format_eval_report(report, header_text(run_header(seed, kv))));
  fs::path store_path = report_path;
  store_path += ".hlkd";
  write_descriptor_store(store_path, queries);
  return report;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

/// Two panels: AR@k against k and precision against recall.
inline std::string render_report_svg(const ParsedEvalReport& r, const std::string& title) {
  constexpr double W = 320, H = 240, pad = 40;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * W << "\" height=\"" << H + 30
      << "\">\n";
  out << "<text x=\"10\" y=\"18\" font-size=\"13\">" << svg_escape(title) << "</text>\n";
  const auto panel = [&](double x0, const std::string& label, const std::vector<double>& xs,
                         const std::vector<double>& ys, double xmax) {
    const double ox = x0 + pad, oy = 30 + H - pad, pw = W - 2 * pad, ph = H - 2 * pad;
    out << "<rect x=\"" << ox << "\" y=\"" << oy - ph << "\" width=\"" << pw << "\" height=\""
        << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << ox << "\" y=\"" << oy + 18 << "\" font-size=\"11\">" << label
        << "</text>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double px = ox + (xmax > 0 ? xs[i] / xmax : 0.0) * pw;
      const double py = oy - ys[i] * ph;
      out << px << ',' << py << ' ';
    }
    out << "\"/>\n";
  };
  std::vector<double> ks, ars;
  for (std::size_t k = 0; k < r.recall_at_k.size(); ++k) {
    ks.push_back(static_cast<double>(k + 1));
    ars.push_back(r.recall_at_k[k]);
  }
  panel(0, "AR@k vs k", ks, ars, static_cast<double>(r.recall_at_k.size()));
  std::vector<double> rec, prec;
  for (const auto& p : r.pr_curve) {
    rec.push_back(p.recall);
    prec.push_back(p.precision);
  }
  panel(W, "precision vs recall", rec, prec, 1.0);
  out << "</svg>\n";
  return out.str();
}

/// Writes <out_prefix>.svg and <out_prefix>.txt (k, AR@k table).
inline void cmd_plot(const fs::path& report_path, const fs::path& out_prefix) {
  require_input(report_path, "eval");
  const std::string text = io::read_file(report_path);
  const ParsedEvalReport r = parse_eval_report(text);
  std::string header;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line) && !line.empty() && line[0] == '#';) {
    header += line + "\n";
  }
  fs::path svg = out_prefix;
  svg += ".svg";
  fs::path table = out_prefix;
  table += ".txt";
  io::write_file(svg, "<!--\n" + header + "-->\n" +
                          render_report_svg(r, report_path.filename().string()));
  std::ostringstream t;
  t << header << "k AR@k\n";
  char buf[64];
  for (std::size_t k = 0; k < r.recall_at_k.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%zu %.6f\n", k + 1, r.recall_at_k[k]);
    t << buf;
  }
  io::write_file(table, t.str());
}

}  // namespace helios
