#pragma once

// Toy descriptor network: voxel embedding, windowed multi-head attention
// (half the heads over spherical windows, half over cubic windows), a GeM +
// MLP global branch, and optimal-transport cluster aggregation with a dustbin.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "helios/autodiff.hpp"
#include "helios/config.hpp"
#include "helios/error.hpp"
#include "helios/geometry.hpp"
#include "helios/random.hpp"
#include "helios/scan_io.hpp"
#include "helios/windowing.hpp"

namespace helios {

struct EncoderConfig {
  std::size_t feature_dim = 32;    // d
  std::size_t cluster_count = 16;  // m
  std::size_t cluster_dim = 8;    // l
  std::size_t global_dim = 16;    // e; 0 disables the GeM branch
  std::size_t global_hidden = 32;
  std::size_t attention_heads = 4;
  std::size_t sinkhorn_iterations = 10;
  int levels = 2;
  WindowSpec window_spec;
  /// Network voxel size in normalized [-1, 1] units.
  double network_voxel_size = 0.05;
  /// Spherical windows are evaluated in meters (normalized × metric_scale)
  /// when true, otherwise directly in normalized units.
  bool spherical_windows_metric = true;
  double metric_scale = 100.0;
  /// Scales the Xavier init of the voxel embedding. Raw voxel inputs are
  /// O(0.1), so unit gain leaves the tanh nearly linear and features nearly
  /// identical across voxels.
  double embed_init_gain = 4.0;

  [[nodiscard]] std::size_t descriptor_dim() const {
    return cluster_count * cluster_dim + global_dim;
  }

  void validate() const {
    if (feature_dim == 0 || cluster_count == 0 || cluster_dim == 0) {
      throw InvalidParameter("encoder dimensions d, m, l must be > 0");
    }
    if (attention_heads == 0 || attention_heads % 2 != 0) {
      throw InvalidParameter("attention_heads must be even and > 0");
    }
    if (feature_dim % attention_heads != 0) {
      throw InvalidParameter("feature_dim must be divisible by attention_heads");
    }
    if (sinkhorn_iterations < 1) throw InvalidParameter("sinkhorn_iterations must be >= 1");
    if (levels < 0) throw InvalidParameter("levels must be >= 0");
    if (!(network_voxel_size > 0.0)) throw InvalidParameter("network_voxel_size must be > 0");
    if (!(embed_init_gain > 0.0)) throw InvalidParameter("embed_init_gain must be > 0");
    if (global_dim > 0 && global_hidden == 0) throw InvalidParameter("global_hidden must be > 0");
    window_spec.validate();
  }

  [[nodiscard]] KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("encoder.feature_dim", feature_dim);
    kv.set("encoder.cluster_count", cluster_count);
    kv.set("encoder.cluster_dim", cluster_dim);
    kv.set("encoder.global_dim", global_dim);
    kv.set("encoder.global_hidden", global_hidden);
    kv.set("encoder.attention_heads", attention_heads);
    kv.set("encoder.sinkhorn_iterations", sinkhorn_iterations);
    kv.set("encoder.levels", levels);
    kv.set("encoder.network_voxel_size", network_voxel_size);
    kv.set("encoder.spherical_windows_metric", spherical_windows_metric);
    kv.set("encoder.metric_scale", metric_scale);
    kv.set("encoder.embed_init_gain", embed_init_gain);
    kv.set("window.radial_size", window_spec.radial_size);
    kv.set("window.theta_size", window_spec.theta_size);
    kv.set("window.phi_size", window_spec.phi_size);
    kv.set("window.cubic_size", window_spec.cubic_size);
    kv.set("window.expansion", window_spec.expansion);
    return kv;
  }

  static EncoderConfig from_key_values(const KeyValues& kv) { return from_key_values(kv, EncoderConfig{}); }

  static EncoderConfig from_key_values(const KeyValues& kv, EncoderConfig c) {
    c.feature_dim = kv.get("encoder.feature_dim", c.feature_dim);
    c.cluster_count = kv.get("encoder.cluster_count", c.cluster_count);
    c.cluster_dim = kv.get("encoder.cluster_dim", c.cluster_dim);
    c.global_dim = kv.get("encoder.global_dim", c.global_dim);
    c.global_hidden = kv.get("encoder.global_hidden", c.global_hidden);
    c.attention_heads = kv.get("encoder.attention_heads", c.attention_heads);
    c.sinkhorn_iterations = kv.get("encoder.sinkhorn_iterations", c.sinkhorn_iterations);
    c.levels = kv.get("encoder.levels", c.levels);
    c.network_voxel_size = kv.get("encoder.network_voxel_size", c.network_voxel_size);
    c.spherical_windows_metric =
        kv.get("encoder.spherical_windows_metric", c.spherical_windows_metric);
    c.metric_scale = kv.get("encoder.metric_scale", c.metric_scale);
    c.embed_init_gain = kv.get("encoder.embed_init_gain", c.embed_init_gain);
    c.window_spec.radial_size = kv.get("window.radial_size", c.window_spec.radial_size);
    c.window_spec.theta_size = kv.get("window.theta_size", c.window_spec.theta_size);
    c.window_spec.phi_size = kv.get("window.phi_size", c.window_spec.phi_size);
    c.window_spec.cubic_size = kv.get("window.cubic_size", c.window_spec.cubic_size);
    c.window_spec.expansion = kv.get("window.expansion", c.window_spec.expansion);
    c.validate();
    return c;
  }
};

/// Named learnable tensors, ordered by name.
using ParameterSet = std::map<std::string, ad::Tensor>;

/// Parameters placed on a tape for one forward pass.
class BoundParameters {
 public:
  BoundParameters(ad::Tape& tape, const ParameterSet& params, bool requires_grad) : tape_(&tape) {
    for (const auto& [name, value] : params) vars_.emplace(name, tape.leaf(value, requires_grad));
  }

  [[nodiscard]] ad::Var operator[](const std::string& name) const {
    auto it = vars_.find(name);
    if (it == vars_.end()) throw ContractError("missing encoder parameter '" + name + "'");
    return it->second;
  }

  [[nodiscard]] ad::Tape& tape() const { return *tape_; }
  [[nodiscard]] const std::map<std::string, ad::Var>& vars() const { return vars_; }

  /// Gradients after tape.backward(), keyed like the parameter set.
  [[nodiscard]] ParameterSet gradients() const {
    ParameterSet g;
    for (const auto& [name, v] : vars_) g.emplace(name, v.grad());
    return g;
  }

 private:
  ad::Tape* tape_;
  std::map<std::string, ad::Var> vars_;
};

inline constexpr std::size_t kVoxelInputDim = 7;

inline std::string attention_prefix(int level) { return "attn" + std::to_string(level) + "."; }

inline ParameterSet init_parameters(const EncoderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParameterSet p;
  const auto xavier = [&](std::size_t in, std::size_t out) {
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    ad::Tensor t({in, out});
    for (auto& v : t.data()) v = rng.uniform(-a, a);
    return t;
  };
  const std::size_t d = cfg.feature_dim;
  p["embed.w"] = xavier(kVoxelInputDim, d);
  for (auto& v : p["embed.w"].data()) v *= cfg.embed_init_gain;
  p["embed.b"] = ad::Tensor({1, d});
  for (int level = 0; level < cfg.levels; ++level) {
    const auto pre = attention_prefix(level);
    p[pre + "wq"] = xavier(d, d);
    p[pre + "wk"] = xavier(d, d);
    p[pre + "wv"] = xavier(d, d);
    p[pre + "wo"] = xavier(d, d);
  }
  p["salad.score.w"] = xavier(d, cfg.cluster_count);
  p["salad.score.b"] = ad::Tensor({1, cfg.cluster_count});
  p["salad.dustbin"] = ad::Tensor::scalar(1.0);
  p["salad.proj.w"] = xavier(d, cfg.cluster_dim);
  p["salad.proj.b"] = ad::Tensor({1, cfg.cluster_dim});
  if (cfg.global_dim > 0) {
    p["gem.p"] = ad::Tensor::scalar(3.0);
    p["global.w1"] = xavier(d, cfg.global_hidden);
    p["global.b1"] = ad::Tensor({1, cfg.global_hidden});
    p["global.w2"] = xavier(cfg.global_hidden, cfg.global_dim);
    p["global.b2"] = ad::Tensor({1, cfg.global_dim});
  }
  return p;
}

/// x·W + b with b broadcast over rows.
inline ad::Var linear(const ad::Var& x, const ad::Var& w, const ad::Var& b) {
  const ad::Var xw = ad::matmul(x, w);
  return ad::add(xw, ad::expand(b, xw.shape()));
}

// ---------------------------------------------------------------------------
// Voxel embedding
// ---------------------------------------------------------------------------

/// Raw per-voxel inputs: centroid (3), log(1 + count), RMS offset from the
/// centroid per axis (3). Voxels ordered by key.
struct VoxelInputs {
  ad::Tensor features;  // n × kVoxelInputDim
  std::vector<Point3> centers;
};

inline VoxelInputs voxel_inputs(const PointCloud& cloud, double voxel_size) {
  if (cloud.empty()) throw EmptyScan("scan '" + cloud.scan_id + "' has no points to embed");
  if (!(voxel_size > 0.0)) throw InvalidParameter("network voxel size must be > 0");
  struct Acc {
    double sx = 0, sy = 0, sz = 0, qx = 0, qy = 0, qz = 0;
    std::size_t n = 0;
  };
  std::map<VoxelKey, Acc> cells;
  for (const auto& p : cloud.points) {
    auto& a = cells[voxel_key(p, voxel_size)];
    a.sx += p.x;
    a.sy += p.y;
    a.sz += p.z;
    a.qx += p.x * p.x;
    a.qy += p.y * p.y;
    a.qz += p.z * p.z;
    ++a.n;
  }
  VoxelInputs out;
  out.features = ad::Tensor({cells.size(), kVoxelInputDim});
  std::size_t row = 0;
  for (const auto& [key, a] : cells) {
    const double n = static_cast<double>(a.n);
    const Point3 c{a.sx / n, a.sy / n, a.sz / n};
    const auto rms = [n](double q, double m) {
      return std::sqrt(std::max(0.0, q / n - m * m));
    };
    // Offsets are scaled to voxel units so they are O(1).
    const double inv = 1.0 / voxel_size;
    const double f[kVoxelInputDim] = {c.x,
                                      c.y,
                                      c.z,
                                      std::log1p(n),
                                      rms(a.qx, c.x) * inv,
                                      rms(a.qy, c.y) * inv,
                                      rms(a.qz, c.z) * inv};
    for (std::size_t k = 0; k < kVoxelInputDim; ++k) out.features.at(row, k) = f[k];
    out.centers.push_back(c);
    ++row;
  }
  return out;
}

struct LocalFeatures {
  ad::Var features;  // n × d
  std::vector<Point3> centers;
};

inline LocalFeatures embed_voxels(const BoundParameters& params, const PointCloud& cloud,
                                  const EncoderConfig& cfg) {
  VoxelInputs in = voxel_inputs(cloud, cfg.network_voxel_size);
  ad::Var x = params.tape().constant(std::move(in.features));
  return {ad::tanh(linear(x, params["embed.w"], params["embed.b"])), std::move(in.centers)};
}

// ---------------------------------------------------------------------------
// Windowed attention
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::size_t>> window_groups(const std::vector<Point3>& points,
                                                           const WindowSpec& spec, int level,
                                                           WindowKind kind) {
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [key, members] : partition(points, spec, level, kind)) {
    groups.push_back(std::move(members));
  }
  return groups;
}

inline constexpr double kMaskedScore = -1e30;

/// Additive attention mask: 0 inside a window, kMaskedScore across windows.
/// Dense equivalent of the grouped attention; used as a cross-check.
inline ad::Tensor window_mask(const std::vector<Point3>& points, const WindowSpec& spec, int level,
                              WindowKind kind) {
  const std::size_t n = points.size();
  const auto labels = group_labels(partition(points, spec, level, kind), n);
  ad::Tensor mask({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) mask.at(i, j) = labels[i] == labels[j] ? 0.0 : kMaskedScore;
  }
  return mask;
}

struct AttentionWeights {
  ad::Var wq, wk, wv, wo;
};

/// Heads [0, H/2) attend within spherical windows at `level`, heads
/// [H/2, H) within cubic windows. Head outputs are concatenated, projected
/// by wo and added to the input.
inline ad::Var windowed_attention(const ad::Var& x, const std::vector<Point3>& centers,
                                  const AttentionWeights& w, const EncoderConfig& cfg, int level) {
  cfg.validate();
  const std::size_t n = x.shape()[0];
  const std::size_t d = x.shape()[1];
  if (centers.size() != n) throw ShapeError("windowed_attention: centers/features count mismatch");
  const std::size_t heads = cfg.attention_heads;
  const std::size_t dh = d / heads;

  std::vector<Point3> spherical_pts = centers;
  if (cfg.spherical_windows_metric) {
    for (auto& p : spherical_pts) {
      p = {p.x * cfg.metric_scale, p.y * cfg.metric_scale, p.z * cfg.metric_scale};
    }
  }
  const auto sph_groups = window_groups(spherical_pts, cfg.window_spec, level, WindowKind::Spherical);
  const auto cub_groups = window_groups(centers, cfg.window_spec, level, WindowKind::Cubic);

  const ad::Var q = ad::matmul(x, w.wq);
  const ad::Var k = ad::matmul(x, w.wk);
  const ad::Var v = ad::matmul(x, w.wv);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<ad::Var> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const ad::Var qh = ad::slice(q, 1, h * dh, (h + 1) * dh);
    const ad::Var kh = ad::slice(k, 1, h * dh, (h + 1) * dh);
    const ad::Var vh = ad::slice(v, 1, h * dh, (h + 1) * dh);
    outs.push_back(
        ad::grouped_attention(qh, kh, vh, h < heads / 2 ? sph_groups : cub_groups, inv_sqrt));
  }
  return ad::add(x, ad::matmul(ad::concat(outs, 1), w.wo));
}

inline LocalFeatures windowed_attention(const BoundParameters& params, const LocalFeatures& feats,
                                        const EncoderConfig& cfg, int level) {
  const auto pre = attention_prefix(level);
  const AttentionWeights w{params[pre + "wq"], params[pre + "wk"], params[pre + "wv"],
                           params[pre + "wo"]};
  return {windowed_attention(feats.features, feats.centers, w, cfg, level), feats.centers};
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

inline constexpr double kGemFloor = 1e-6;

/// Per-channel generalized mean ((1/n) Σ max(F, floor)^p)^(1/p); p is a
/// scalar Var so it can be learned. Returns 1 × d.
inline ad::Var gem_pool(const ad::Var& features, const ad::Var& p) {
  const ad::Var logs = ad::log(ad::clamp_min(features, kGemFloor));
  const ad::Var powered = ad::exp(ad::mul(p, logs));
  const ad::Var pooled = ad::mean_along_axis(powered, 0);
  return ad::exp(ad::mul(ad::scalar_pow(p, -1.0), ad::log(pooled)));
}

/// GeM followed by a two-layer MLP to e dims. Returns 1 × e.
inline ad::Var global_branch(const BoundParameters& params, const ad::Var& features) {
  const ad::Var g = gem_pool(features, params["gem.p"]);
  const ad::Var h = ad::tanh(linear(g, params["global.w1"], params["global.b1"]));
  return linear(h, params["global.w2"], params["global.b2"]);
}

/// Log-domain Sinkhorn on an n × (m+1) score matrix. Each iteration scales
/// columns to mass n/(m+1), then rows to mass 1, so rows sum to 1 on exit.
inline ad::Var sinkhorn_log(const ad::Var& scores, std::size_t iterations) {
  if (iterations < 1) throw InvalidParameter("sinkhorn iterations must be >= 1");
  const ad::Shape s = scores.shape();
  if (s.size() != 2) throw ShapeError("sinkhorn expects a matrix, got " + ad::shape_str(s));
  const double log_col_mass =
      std::log(static_cast<double>(s[0]) / static_cast<double>(s[1]));
  ad::Var logp = scores;
  for (std::size_t it = 0; it < iterations; ++it) {
    const ad::Var col = ad::add_scalar(ad::logsumexp_along_axis(logp, 0), -log_col_mass);
    logp = ad::sub(logp, ad::expand(col, s));
    const ad::Var row = ad::logsumexp_along_axis(logp, 1);
    logp = ad::sub(logp, ad::expand(row, s));
  }
  return logp;
}

/// Score matrix with the dustbin column appended: n × (m+1).
inline ad::Var augmented_scores(const ad::Var& scores, const ad::Var& dustbin) {
  const std::size_t n = scores.shape()[0];
  return ad::concat({scores, ad::expand(ad::reshape(dustbin, {1, 1}), {n, 1})}, 1);
}

struct SaladWeights {
  ad::Var score_w, score_b, dustbin, proj_w, proj_b;
};

/// V (m × l) with V[k][j] = Σ_i R[i][k] · F̄[i][j], where R is the transport
/// plan over clusters with the dustbin column dropped.
inline ad::Var salad_aggregate(const ad::Var& features, const SaladWeights& w,
                               std::size_t sinkhorn_iterations) {
  const ad::Var scores = linear(features, w.score_w, w.score_b);
  const std::size_t m = scores.shape()[1];
  const ad::Var logp = sinkhorn_log(augmented_scores(scores, w.dustbin), sinkhorn_iterations);
  const ad::Var r = ad::exp(ad::slice(logp, 1, 0, m));
  const ad::Var fbar = linear(features, w.proj_w, w.proj_b);
  return ad::matmul(ad::transpose(r), fbar);
}

inline ad::Var salad_aggregate(const BoundParameters& params, const ad::Var& features,
                               const EncoderConfig& cfg) {
  const SaladWeights w{params["salad.score.w"], params["salad.score.b"], params["salad.dustbin"],
                       params["salad.proj.w"], params["salad.proj.b"]};
  return salad_aggregate(features, w, cfg.sinkhorn_iterations);
}

/// Full forward pass on a preprocessed cloud. Returns the 1 × (m·l + e)
/// unit-norm descriptor.
inline ad::Var encode(const BoundParameters& params, const PointCloud& cloud,
                      const EncoderConfig& cfg) {
  cfg.validate();
  LocalFeatures feats = embed_voxels(params, cloud, cfg);
  for (int level = 0; level < cfg.levels; ++level) {
    feats = windowed_attention(params, feats, cfg, level);
  }
  const ad::Var v = salad_aggregate(params, feats.features, cfg);
  std::vector<ad::Var> parts{ad::reshape(v, {1, cfg.cluster_count * cfg.cluster_dim})};
  if (cfg.global_dim > 0) parts.push_back(global_branch(params, feats.features));
  return ad::l2_normalize(parts.size() == 1 ? parts[0] : ad::concat(parts, 1));
}

struct Descriptor {
  std::string scan_id;
  SensorTag sensor_tag = SensorTag::WideSpinning;
  /// Not serialized in descriptor stores; filled from the manifest.
  double timestamp = 0.0;
  std::vector<double> values;
};

inline Descriptor encode_descriptor(const ParameterSet& params, const PointCloud& cloud,
                                    const EncoderConfig& cfg) {
  ad::Tape tape;
  const BoundParameters bound(tape, params, false);
  const ad::Var g = encode(bound, cloud, cfg);
  return {cloud.scan_id, cloud.sensor_tag, cloud.timestamp, g.value().data()};
}

// ---------------------------------------------------------------------------
// Checkpoints and descriptor stores
// ---------------------------------------------------------------------------

inline constexpr char kWeightsMagic[4] = {'H', 'L', 'K', 'W'};
inline constexpr char kDescriptorMagic[4] = {'H', 'L', 'K', 'D'};
inline constexpr std::uint16_t kWeightsVersion = 1;

struct Checkpoint {
  EncoderConfig config;
  ParameterSet params;
  /// Extra provenance (seed, training config) echoed with the encoder config.
  KeyValues extra;
};

/// HLKW: magic, version u16, config echo (u32 length + key=value text),
/// tensor count u32, then per tensor: name (u32 length + bytes), rank u32,
/// dims u64 × rank, f64 data. Little-endian.
inline std::string encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.bytes(std::string_view(kWeightsMagic, 4));
  w.u16(kWeightsVersion);
  KeyValues echo = ck.extra;
  echo.merge(ck.config.to_key_values());
  w.str(echo.format());
  w.u32(static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& [name, t] : ck.params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f64(v);
  }
  return w.data();
}

inline Checkpoint decode_checkpoint(std::string data, const std::string& what) {
  io::ByteReader r(std::move(data), what);
  if (r.bytes(4) != std::string_view(kWeightsMagic, 4)) throw IoError(what + ": bad weights magic");
  if (r.u16() != kWeightsVersion) throw IoError(what + ": unsupported weights version");
  Checkpoint ck;
  const KeyValues echo = KeyValues::parse(r.str());
  ck.config = EncoderConfig::from_key_values(echo);
  for (const auto& [k, v] : echo.entries()) {
    if (k.rfind("encoder.", 0) != 0 && k.rfind("window.", 0) != 0) ck.extra.set(k, v);
  }
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const auto rank = r.u32();
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(ad::numel(shape));
    for (auto& v : values) v = r.f64();
    ck.params.emplace(std::move(name), ad::Tensor(std::move(shape), std::move(values)));
  }
  if (!r.at_end()) throw IoError(what + ": trailing bytes after weights");
  return ck;
}

inline void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path), path.string());
}

/// HLKD: magic, dim u32, count u32, then per record: scan_id (u32 length +
/// bytes), sensor_tag u8, dim × f32.
inline std::string encode_descriptor_store(const std::vector<Descriptor>& store) {
  io::ByteWriter w;
  w.bytes(std::string_view(kDescriptorMagic, 4));
  const std::size_t dim = store.empty() ? 0 : store.front().values.size();
  w.u32(static_cast<std::uint32_t>(dim));
  w.u32(static_cast<std::uint32_t>(store.size()));
  for (const auto& d : store) {
    if (d.values.size() != dim) {
      throw ShapeError("descriptor store: dimension " + std::to_string(d.values.size()) +
                       " vs store dimension " + std::to_string(dim));
    }
    w.str(d.scan_id);
    w.u8(static_cast<std::uint8_t>(d.sensor_tag));
    for (double v : d.values) w.f32(static_cast<float>(v));
  }
  return w.data();
}

inline std::vector<Descriptor> decode_descriptor_store(std::string data, const std::string& what) {
  io::ByteReader r(std::move(data), what);
  if (r.bytes(4) != std::string_view(kDescriptorMagic, 4)) {
    throw IoError(what + ": bad descriptor magic");
  }
  const auto dim = r.u32();
  const auto count = r.u32();
  std::vector<Descriptor> store(count);
  for (auto& d : store) {
    d.scan_id = r.str();
    d.sensor_tag = sensor_tag_from_u8(r.u8());
    d.values.resize(dim);
    for (auto& v : d.values) v = r.f32();
  }
  if (!r.at_end()) throw IoError(what + ": trailing bytes after descriptors");
  return store;
}

inline void write_descriptor_store(const std::filesystem::path& path,
                                   const std::vector<Descriptor>& store) {
  io::write_file(path, encode_descriptor_store(store));
}

inline std::vector<Descriptor> read_descriptor_store(const std::filesystem::path& path) {
  return decode_descriptor_store(io::read_file(path), path.string());
}

}  // namespace helios
