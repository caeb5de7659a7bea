#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "helios/error.hpp"
#include "helios/random.hpp"

namespace helios {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Point3&, const Point3&) = default;

  [[nodiscard]] double norm() const { return std::sqrt(x * x + y * y + z * z); }
  [[nodiscard]] bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

enum class SensorTag : std::uint8_t {
  WideSpinning = 0,
  NarrowSolidState = 1,
  NarrowRosette = 2,
};

inline std::string_view to_string(SensorTag tag) {
  switch (tag) {
    case SensorTag::WideSpinning:
      return "wide-spinning";
    case SensorTag::NarrowSolidState:
      return "narrow-solid-state";
    case SensorTag::NarrowRosette:
      return "narrow-rosette";
  }
  return "unknown";
}

inline SensorTag sensor_tag_from_string(std::string_view s) {
  if (s == "wide-spinning") return SensorTag::WideSpinning;
  if (s == "narrow-solid-state") return SensorTag::NarrowSolidState;
  if (s == "narrow-rosette") return SensorTag::NarrowRosette;
  throw InvalidParameter("unknown sensor tag '" + std::string(s) + "'");
}

inline SensorTag sensor_tag_from_u8(std::uint8_t v) {
  if (v > static_cast<std::uint8_t>(SensorTag::NarrowRosette)) {
    throw InvalidParameter("sensor tag value " + std::to_string(v) + " out of range");
  }
  return static_cast<SensorTag>(v);
}

struct PointCloud {
  std::vector<Point3> points;
  SensorTag sensor_tag = SensorTag::WideSpinning;
  double timestamp = 0.0;
  std::string scan_id;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  [[nodiscard]] bool empty() const { return points.empty(); }
};

/// Rigid transform p' = R p + t. Rotation stored row-major.
struct Pose {
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{0, 0, 0};

  static Pose identity() { return {}; }

  static Pose from_translation(double x, double y, double z) {
    Pose p;
    p.translation = {x, y, z};
    return p;
  }

  /// Rotation about +z by `yaw` radians, then translation.
  static Pose from_yaw(double yaw, double x = 0, double y = 0, double z = 0) {
    const double c = std::cos(yaw);
    const double s = std::sin(yaw);
    Pose p;
    p.rotation = {c, -s, 0, s, c, 0, 0, 0, 1};
    p.translation = {x, y, z};
    return p;
  }

  [[nodiscard]] Point3 apply(const Point3& p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z + translation[0],
            r[3] * p.x + r[4] * p.y + r[5] * p.z + translation[1],
            r[6] * p.x + r[7] * p.y + r[8] * p.z + translation[2]};
  }

  [[nodiscard]] Point3 rotate(const Point3& p) const {
    const auto& r = rotation;
    return {r[0] * p.x + r[1] * p.y + r[2] * p.z, r[3] * p.x + r[4] * p.y + r[5] * p.z,
            r[6] * p.x + r[7] * p.y + r[8] * p.z};
  }

  [[nodiscard]] Point3 origin() const { return {translation[0], translation[1], translation[2]}; }

  /// Throws InvalidPose unless R^T R = I and det R = 1 within 1e-9.
  void validate() const {
    const auto& r = rotation;
    for (double v : r) {
      if (!std::isfinite(v)) throw InvalidPose("pose rotation has non-finite entries");
    }
    for (double v : translation) {
      if (!std::isfinite(v)) throw InvalidPose("pose translation has non-finite entries");
    }
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
        if (std::abs(dot - (i == j ? 1.0 : 0.0)) > 1e-9) {
          throw InvalidPose("pose rotation is not orthonormal");
        }
      }
    }
    const double det = r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
                       r[2] * (r[3] * r[7] - r[4] * r[6]);
    if (std::abs(det - 1.0) > 1e-9) throw InvalidPose("pose rotation determinant is not 1");
  }
};

/// (a ∘ b)(p) = a(b(p)).
inline Pose compose(const Pose& a, const Pose& b) {
  Pose out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a.rotation[i * 3 + k] * b.rotation[k * 3 + j];
      out.rotation[i * 3 + j] = s;
    }
  }
  const Point3 t = a.apply(b.origin());
  out.translation = {t.x, t.y, t.z};
  return out;
}

enum class ScanPattern { Ring, Raster, Rosette };

struct SensorProfile {
  double max_range = 100.0;
  double horizontal_fov = 360.0;  // degrees, centred on +x
  double vertical_fov = 30.0;     // degrees, centred on the horizon
  std::size_t point_budget = 4096;
  ScanPattern pattern = ScanPattern::Ring;
  SensorTag tag = SensorTag::WideSpinning;

  void validate() const {
    if (!(max_range > 0.0)) throw InvalidParameter("sensor max_range must be > 0");
    if (!(horizontal_fov > 0.0 && horizontal_fov <= 360.0)) {
      throw InvalidParameter("sensor horizontal_fov must lie in (0, 360]");
    }
    if (!(vertical_fov > 0.0 && vertical_fov <= 360.0)) {
      throw InvalidParameter("sensor vertical_fov must lie in (0, 360]");
    }
    if (point_budget == 0) throw InvalidParameter("sensor point_budget must be > 0");
  }
};

/// Built-in profiles: a 360° spinning ring scanner, a forward raster
/// solid-state unit and a forward rosette unit.
inline SensorProfile wide_profile() {
  return {100.0, 360.0, 30.0, 4096, ScanPattern::Ring, SensorTag::WideSpinning};
}

inline SensorProfile narrow_profile() {
  return {100.0, 120.0, 25.0, 2048, ScanPattern::Raster, SensorTag::NarrowSolidState};
}

inline SensorProfile rosette_profile() {
  return {100.0, 100.0, 60.0, 2048, ScanPattern::Rosette, SensorTag::NarrowRosette};
}

inline SensorProfile profile_by_name(std::string_view name) {
  if (name == "wide") return wide_profile();
  if (name == "narrow") return narrow_profile();
  if (name == "rosette") return rosette_profile();
  throw InvalidParameter("unknown sensor profile '" + std::string(name) + "'");
}

inline PointCloud transform_cloud(const PointCloud& cloud, const Pose& pose) {
  pose.validate();
  PointCloud out = cloud;
  for (auto& p : out.points) p = pose.apply(p);
  return out;
}

struct VoxelKey {
  std::int64_t x, y, z;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;
};

inline VoxelKey voxel_key(const Point3& p, double size) {
  return {static_cast<std::int64_t>(std::floor(p.x / size)),
          static_cast<std::int64_t>(std::floor(p.y / size)),
          static_cast<std::int64_t>(std::floor(p.z / size))};
}

/// One centroid per occupied voxel (key = floor(coord / size)), ordered by key.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0.0)) throw InvalidParameter("voxel_size must be > 0");
  struct Acc {
    double x = 0, y = 0, z = 0;
    std::size_t n = 0;
  };
  std::map<VoxelKey, Acc> cells;
  for (const auto& p : cloud.points) {
    auto& a = cells[voxel_key(p, voxel_size)];
    a.x += p.x;
    a.y += p.y;
    a.z += p.z;
    ++a.n;
  }
  PointCloud out;
  out.sensor_tag = cloud.sensor_tag;
  out.timestamp = cloud.timestamp;
  out.scan_id = cloud.scan_id;
  out.points.reserve(cells.size());
  for (const auto& [key, a] : cells) {
    const auto n = static_cast<double>(a.n);
    out.points.push_back({a.x / n, a.y / n, a.z / n});
  }
  return out;
}

/// Range crop, fixed-size resampling and scaling into [-1, 1].
inline PointCloud preprocess_scan(const PointCloud& cloud, double max_range,
                                  std::size_t point_budget, std::uint64_t seed) {
  if (!(max_range > 0.0)) throw InvalidParameter("max_range must be > 0");
  if (point_budget == 0) throw InvalidParameter("point_budget must be > 0");

  std::vector<Point3> kept;
  kept.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    if (p.norm() <= max_range) kept.push_back(p);
  }
  if (kept.empty()) throw EmptyScan("scan '" + cloud.scan_id + "' is empty after range crop");

  Rng rng(seed);
  std::vector<std::size_t> chosen;
  if (kept.size() >= point_budget) {
    chosen = rng.sample_without_replacement(kept.size(), point_budget);
    std::sort(chosen.begin(), chosen.end());
  } else {
    chosen.resize(kept.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    while (chosen.size() < point_budget) chosen.push_back(rng.below(kept.size()));
  }

  PointCloud out;
  out.sensor_tag = cloud.sensor_tag;
  out.timestamp = cloud.timestamp;
  out.scan_id = cloud.scan_id;
  out.points.reserve(point_budget);
  for (std::size_t i : chosen) {
    const auto& p = kept[i];
    // Clamp guards the last-ulp case where p/max_range rounds past 1.
    out.points.push_back({std::clamp(p.x / max_range, -1.0, 1.0),
                          std::clamp(p.y / max_range, -1.0, 1.0),
                          std::clamp(p.z / max_range, -1.0, 1.0)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic scenes
// ---------------------------------------------------------------------------

struct Box {
  Point3 lo;
  Point3 hi;
};

/// Procedural scene: ground plane z = 0 plus buildings and clutter poles.
struct Scene {
  std::vector<Box> boxes;
};

inline Scene make_scene(std::uint64_t scene_seed) {
  Rng rng(mix_seed(scene_seed, 0x5ce4e));
  Scene scene;
  const auto add_box = [&](double cx, double cy, double wx, double wy, double h) {
    scene.boxes.push_back({{cx - wx / 2, cy - wy / 2, 0.0}, {cx + wx / 2, cy + wy / 2, h}});
  };
  const std::size_t buildings = 8 + rng.below(8);
  for (std::size_t i = 0; i < buildings; ++i) {
    const double r = rng.uniform(14.0, 75.0);
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    add_box(r * std::cos(a), r * std::sin(a), rng.uniform(4.0, 20.0), rng.uniform(4.0, 20.0),
            rng.uniform(4.0, 25.0));
  }
  const std::size_t poles = 20 + rng.below(25);
  for (std::size_t i = 0; i < poles; ++i) {
    const double r = rng.uniform(5.0, 60.0);
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double w = rng.uniform(0.3, 1.5);
    add_box(r * std::cos(a), r * std::sin(a), w, w, rng.uniform(1.0, 6.0));
  }
  return scene;
}

namespace detail {

inline std::optional<double> ray_box(const Point3& o, const Point3& d, const Box& b) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  const double lo[3] = {b.lo.x, b.lo.y, b.lo.z};
  const double hi[3] = {b.hi.x, b.hi.y, b.hi.z};
  for (int k = 0; k < 3; ++k) {
    if (std::abs(ds[k]) < 1e-15) {
      if (os[k] < lo[k] || os[k] > hi[k]) return std::nullopt;
      continue;
    }
    double ta = (lo[k] - os[k]) / ds[k];
    double tb = (hi[k] - os[k]) / ds[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  // Rays starting inside a box see through it.
  if (t0 > t1 || t0 <= 0.0) return std::nullopt;
  return t0;
}

inline std::uint64_t hash_doubles(std::uint64_t h, std::span<const double> values) {
  for (double v : values) h = mix_seed(h, std::bit_cast<std::uint64_t>(v));
  return h;
}

/// Unit ray directions in the sensor frame for a profile.
inline std::vector<Point3> ray_directions(const SensorProfile& profile) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double hfov = profile.horizontal_fov;
  const double vfov = profile.vertical_fov;
  const std::size_t budget = profile.point_budget;
  std::vector<std::pair<double, double>> az_el;  // degrees
  az_el.reserve(budget);

  switch (profile.pattern) {
    case ScanPattern::Ring: {
      const std::size_t channels = std::min<std::size_t>(32, budget);
      const std::size_t columns = std::max<std::size_t>(1, budget / channels);
      const bool full = hfov >= 360.0;
      for (std::size_t c = 0; c < channels; ++c) {
        const double el = channels == 1 ? 0.0
                                        : -vfov / 2 + vfov * static_cast<double>(c) /
                                                          static_cast<double>(channels - 1);
        for (std::size_t k = 0; k < columns; ++k) {
          const double frac = full ? static_cast<double>(k) / static_cast<double>(columns)
                                   : (columns == 1 ? 0.5
                                                   : static_cast<double>(k) /
                                                         static_cast<double>(columns - 1));
          az_el.emplace_back(full ? frac * 360.0 : -hfov / 2 + hfov * frac, el);
        }
      }
      break;
    }
    case ScanPattern::Raster: {
      auto rows = static_cast<std::size_t>(
          std::max(1.0, std::round(std::sqrt(static_cast<double>(budget) * vfov / hfov))));
      rows = std::min(rows, budget);
      const std::size_t cols = std::max<std::size_t>(1, budget / rows);
      for (std::size_t r = 0; r < rows; ++r) {
        const double fr = (static_cast<double>(r) + 0.5) / static_cast<double>(rows);
        for (std::size_t c = 0; c < cols; ++c) {
          const double fc = (static_cast<double>(c) + 0.5) / static_cast<double>(cols);
          az_el.emplace_back(-hfov / 2 + hfov * fc, -vfov / 2 + vfov * fr);
        }
      }
      break;
    }
    case ScanPattern::Rosette: {
      // Rose curve sin(3t) traced with a slowly precessing frame.
      constexpr double turns = 40.0;
      for (std::size_t i = 0; i < budget; ++i) {
        const double t =
            2.0 * std::numbers::pi * turns * static_cast<double>(i) / static_cast<double>(budget);
        const double rad = std::sin(3.0 * t);
        const double psi = t + 0.0137 * t;
        az_el.emplace_back(hfov / 2 * rad * std::cos(psi), vfov / 2 * rad * std::sin(psi));
      }
      break;
    }
  }

  std::vector<Point3> dirs;
  dirs.reserve(az_el.size());
  for (auto [az, el] : az_el) {
    const double a = az * deg;
    const double e = el * deg;
    dirs.push_back({std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e)});
  }
  return dirs;
}

}  // namespace detail

/// Ray-casts the procedural scene `scene_seed` from `pose` (sensor to scene
/// frame). Points are returned in the sensor frame.
inline PointCloud generate_synthetic_scene_scan(std::uint64_t scene_seed, const Pose& pose,
                                                const SensorProfile& profile) {
  profile.validate();
  pose.validate();
  const Scene scene = make_scene(scene_seed);

  std::array<double, 16> key{};
  std::copy(pose.rotation.begin(), pose.rotation.end(), key.begin());
  std::copy(pose.translation.begin(), pose.translation.end(), key.begin() + 9);
  key[12] = profile.max_range;
  key[13] = profile.horizontal_fov;
  key[14] = profile.vertical_fov;
  key[15] = static_cast<double>(profile.point_budget) + 1e6 * static_cast<int>(profile.pattern);
  Rng noise(detail::hash_doubles(scene_seed, key));

  const Point3 origin = pose.origin();
  PointCloud cloud;
  cloud.sensor_tag = profile.tag;
  for (const auto& dir : detail::ray_directions(profile)) {
    const Point3 d = pose.rotate(dir);
    double best = std::numeric_limits<double>::infinity();
    if (d.z < -1e-12) best = -origin.z / d.z;
    if (best <= 0.0) best = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.boxes) {
      if (auto t = detail::ray_box(origin, d, b); t && *t < best) best = *t;
    }
    const double jitter = 0.02 * noise.normal();
    if (!std::isfinite(best)) continue;
    const double range = best + jitter;
    if (range <= 0.0 || range > profile.max_range) continue;
    cloud.points.push_back({dir.x * range, dir.y * range, dir.z * range});
  }
  return cloud;
}

}  // namespace helios
