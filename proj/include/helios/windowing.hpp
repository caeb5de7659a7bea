#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "helios/error.hpp"
#include "helios/geometry.hpp"

namespace helios {

/// Spherical (r, θ, φ) and cubic window sizes. θ is the polar angle from +z
/// in [0°, 180°], φ the azimuth in [0°, 360°).
struct WindowSpec {
  double radial_size = 10.0;  // meters at level 0
  double theta_size = 1.8;    // degrees
  double phi_size = 1.8;      // degrees
  double cubic_size = 0.2;
  double expansion = 1.5;     // radial growth per level

  void validate() const {
    if (!(radial_size > 0 && theta_size > 0 && phi_size > 0 && cubic_size > 0)) {
      throw InvalidParameter("window sizes must be > 0");
    }
    if (!(expansion > 0)) throw InvalidParameter("window expansion must be > 0");
    const double bins = 360.0 / phi_size;
    if (std::abs(bins - std::round(bins)) > 1e-9) {
      throw InvalidParameter("phi_size must divide 360");
    }
  }

  [[nodiscard]] std::int64_t theta_bins() const {
    return static_cast<std::int64_t>(std::ceil(180.0 / theta_size - 1e-9));
  }
  [[nodiscard]] std::int64_t phi_bins() const {
    return static_cast<std::int64_t>(std::llround(360.0 / phi_size));
  }

  /// Radial bin width at `level`: radial_size · expansion^level.
  [[nodiscard]] double radial_width(int level) const {
    double w = radial_size;
    for (int i = 0; i < level; ++i) w *= expansion;
    return w;
  }
};

enum class WindowKind : std::uint8_t { Spherical, Cubic };

struct WindowIndex {
  WindowKind kind = WindowKind::Spherical;
  int level = 0;
  std::array<std::int64_t, 3> bins{0, 0, 0};

  friend auto operator<=>(const WindowIndex&, const WindowIndex&) = default;
};

inline WindowIndex spherical_index(const Point3& p, const WindowSpec& spec, int level) {
  WindowIndex w{WindowKind::Spherical, level, {0, 0, 0}};
  const double r = p.norm();
  if (r == 0.0) return w;
  constexpr double to_deg = 180.0 / std::numbers::pi;
  const double theta = std::acos(std::clamp(p.z / r, -1.0, 1.0)) * to_deg;
  double phi = std::atan2(p.y, p.x) * to_deg;
  if (phi < 0.0) phi += 360.0;
  if (phi >= 360.0) phi -= 360.0;

  w.bins[0] = static_cast<std::int64_t>(std::floor(r / spec.radial_width(level)));
  // South pole folds into the last θ bin.
  w.bins[1] = std::min(static_cast<std::int64_t>(std::floor(theta / spec.theta_size)),
                       spec.theta_bins() - 1);
  w.bins[2] = std::min(static_cast<std::int64_t>(std::floor(phi / spec.phi_size)),
                       spec.phi_bins() - 1);
  return w;
}

/// Level-independent cubic bins.
inline WindowIndex cubic_index(const Point3& p, const WindowSpec& spec, int level) {
  return {WindowKind::Cubic,
          level,
          {static_cast<std::int64_t>(std::floor(p.x / spec.cubic_size)),
           static_cast<std::int64_t>(std::floor(p.y / spec.cubic_size)),
           static_cast<std::int64_t>(std::floor(p.z / spec.cubic_size))}};
}

inline WindowIndex window_index(const Point3& p, const WindowSpec& spec, int level,
                                WindowKind kind) {
  return kind == WindowKind::Spherical ? spherical_index(p, spec, level)
                                       : cubic_index(p, spec, level);
}

using WindowGroups = std::map<WindowIndex, std::vector<std::size_t>>;

/// Groups point ordinals by window; ordinals within a group stay ascending.
inline WindowGroups partition(const std::vector<Point3>& points, const WindowSpec& spec, int level,
                              WindowKind kind) {
  spec.validate();
  WindowGroups groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    groups[window_index(points[i], spec, level, kind)].push_back(i);
  }
  return groups;
}

/// Per-point group label (dense, in group-key order) for a partition.
inline std::vector<std::size_t> group_labels(const WindowGroups& groups, std::size_t n) {
  std::vector<std::size_t> labels(n, 0);
  std::size_t g = 0;
  for (const auto& [key, members] : groups) {
    for (std::size_t i : members) labels[i] = g;
    ++g;
  }
  return labels;
}

}  // namespace helios
