#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "helios/error.hpp"
#include "helios/geometry.hpp"
#include "helios/scan_io.hpp"

namespace helios {

struct OverlapConfig {
  double voxel_size = 4.0;             // δ, meters
  double nn_threshold = 6.0;           // τ = 1.5 δ
  double truncation_distance = 200.0;  // 2 × max scan range

  void validate() const {
    if (!(voxel_size > 0.0)) throw InvalidParameter("overlap voxel_size must be > 0");
    if (!(nn_threshold > 0.0)) throw InvalidParameter("overlap nn_threshold must be > 0");
    if (!(truncation_distance > 0.0)) {
      throw InvalidParameter("overlap truncation_distance must be > 0");
    }
  }
};

/// Uniform hash grid with cell size τ answering "is there a point closer
/// than τ". Any such neighbour lies in the 3×3×3 block around the query cell.
class NeighborGrid {
 public:
  NeighborGrid(const std::vector<Point3>& points, double radius)
      : points_(&points), radius_(radius), radius_sq_(radius * radius) {
    cells_.reserve(points.size());
    for (std::uint32_t i = 0; i < points.size(); ++i) {
      cells_[pack(voxel_key(points[i], radius_))].push_back(i);
    }
  }

  /// True when some indexed point q satisfies |p - q| < radius (strict).
  [[nodiscard]] bool has_neighbor_within(const Point3& p) const {
    const VoxelKey k = voxel_key(p, radius_);
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          auto it = cells_.find(pack({k.x + dx, k.y + dy, k.z + dz}));
          if (it == cells_.end()) continue;
          for (std::uint32_t idx : it->second) {
            if (squared_distance(p, (*points_)[idx]) < radius_sq_) return true;
          }
        }
      }
    }
    return false;
  }

 private:
  static std::uint64_t pack(const VoxelKey& k) {
    // 21 bits per axis; cells beyond ±2^20 alias, which only costs extra
    // distance checks, never a wrong verdict.
    const auto m = [](std::int64_t v) { return static_cast<std::uint64_t>(v) & 0x1fffffULL; };
    return (m(k.x) << 42) | (m(k.y) << 21) | m(k.z);
  }

  const std::vector<Point3>* points_;
  double radius_;
  double radius_sq_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

/// Number of points of `query` whose nearest neighbour in the indexed cloud
/// is closer than the grid radius.
inline std::size_t count_overlapping(const std::vector<Point3>& query, const NeighborGrid& grid) {
  std::size_t n = 0;
  for (const auto& p : query) n += grid.has_neighbor_within(p) ? 1 : 0;
  return n;
}

namespace detail {

inline double overlap_ratio(std::size_t hits, std::size_t n1, std::size_t n2) {
  return std::min(1.0, 2.0 * static_cast<double>(hits) / static_cast<double>(n1 + n2));
}

inline void check_not_both_empty(const PointCloud& a, const PointCloud& b) {
  if (a.empty() && b.empty()) {
    throw UndefinedOverlap("overlap undefined: both clouds are empty ('" + a.scan_id + "', '" +
                           b.scan_id + "')");
  }
}

}  // namespace detail

/// 2·|{i : NN(p1_i, p2) < τ}| / (N1 + N2) on δ-voxelized clouds, clamped to 1.
inline double directed_overlap(const PointCloud& p1, const PointCloud& p2,
                               const OverlapConfig& cfg) {
  cfg.validate();
  detail::check_not_both_empty(p1, p2);
  if (p1.empty() || p2.empty()) return 0.0;
  // Downsampling is idempotent, so already-voxelized inputs pass unchanged.
  const PointCloud v1 = voxel_downsample(p1, cfg.voxel_size);
  const PointCloud v2 = voxel_downsample(p2, cfg.voxel_size);
  const NeighborGrid grid(v2.points, cfg.nn_threshold);
  return detail::overlap_ratio(count_overlapping(v1.points, grid), v1.size(), v2.size());
}

/// Overlap of two clouds that are already voxelized at cfg.voxel_size.
inline double symmetric_overlap_voxelized(const PointCloud& v1, const PointCloud& v2,
                                          const OverlapConfig& cfg) {
  detail::check_not_both_empty(v1, v2);
  if (v1.empty() || v2.empty()) return 0.0;
  const NeighborGrid g1(v1.points, cfg.nn_threshold);
  const NeighborGrid g2(v2.points, cfg.nn_threshold);
  const double a = detail::overlap_ratio(count_overlapping(v1.points, g2), v1.size(), v2.size());
  const double b = detail::overlap_ratio(count_overlapping(v2.points, g1), v1.size(), v2.size());
  return std::min(1.0, std::max(a, b));
}

inline double symmetric_overlap(const PointCloud& p1, const PointCloud& p2,
                                const OverlapConfig& cfg) {
  cfg.validate();
  detail::check_not_both_empty(p1, p2);
  return symmetric_overlap_voxelized(voxel_downsample(p1, cfg.voxel_size),
                                     voxel_downsample(p2, cfg.voxel_size), cfg);
}

class OverlapMatrix {
 public:
  OverlapMatrix() = default;

  explicit OverlapMatrix(std::vector<std::string> scan_ids)
      : ids_(std::move(scan_ids)),
        values_(ids_.size() * ids_.size(), 0.0),
        computed_(ids_.size() * ids_.size(), false) {
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (!index_.emplace(ids_[i], i).second) {
        throw ContractError("duplicate scan id '" + ids_[i] + "' in overlap matrix");
      }
      at(i, i) = 1.0;
      computed_[i * ids_.size() + i] = true;
    }
  }

  [[nodiscard]] std::size_t size() const { return ids_.size(); }
  [[nodiscard]] const std::vector<std::string>& scan_ids() const { return ids_; }

  [[nodiscard]] double value(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  [[nodiscard]] bool computed(std::size_t i, std::size_t j) const {
    return computed_[i * size() + j];
  }

  [[nodiscard]] std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ContractError("scan id '" + id + "' not in overlap matrix");
    return it->second;
  }

  [[nodiscard]] bool contains(const std::string& id) const { return index_.count(id) != 0; }

  [[nodiscard]] double value(const std::string& a, const std::string& b) const {
    return value(index_of(a), index_of(b));
  }

  /// Sets both (i, j) and (j, i).
  void set(std::size_t i, std::size_t j, double v, bool computed) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidParameter("overlap value " + std::to_string(v) + " outside [0, 1]");
    }
    at(i, j) = v;
    at(j, i) = v;
    computed_[i * size() + j] = computed;
    computed_[j * size() + i] = computed;
  }

  OverlapConfig config;
  /// Extra `key=value` header lines (seed, provenance) echoed on write.
  std::vector<std::string> header;

 private:
  double& at(std::size_t i, std::size_t j) { return values_[i * size() + j]; }

  std::vector<std::string> ids_;
  std::vector<double> values_;
  std::vector<bool> computed_;
  std::map<std::string, std::size_t> index_;
};

/// A scan in its sensor frame together with its sensor-to-world pose.
struct PlacedScan {
  PointCloud cloud;
  Pose pose;
};

/// All-pairs symmetric overlap in the world frame. Pairs whose sensor origins
/// are farther apart than the truncation distance are reported as 0 and
/// flagged not-computed. Rows are split across `threads` workers; every cell
/// is written by exactly one worker so the result is order-independent.
inline OverlapMatrix build_overlap_matrix(const std::vector<PlacedScan>& scans,
                                          const OverlapConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  std::vector<std::string> ids;
  ids.reserve(scans.size());
  for (const auto& s : scans) ids.push_back(s.cloud.scan_id);
  OverlapMatrix matrix(ids);
  matrix.config = cfg;

  const std::size_t n = scans.size();
  std::vector<PointCloud> voxelized(n);
  for (std::size_t i = 0; i < n; ++i) {
    voxelized[i] = voxel_downsample(transform_cloud(scans[i].cloud, scans[i].pose), cfg.voxel_size);
  }

  std::vector<double> upper(n * n, 0.0);
  std::vector<char> upper_mask(n * n, 0);
  const auto work = [&](std::size_t worker, std::size_t stride) {
    for (std::size_t i = worker; i < n; i += stride) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dist = std::sqrt(squared_distance(scans[i].pose.origin(), scans[j].pose.origin()));
        if (dist > cfg.truncation_distance) continue;
        if (voxelized[i].empty() && voxelized[j].empty()) continue;
        upper[i * n + j] = symmetric_overlap_voxelized(voxelized[i], voxelized[j], cfg);
        upper_mask[i * n + j] = 1;
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      matrix.set(i, j, upper[i * n + j], upper_mask[i * n + j] != 0);
    }
  }
  return matrix;
}

inline OverlapMatrix build_overlap_matrix(const Manifest& manifest, const OverlapConfig& cfg,
                                          std::size_t threads = 1) {
  std::vector<PlacedScan> scans;
  scans.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) scans.push_back({manifest.load(e), e.pose});
  return build_overlap_matrix(scans, cfg, threads);
}

// ---------------------------------------------------------------------------
// Text serialization
// ---------------------------------------------------------------------------

inline std::string format_overlap_matrix(const OverlapMatrix& m) {
  std::ostringstream out;
  out << "# helios overlap matrix\n";
  out << "# voxel_size=" << io::format_double(m.config.voxel_size) << '\n';
  out << "# nn_threshold=" << io::format_double(m.config.nn_threshold) << '\n';
  out << "# truncation_distance=" << io::format_double(m.config.truncation_distance) << '\n';
  for (const auto& h : m.header) out << "# " << h << '\n';
  out << "# scans";
  for (const auto& id : m.scan_ids()) out << ' ' << id;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (std::size_t j = i + 1; j < m.size(); ++j) {
      if (!m.computed(i, j)) continue;
      std::snprintf(buf, sizeof buf, "%.6f", m.value(i, j));
      out << m.scan_ids()[i] << ' ' << m.scan_ids()[j] << ' ' << buf << '\n';
    }
  }
  return out.str();
}

inline OverlapMatrix parse_overlap_matrix(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  OverlapConfig cfg;
  std::vector<std::string> header;
  std::vector<std::string> ids;
  bool have_ids = false;
  std::vector<std::tuple<std::string, std::string, double>> pairs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = line.size() > 2 ? line.substr(2) : std::string{};
      if (body.rfind("scans", 0) == 0) {
        std::istringstream ls(body.substr(5));
        std::string id;
        while (ls >> id) ids.push_back(id);
        have_ids = true;
      } else if (auto eq = body.find('='); eq != std::string::npos) {
        const std::string key = body.substr(0, eq);
        const std::string val = body.substr(eq + 1);
        if (key == "voxel_size") {
          cfg.voxel_size = std::stod(val);
        } else if (key == "nn_threshold") {
          cfg.nn_threshold = std::stod(val);
        } else if (key == "truncation_distance") {
          cfg.truncation_distance = std::stod(val);
        } else {
          header.push_back(body);
        }
      }
      continue;
    }
    std::istringstream ls(line);
    std::string a, b;
    double v = 0.0;
    if (!(ls >> a >> b >> v)) throw IoError("overlap matrix: malformed line '" + line + "'");
    pairs.emplace_back(a, b, v);
  }
  if (!have_ids) throw IoError("overlap matrix: missing '# scans' header");
  OverlapMatrix m(ids);
  m.config = cfg;
  m.header = std::move(header);
  for (const auto& [a, b, v] : pairs) m.set(m.index_of(a), m.index_of(b), v, true);
  return m;
}

inline void write_overlap_matrix(const std::filesystem::path& path, const OverlapMatrix& m) {
  io::write_file(path, format_overlap_matrix(m));
}

inline OverlapMatrix read_overlap_matrix(const std::filesystem::path& path) {
  return parse_overlap_matrix(io::read_file(path));
}

}  // namespace helios
