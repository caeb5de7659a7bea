#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "helios/error.hpp"
#include "helios/geometry.hpp"

namespace helios {

namespace io {

/// Little-endian byte writer over a growable buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(std::string_view s) { buf_.append(s); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }
  [[nodiscard]] const std::string& data() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string what) : buf_(std::move(data)), what_(std::move(what)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string str() { return bytes(u32()); }
  [[nodiscard]] bool at_end() const { return pos_ == buf_.size(); }
  [[nodiscard]] std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw IoError(what_ + ": truncated file");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, std::string_view data) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

}  // namespace io

inline constexpr char kScanMagic[4] = {'H', 'L', 'K', 'S'};
inline constexpr std::uint16_t kScanVersion = 1;

/// HLKS scan: magic, version u16, count u32, sensor_tag u8, timestamp f64,
/// then count × (x, y, z) f32. All little-endian.
inline std::string encode_scan(const PointCloud& cloud) {
  io::ByteWriter w;
  w.bytes(std::string_view(kScanMagic, 4));
  w.u16(kScanVersion);
  w.u32(static_cast<std::uint32_t>(cloud.size()));
  w.u8(static_cast<std::uint8_t>(cloud.sensor_tag));
  w.f64(cloud.timestamp);
  for (const auto& p : cloud.points) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
    w.f32(static_cast<float>(p.z));
  }
  return w.data();
}

inline PointCloud decode_scan(std::string data, const std::string& what) {
  io::ByteReader r(std::move(data), what);
  if (r.bytes(4) != std::string_view(kScanMagic, 4)) throw IoError(what + ": bad scan magic");
  const auto version = r.u16();
  if (version != kScanVersion) {
    throw IoError(what + ": unsupported scan version " + std::to_string(version));
  }
  const auto count = r.u32();
  PointCloud cloud;
  cloud.sensor_tag = sensor_tag_from_u8(r.u8());
  cloud.timestamp = r.f64();
  if (r.remaining() != static_cast<std::size_t>(count) * 12) {
    throw IoError(what + ": point payload does not match header count");
  }
  cloud.points.resize(count);
  for (auto& p : cloud.points) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
  }
  return cloud;
}

inline void write_scan(const std::filesystem::path& path, const PointCloud& cloud) {
  io::write_file(path, encode_scan(cloud));
}

inline PointCloud read_scan(const std::filesystem::path& path) {
  return decode_scan(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string scan_id;
  std::string path;  // relative to the manifest's directory unless absolute
  SensorTag sensor_tag = SensorTag::WideSpinning;
  double timestamp = 0.0;
  Pose pose;  // sensor frame -> common world frame
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;
  /// Free-form `# key=value` header lines echoed on write.
  std::vector<std::string> header;

  [[nodiscard]] std::filesystem::path resolve(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    return p.is_absolute() ? p : base_dir / p;
  }

  /// Loads a scan and attaches the manifest's id and metadata.
  [[nodiscard]] PointCloud load(const ManifestEntry& e) const {
    const auto path = resolve(e);
    if (!std::filesystem::exists(path)) {
      throw IoError("scan '" + e.scan_id + "' missing: " + path.string());
    }
    PointCloud c = read_scan(path);
    c.scan_id = e.scan_id;
    c.sensor_tag = e.sensor_tag;
    c.timestamp = e.timestamp;
    return c;
  }
};

/// One record per line:
/// scan_id path sensor_tag timestamp r00 r01 r02 t0 r10 r11 r12 t1 r20 r21 r22 t2
inline std::string format_manifest(const Manifest& m) {
  std::ostringstream out;
  for (const auto& h : m.header) out << "# " << h << '\n';
  out << "# scan_id path sensor_tag timestamp pose(3x4 row-major)\n";
  for (const auto& e : m.entries) {
    out << e.scan_id << ' ' << e.path << ' ' << to_string(e.sensor_tag) << ' '
        << io::format_double(e.timestamp);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << io::format_double(e.pose.rotation[r * 3 + c]);
      out << ' ' << io::format_double(e.pose.translation[r]);
    }
    out << '\n';
  }
  return out.str();
}

inline Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# scan_id ", 0) != 0) {
        m.header.push_back(line.size() > 2 ? line.substr(2) : std::string{});
      }
      continue;
    }
    std::istringstream ls(line);
    ManifestEntry e;
    std::string tag;
    ls >> e.scan_id >> e.path >> tag >> e.timestamp;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) ls >> e.pose.rotation[r * 3 + c];
      ls >> e.pose.translation[r];
    }
    if (!ls) throw IoError("manifest line " + std::to_string(line_no) + ": malformed record");
    e.sensor_tag = sensor_tag_from_string(tag);
    e.pose.validate();
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_file(path), path.parent_path());
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  io::write_file(path, format_manifest(m));
}

}  // namespace helios
