#include "nptc/point_cloud.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "nptc/error.hpp"

namespace nptc {

namespace {

std::vector<double> parse_numbers(const std::string& line, std::size_t line_no,
                                  const std::filesystem::path& path) {
  std::vector<double> values;
  std::istringstream in(line);
  std::string token;
  while (in >> token) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": not a number '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

void append_record(PointCloud& cloud, const std::vector<double>& values,
                   bool with_normal, std::size_t line_no,
                   const std::filesystem::path& path) {
  cloud.points.emplace_back(values[0], values[1], values[2]);
  if (!with_normal) return;
  Vec3 n(values[3], values[4], values[5]);
  const double len = n.norm();
  if (len == 0.0) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) +
                     ": zero-length normal");
  }
  cloud.normals->push_back(n / len);
}

PointCloud load_xyz(const std::filesystem::path& path, std::istream& in) {
  PointCloud cloud;
  std::string line;
  std::size_t line_no = 0;
  int columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto values = parse_numbers(line, line_no, path);
    const int n = static_cast<int>(values.size());
    if (n != 3 && n != 6) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 3 or 6 columns, got " + std::to_string(n));
    }
    if (columns == 0) {
      columns = n;
      if (n == 6) cloud.normals.emplace();
    } else if (n != columns) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": column count changed from " +
                       std::to_string(columns) + " to " + std::to_string(n));
    }
    append_record(cloud, values, n == 6, line_no, path);
  }
  return cloud;
}

PointCloud load_ply(const std::filesystem::path& path, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };
  auto fail = [&](const std::string& what) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                     what);
  };
  if (!next() || line != "ply") fail("missing 'ply' magic");
  std::size_t vertex_count = 0;
  bool in_vertex = false;
  std::vector<std::string> props;
  bool ascii = false;
  while (true) {
    if (!next()) fail("unterminated header");
    std::istringstream h(line);
    std::string word;
    h >> word;
    if (word == "format") {
      std::string kind;
      h >> kind;
      ascii = kind == "ascii";
    } else if (word == "element") {
      std::string name;
      h >> name >> vertex_count;
      in_vertex = name == "vertex";
      if (!in_vertex && vertex_count > 0 && props.empty())
        fail("only vertex elements are supported");
      if (!in_vertex) vertex_count = 0;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      h >> type >> name;
      if (type == "list") fail("list properties are not supported");
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (!ascii) fail("only ascii PLY is supported");
  auto column = [&](const char* name) -> int {
    auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const std::array<int, 3> xyz{column("x"), column("y"), column("z")};
  const std::array<int, 3> nxyz{column("nx"), column("ny"), column("nz")};
  if (xyz[0] < 0 || xyz[1] < 0 || xyz[2] < 0) fail("missing x/y/z properties");
  const bool with_normal = nxyz[0] >= 0 && nxyz[1] >= 0 && nxyz[2] >= 0;

  PointCloud cloud;
  if (with_normal) cloud.normals.emplace();
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!next()) fail("expected " + std::to_string(vertex_count) + " vertices");
    const auto values = parse_numbers(line, line_no, path);
    if (values.size() != props.size()) fail("vertex property count mismatch");
    std::vector<double> record{values[xyz[0]], values[xyz[1]], values[xyz[2]]};
    if (with_normal)
      for (int c : nxyz) record.push_back(values[c]);
    append_record(cloud, record, with_normal, line_no, path);
  }
  return cloud;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  PointCloud cloud = format == CloudFormat::PlyAscii ? load_ply(path, in)
                                                     : load_xyz(path, in);
  if (cloud.points.empty()) throw EmptyCloud(path.string() + ": no points");
  return cloud;
}

PointCloud load_cloud(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return load_cloud(path, ext == ".ply" ? CloudFormat::PlyAscii
                                        : CloudFormat::XyzText);
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.normals) {
      const Vec3& n = (*cloud.normals)[i];
      out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    out << '\n';
  }
}

PointCloud normalize_to_unit_cube(const PointCloud& cloud, double margin) {
  if (cloud.points.empty()) throw EmptyCloud("cannot normalize an empty cloud");
  if (!(margin >= 0.0 && margin < 0.5))
    throw ArgumentError("margin must lie in [0, 0.5)");
  Vec3 lo = cloud.points.front(), hi = cloud.points.front();
  for (const Vec3& p : cloud.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double extent = (hi - lo).maxCoeff();
  const double scale = extent > 0.0 ? (1.0 - 2.0 * margin) / extent : 1.0;
  const Vec3 center = 0.5 * (lo + hi);
  const Vec3 mid = Vec3::Constant(0.5);

  PointCloud out;
  out.normals = cloud.normals;
  out.points.reserve(cloud.size());
  for (const Vec3& p : cloud.points) out.points.push_back(mid + scale * (p - center));
  // Compose with any previous transform so raw coordinates stay reachable.
  const SourceTransform& prev = cloud.source_transform;
  out.source_transform.scale = prev.scale / scale;
  out.source_transform.offset = prev.to_source(center - mid / scale);
  return out;
}

std::array<unsigned char, 3> colormap(double t) {
  t = std::clamp(t, 0.0, 1.0);
  auto to_byte = [](double v) {
    return static_cast<unsigned char>(std::lround(255.0 * v));
  };
  if (t <= 0.5) {
    const double s = t / 0.5;
    return {to_byte(s), to_byte(s), 255};
  }
  const double s = (1.0 - t) / 0.5;
  return {255, to_byte(s), to_byte(s)};
}

void export_ply_with_scalars(const PointCloud& cloud,
                             std::span<const double> scalars,
                             const std::filesystem::path& path,
                             std::span<const PlyProperty> extra) {
  if (scalars.size() != cloud.size())
    throw ArgumentError("scalar count " + std::to_string(scalars.size()) +
                        " does not match point count " +
                        std::to_string(cloud.size()));
  for (const auto& prop : extra)
    if (prop.values.size() != cloud.size())
      throw ArgumentError("property '" + prop.name + "' has wrong length");
  const auto [lo, hi] = std::minmax_element(scalars.begin(), scalars.end());
  const double min = scalars.empty() ? 0.0 : *lo;
  const double range = scalars.empty() ? 0.0 : *hi - min;

  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  for (const auto& prop : extra) out << "property float " << prop.name << '\n';
  out << "end_header\n";
  out.precision(9);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double t = range > 0.0 ? (scalars[i] - min) / range : 0.5;
    const auto rgb = colormap(t);
    const Vec3& p = cloud.points[i];
    out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << int(rgb[0]) << ' '
        << int(rgb[1]) << ' ' << int(rgb[2]);
    for (const auto& prop : extra) out << ' ' << prop.values[i];
    out << '\n';
  }
}

}  // namespace nptc
