#include "nptc/synthetic.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "nptc/error.hpp"

namespace nptc {

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Quaterniond q(g(rng), g(rng), g(rng), g(rng));
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

std::string to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::Sphere: return "sphere";
    case ShapeFamily::Torus: return "torus";
    case ShapeFamily::CubeSurface: return "cube-surface";
    case ShapeFamily::Plane: return "plane";
  }
  return "unknown";
}

ShapeFamily parse_shape_family(const std::string& name) {
  if (name == "sphere") return ShapeFamily::Sphere;
  if (name == "torus") return ShapeFamily::Torus;
  if (name == "cube-surface" || name == "cube") return ShapeFamily::CubeSurface;
  if (name == "plane") return ShapeFamily::Plane;
  throw ConfigError("unknown shape family '" + name + "'");
}

ShapeSample sample_shape_raw(ShapeFamily family, std::size_t n,
                             const ShapeParams& params, std::mt19937_64& rng) {
  if (n < 16) throw ArgumentError("need at least 16 points per shape");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ShapeSample out;
  out.cloud.normals.emplace();
  auto& pts = out.cloud.points;
  auto& nrm = *out.cloud.normals;
  pts.reserve(n);
  nrm.reserve(n);
  out.parts.reserve(n);

  switch (family) {
    case ShapeFamily::Sphere: {
      if (!(params.radius > 0.0)) throw ArgumentError("sphere radius must be > 0");
      while (pts.size() < n) {
        const Vec3 d(gauss(rng), gauss(rng), gauss(rng));
        const double len = d.norm();
        if (len < 1e-12) continue;
        const Vec3 u = d / len;
        pts.push_back(params.radius * u);
        nrm.push_back(u);
        out.parts.push_back(u.z() >= 0.0 ? 0 : 1);
      }
      break;
    }
    case ShapeFamily::Torus: {
      const double big = params.major, small = params.minor;
      if (!(small > 0.0) || !(big > small))
        throw ArgumentError("torus needs R > r > 0");
      // Rejection on the tube angle makes sampling area-uniform.
      while (pts.size() < n) {
        const double u = 2.0 * M_PI * unit(rng);
        const double v = 2.0 * M_PI * unit(rng);
        if (unit(rng) * (big + small) > big + small * std::cos(v)) continue;
        const Vec3 radial(std::cos(u), std::sin(u), 0.0);
        const Vec3 normal = std::cos(v) * radial + std::sin(v) * Vec3::UnitZ();
        pts.push_back(big * radial + small * normal);
        nrm.push_back(normal);
        out.parts.push_back(std::cos(v) >= 0.0 ? 0 : 1);
      }
      break;
    }
    case ShapeFamily::CubeSurface: {
      if (!(params.side > 0.0)) throw ArgumentError("cube side must be > 0");
      std::uniform_int_distribution<int> face(0, 5);
      while (pts.size() < n) {
        const int f = face(rng);
        const int axis = f / 2;
        const double sign = f % 2 ? 1.0 : -1.0;
        Vec3 p(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5);
        p[axis] = 0.5 * sign;
        Vec3 normal = Vec3::Zero();
        normal[axis] = sign;
        pts.push_back(params.side * p);
        nrm.push_back(normal);
        out.parts.push_back(axis == 2 ? 0 : 1);
      }
      break;
    }
    case ShapeFamily::Plane: {
      if (!(params.side > 0.0)) throw ArgumentError("plane side must be > 0");
      while (pts.size() < n) {
        const Vec3 p(unit(rng) - 0.5, unit(rng) - 0.5, 0.0);
        pts.push_back(params.side * p);
        nrm.push_back(Vec3::UnitZ());
        out.parts.push_back(p.x() < 0.0 ? 0 : 1);
      }
      break;
    }
  }
  return out;
}

PointCloud sample_shape(ShapeFamily family, std::size_t n,
                        const ShapeParams& params, std::mt19937_64& rng) {
  return normalize_to_unit_cube(sample_shape_raw(family, n, params, rng).cloud);
}

std::vector<std::size_t> SyntheticDataset::split(bool train) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].train == train) out.push_back(i);
  return out;
}

SyntheticDataset make_dataset(const DatasetSpec& spec) {
  if (spec.families.empty()) throw ConfigError("dataset needs shape families");
  if (!(spec.train_fraction >= 0.0 && spec.train_fraction <= 1.0))
    throw ConfigError("train_fraction must lie in [0, 1]");
  SyntheticDataset ds;
  ds.spec = spec;
  const std::size_t per = spec.clouds_per_class;
  for (std::size_t c = 0; c < spec.families.size(); ++c) {
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t id = c * per + j;
      std::mt19937_64 rng(stream_seed(spec.seed, id));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      ShapeParams params;
      params.radius = 0.5 + 0.5 * unit(rng);
      params.major = 1.0;
      params.minor = 0.25 + 0.2 * unit(rng);
      params.side = 0.5 + 0.5 * unit(rng);
      auto sample =
          sample_shape_raw(spec.families[c], spec.points_per_cloud, params, rng);
      if (spec.random_rotation) {
        const Eigen::Matrix3d rot = random_rotation(rng);
        for (auto& p : sample.cloud.points) p = rot * p;
        for (auto& n : *sample.cloud.normals) n = rot * n;
      }
      DatasetEntry e;
      e.cloud = normalize_to_unit_cube(sample.cloud);
      e.label = static_cast<int>(c);
      e.family = spec.families[c];
      e.parts = std::move(sample.parts);
      ds.entries.push_back(std::move(e));
    }
    std::vector<std::size_t> order(per);
    for (std::size_t j = 0; j < per; ++j) order[j] = c * per + j;
    std::mt19937_64 rng(stream_seed(spec.seed ^ 0x5b1f, c));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    const auto train_count = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(per)));
    for (std::size_t i = 0; i < order.size(); ++i)
      ds.entries[order[i]].train = i < train_count;
  }
  return ds;
}

void write_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["version"] = 1;
  manifest["seed"] = ds.spec.seed;
  manifest["points_per_cloud"] = ds.spec.points_per_cloud;
  manifest["classes"] = nlohmann::json::array();
  for (auto f : ds.spec.families) manifest["classes"].push_back(to_string(f));
  manifest["clouds"] = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "cloud_%04zu", i);
    const auto& e = ds.entries[i];
    save_xyz(e.cloud, dir / (std::string(stem) + ".xyz"));
    {
      std::ofstream parts(dir / (std::string(stem) + ".parts"));
      for (int p : e.parts) parts << p << '\n';
    }
    manifest["clouds"].push_back({{"file", std::string(stem) + ".xyz"},
                                  {"parts", std::string(stem) + ".parts"},
                                  {"label", e.label},
                                  {"family", to_string(e.family)},
                                  {"split", e.train ? "train" : "test"}});
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

Manifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw CacheMiss("missing dataset manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  Manifest m;
  try {
    for (const auto& c : j.at("classes")) m.classes.push_back(c.get<std::string>());
    for (const auto& c : j.at("clouds")) {
      ManifestEntry e;
      e.cloud = dir / c.at("file").get<std::string>();
      if (c.contains("parts")) e.parts = dir / c.at("parts").get<std::string>();
      e.label = c.at("label").get<int>();
      e.train = c.at("split").get<std::string>() == "train";
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return m;
}

std::vector<int> read_parts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CacheMiss("missing part labels " + path.string());
  std::vector<int> parts;
  int p = 0;
  while (in >> p) parts.push_back(p);
  return parts;
}

}  // namespace nptc
