#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "nptc/point_cloud.hpp"

namespace nptc {

enum class ShapeFamily { Sphere, Torus, CubeSurface, Plane };

std::string to_string(ShapeFamily family);
ShapeFamily parse_shape_family(const std::string& name);

struct ShapeParams {
  double radius = 1.0;       // sphere
  double major = 0.3;        // torus R
  double minor = 0.1;        // torus r
  double side = 1.0;         // cube edge, plane edge
};

struct ShapeSample {
  PointCloud cloud;          // raw coordinates, unit outward normals
  std::vector<int> parts;    // two-part labelling per point
};

/// Area-uniform samples on the surface in raw coordinates, centered at the
/// origin. Parts: sphere upper/lower hemisphere, torus outer/inner half by
/// tube angle, cube top/bottom faces vs. sides, plane left/right half.
/// Throws ArgumentError for n < 16 or invalid parameters.
ShapeSample sample_shape_raw(ShapeFamily family, std::size_t n,
                             const ShapeParams& params, std::mt19937_64& rng);

/// sample_shape_raw followed by normalize_to_unit_cube(margin 0.05).
PointCloud sample_shape(ShapeFamily family, std::size_t n,
                        const ShapeParams& params, std::mt19937_64& rng);

struct DatasetSpec {
  std::vector<ShapeFamily> families{ShapeFamily::Sphere, ShapeFamily::Torus,
                                    ShapeFamily::CubeSurface};
  std::size_t clouds_per_class = 100;
  std::size_t points_per_cloud = 512;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  bool random_rotation = true;
};

struct DatasetEntry {
  PointCloud cloud;  // normalized
  int label = 0;
  ShapeFamily family = ShapeFamily::Sphere;
  std::vector<int> parts;
  bool train = true;
};

struct SyntheticDataset {
  DatasetSpec spec;
  std::vector<DatasetEntry> entries;

  std::vector<std::size_t> split(bool train) const;
};

/// Deterministic in (spec, seed): cloud i draws from its own RNG stream.
/// Shape parameters vary per cloud (sphere radius, torus tube ratio, cube
/// size) and each cloud gets a uniformly random orientation when enabled.
/// The split takes the first round(train_fraction * count) clouds of a
/// seeded per-class shuffle.
SyntheticDataset make_dataset(const DatasetSpec& spec);

/// Directory of cloud_NNNN.xyz (6 columns) and cloud_NNNN.parts files plus
/// manifest.json with labels, families and the split.
void write_dataset(const SyntheticDataset& dataset,
                   const std::filesystem::path& dir);

struct ManifestEntry {
  std::filesystem::path cloud;
  std::filesystem::path parts;  // empty when absent
  int label = 0;
  bool train = true;
};

struct Manifest {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& dir);
std::vector<int> read_parts(const std::filesystem::path& path);

}  // namespace nptc
