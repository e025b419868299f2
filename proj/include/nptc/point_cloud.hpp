#pragma once

#include <Eigen/Core>
#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nptc {

using Vec3 = Eigen::Vector3d;

// Maps normalized coordinates back to the raw input frame:
// raw = scale * normalized + offset.
struct SourceTransform {
  double scale = 1.0;
  Vec3 offset = Vec3::Zero();

  Vec3 to_source(const Vec3& x) const { return scale * x + offset; }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::optional<std::vector<Vec3>> normals;
  SourceTransform source_transform;

  std::size_t size() const { return points.size(); }
  bool has_normals() const { return normals.has_value(); }
};

enum class CloudFormat { XyzText, PlyAscii };

/// Reads a cloud without normalizing it. Three numeric columns give
/// positions only; six columns add per-point normals (renormalized to unit
/// length). In xyz-text, blank lines and lines starting with '#' are skipped.
PointCloud load_cloud(const std::filesystem::path& path, CloudFormat format);

/// Picks the format from the extension: ".ply" is PLY, everything else xyz.
PointCloud load_cloud(const std::filesystem::path& path);

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path);

/// Isotropic scale + translation fitting the bounding box centered inside
/// [margin, 1 - margin]^3 with the longest axis spanning 1 - 2 * margin.
/// A cloud of identical points maps to the cube center with scale 1.
PointCloud normalize_to_unit_cube(const PointCloud& cloud,
                                  double margin = 0.05);

// Linear blue -> white -> red ramp over t in [0, 1].
std::array<unsigned char, 3> colormap(double t);

/// Writes an ascii PLY with per-vertex colors mapped from `scalars` over
/// their [min, max] range (a constant field maps to the ramp midpoint).
/// `extra` adds named float vertex properties after the colors.
struct PlyProperty {
  std::string name;
  std::vector<double> values;
};
void export_ply_with_scalars(const PointCloud& cloud,
                             std::span<const double> scalars,
                             const std::filesystem::path& path,
                             std::span<const PlyProperty> extra = {});

}  // namespace nptc
