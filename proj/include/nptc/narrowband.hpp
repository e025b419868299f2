#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "nptc/neighbor_index.hpp"
#include "nptc/point_cloud.hpp"

namespace nptc {

using VoxelIndex = std::array<int, 3>;

// Regular M^3 lattice over the unit cube; cell (i,j,k) has center
// ((i + 0.5) h, (j + 0.5) h, (k + 0.5) h) with h = 1 / M.
struct VoxelGrid {
  int resolution = 100;

  double spacing() const { return 1.0 / resolution; }
  Vec3 center(const VoxelIndex& v) const;
  bool contains(const VoxelIndex& v) const;
  std::uint32_t linear(const VoxelIndex& v) const;
  VoxelIndex unlinear(std::uint32_t id) const;
  std::size_t cell_count() const;
};

/// floor(x * M) per axis, clamped to [0, M - 1].
VoxelIndex containing_voxel(const VoxelGrid& grid, const Vec3& x);

struct NarrowBand {
  VoxelGrid grid;
  double epsilon = 0.0;
  // Active voxels as ascending linear ids, with per-voxel data in the same
  // order.
  std::vector<std::uint32_t> active;
  std::vector<double> dist_to_cloud;
  std::vector<std::uint8_t> contains_point;
  // Dense M^3 map from linear id to position in `active`, -1 if inactive.
  std::vector<std::int32_t> slot;

  std::size_t size() const { return active.size(); }
  std::int32_t find(const VoxelIndex& v) const;
  bool is_active(const VoxelIndex& v) const { return find(v) >= 0; }

  void rebuild_slots();
};

/// Active set = voxels whose center lies within `epsilon` of the nearest
/// cloud point, plus every voxel containing a point. Candidates are the
/// Chebyshev ball of ceil(epsilon / h) + 1 rings around point-containing
/// voxels; each candidate's distance comes from an exact nearest query.
/// Throws ArgumentError when epsilon < h / 2 or a point lies outside the
/// unit cube (including NaN coordinates).
NarrowBand voxelize_narrowband(const PointCloud& cloud,
                               const NeighborIndex& index, int resolution,
                               double epsilon);

NarrowBand voxelize_narrowband(const PointCloud& cloud, int resolution,
                               double epsilon);

}  // namespace nptc
