#include "nptc/narrowband.hpp"

#include <algorithm>
#include <cmath>

#include "nptc/error.hpp"
#include "nptc/parallel.hpp"

namespace nptc {

Vec3 VoxelGrid::center(const VoxelIndex& v) const {
  const double h = spacing();
  return {(v[0] + 0.5) * h, (v[1] + 0.5) * h, (v[2] + 0.5) * h};
}

bool VoxelGrid::contains(const VoxelIndex& v) const {
  return v[0] >= 0 && v[1] >= 0 && v[2] >= 0 && v[0] < resolution &&
         v[1] < resolution && v[2] < resolution;
}

std::uint32_t VoxelGrid::linear(const VoxelIndex& v) const {
  const auto m = static_cast<std::uint32_t>(resolution);
  return (static_cast<std::uint32_t>(v[0]) * m + static_cast<std::uint32_t>(v[1])) * m +
         static_cast<std::uint32_t>(v[2]);
}

VoxelIndex VoxelGrid::unlinear(std::uint32_t id) const {
  const auto m = static_cast<std::uint32_t>(resolution);
  return {static_cast<int>(id / (m * m)), static_cast<int>((id / m) % m),
          static_cast<int>(id % m)};
}

std::size_t VoxelGrid::cell_count() const {
  const auto m = static_cast<std::size_t>(resolution);
  return m * m * m;
}

VoxelIndex containing_voxel(const VoxelGrid& grid, const Vec3& x) {
  VoxelIndex v;
  for (int a = 0; a < 3; ++a) {
    const double cell = std::floor(x[a] * grid.resolution);
    v[a] = static_cast<int>(std::clamp(cell, 0.0, grid.resolution - 1.0));
  }
  return v;
}

std::int32_t NarrowBand::find(const VoxelIndex& v) const {
  if (!grid.contains(v)) return -1;
  return slot[grid.linear(v)];
}

void NarrowBand::rebuild_slots() {
  slot.assign(grid.cell_count(), -1);
  for (std::size_t i = 0; i < active.size(); ++i)
    slot[active[i]] = static_cast<std::int32_t>(i);
}

NarrowBand voxelize_narrowband(const PointCloud& cloud,
                               const NeighborIndex& index, int resolution,
                               double epsilon) {
  if (resolution < 1) throw ArgumentError("resolution must be positive");
  if (cloud.points.empty()) throw EmptyCloud("cannot voxelize an empty cloud");
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    if (!(p.array() >= 0.0 && p.array() <= 1.0).all())
      throw ArgumentError("point " + std::to_string(i) +
                          " lies outside the unit cube; normalize the cloud first");
  }
  NarrowBand band;
  band.grid.resolution = resolution;
  band.epsilon = epsilon;
  const double h = band.grid.spacing();
  if (!(epsilon >= 0.5 * h))
    throw ArgumentError("epsilon " + std::to_string(epsilon) +
                        " is below half a cell (" + std::to_string(0.5 * h) +
                        ")");

  // 0 = untouched, 1 = candidate, 2 = contains a point.
  std::vector<std::uint8_t> mark(band.grid.cell_count(), 0);
  std::vector<std::uint32_t> occupied;
  for (const Vec3& p : cloud.points) {
    const auto id = band.grid.linear(containing_voxel(band.grid, p));
    if (mark[id] != 2) occupied.push_back(id);
    mark[id] = 2;
  }
  const int rings = static_cast<int>(std::ceil(epsilon / h)) + 1;
  std::vector<std::uint32_t> candidates(occupied);
  for (const auto id : occupied) {
    const VoxelIndex c = band.grid.unlinear(id);
    for (int di = -rings; di <= rings; ++di)
      for (int dj = -rings; dj <= rings; ++dj)
        for (int dk = -rings; dk <= rings; ++dk) {
          const VoxelIndex v{c[0] + di, c[1] + dj, c[2] + dk};
          if (!band.grid.contains(v)) continue;
          const auto vid = band.grid.linear(v);
          if (mark[vid] == 0) {
            mark[vid] = 1;
            candidates.push_back(vid);
          }
        }
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<double> dist(candidates.size());
  parallel_for(0, candidates.size(), [&](std::size_t i) {
    const Vec3 c = band.grid.center(band.grid.unlinear(candidates[i]));
    dist[i] = std::sqrt(index.nearest(c).distance_squared);
  });

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool occupied_cell = mark[candidates[i]] == 2;
    if (dist[i] < epsilon || occupied_cell) {
      band.active.push_back(candidates[i]);
      band.dist_to_cloud.push_back(dist[i]);
      band.contains_point.push_back(occupied_cell ? 1 : 0);
    }
  }
  band.rebuild_slots();
  return band;
}

NarrowBand voxelize_narrowband(const PointCloud& cloud, int resolution,
                               double epsilon) {
  const NeighborIndex index(cloud.points);
  return voxelize_narrowband(cloud, index, resolution, epsilon);
}

}  // namespace nptc
