#include "nptc/eikonal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "nptc/error.hpp"
#include "nptc/parallel.hpp"

namespace nptc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string voxel_name(const VoxelIndex& v) {
  return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," +
         std::to_string(v[2]) + ")";
}

// Solves sum_a max(0, (u - n_a) / h)^2 = 1 for the smallest admissible u,
// adding upwind neighbors in ascending order while they stay below u.
double upwind_update(std::array<double, 3> n, double h) {
  std::sort(n.begin(), n.end());
  double u = n[0] + h;
  double sum = n[0], sum_sq = n[0] * n[0];
  for (int m = 2; m <= 3; ++m) {
    if (u <= n[m - 1]) break;
    sum += n[m - 1];
    sum_sq += n[m - 1] * n[m - 1];
    // m u^2 - 2 sum u + (sum_sq - h^2) = 0
    const double disc = sum * sum - m * (sum_sq - h * h);
    u = (sum + std::sqrt(std::max(0.0, disc))) / m;
  }
  return u;
}

}  // namespace

SeedSet select_seed(const NarrowBand& band, const PointCloud& cloud,
                    const SeedPolicy& policy) {
  SeedSet seeds;
  seeds.policy = policy;
  if (policy.axis < 0 || policy.axis > 2)
    throw ArgumentError("seed axis must be 0, 1 or 2");

  if (policy.kind == SeedPolicy::Kind::PlaneEdge) {
    int extreme = policy.high_side ? -1 : band.grid.resolution;
    for (const auto id : band.active) {
      const int c = band.grid.unlinear(id)[policy.axis];
      extreme = policy.high_side ? std::max(extreme, c) : std::min(extreme, c);
    }
    for (std::size_t s = 0; s < band.active.size(); ++s)
      if (band.grid.unlinear(band.active[s])[policy.axis] == extreme)
        seeds.voxels.push_back(static_cast<std::int32_t>(s));
    if (seeds.voxels.empty()) throw ArgumentError("band has no active voxels");
    return seeds;
  }

  std::uint32_t chosen = 0;
  if (policy.kind == SeedPolicy::Kind::FixedIndex) {
    if (policy.point_index >= cloud.size())
      throw ArgumentError("seed index " + std::to_string(policy.point_index) +
                          " out of range for " + std::to_string(cloud.size()) +
                          " points");
    chosen = policy.point_index;
  } else {
    for (std::uint32_t i = 1; i < cloud.size(); ++i)
      if (cloud.points[i][policy.axis] < cloud.points[chosen][policy.axis])
        chosen = i;
  }
  const VoxelIndex v = containing_voxel(band.grid, cloud.points[chosen]);
  const auto slot = band.find(v);
  if (slot < 0)
    throw InternalError("seed voxel " + voxel_name(v) + " of point " +
                        std::to_string(chosen) + " is not in the band");
  seeds.voxels.push_back(slot);
  seeds.point_index = chosen;
  return seeds;
}

GridScalarField fast_marching(const NarrowBand& band, const SeedSet& seeds) {
  if (seeds.voxels.empty()) throw ArgumentError("empty seed set");
  const std::size_t n = band.size();
  const double h = band.grid.spacing();
  GridScalarField field;
  field.value.assign(n, kInf);
  field.accepted.assign(n, 0);
  field.acceptance_order.reserve(n);

  using Entry = std::pair<double, std::int32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> front;
  for (const auto s : seeds.voxels) {
    if (s < 0 || static_cast<std::size_t>(s) >= n)
      throw ArgumentError("seed voxel outside the band");
    field.value[s] = 0.0;
    front.emplace(0.0, s);
  }

  std::vector<std::array<std::int32_t, 6>> adjacency(n);
  for (std::size_t s = 0; s < n; ++s) {
    const VoxelIndex v = band.grid.unlinear(band.active[s]);
    for (int a = 0; a < 3; ++a)
      for (int side = 0; side < 2; ++side) {
        VoxelIndex w = v;
        w[a] += side ? 1 : -1;
        adjacency[s][2 * a + side] = band.find(w);
      }
  }

  while (!front.empty()) {
    const auto [value, s] = front.top();
    front.pop();
    if (field.accepted[s] || value > field.value[s]) continue;
    field.accepted[s] = 1;
    field.acceptance_order.push_back(s);

    for (const auto t : adjacency[s]) {
      if (t < 0 || field.accepted[t]) continue;
      std::array<double, 3> upwind;
      for (int a = 0; a < 3; ++a) {
        double best = kInf;
        for (int side = 0; side < 2; ++side) {
          const auto u = adjacency[t][2 * a + side];
          if (u >= 0 && field.accepted[u]) best = std::min(best, field.value[u]);
        }
        upwind[a] = best;
      }
      const double candidate = upwind_update(upwind, h);
      if (candidate < field.value[t]) {
        field.value[t] = candidate;
        front.emplace(candidate, t);
      }
    }
  }

  for (std::size_t s = 0; s < n; ++s)
    if (band.contains_point[s] && !field.accepted[s])
      throw DisconnectedBand(
          "point-containing voxel " +
          voxel_name(band.grid.unlinear(band.active[s])) +
          " is not connected to the seed through the band");
  return field;
}

PointScalarField interpolate_to_points(const GridScalarField& field,
                                       const NarrowBand& band,
                                       const PointCloud& cloud) {
  PointScalarField out;
  out.value.assign(cloud.size(), 0.0);
  out.out_of_band.assign(cloud.size(), 0);
  const int m = band.grid.resolution;

  parallel_for(0, cloud.size(), [&](std::size_t i) {
    const Vec3& x = cloud.points[i];
    VoxelIndex base;
    Vec3 t;
    for (int a = 0; a < 3; ++a) {
      const double g = x[a] * m - 0.5;
      const double f = std::floor(g);
      base[a] = static_cast<int>(f);
      t[a] = g - f;
    }
    double weight_sum = 0.0, acc = 0.0;
    for (int corner = 0; corner < 8; ++corner) {
      VoxelIndex v = base;
      double w = 1.0;
      for (int a = 0; a < 3; ++a) {
        const bool up = (corner >> a) & 1;
        v[a] += up;
        w *= up ? t[a] : 1.0 - t[a];
      }
      const auto s = band.find(v);
      if (s < 0 || !field.reached(s) || w == 0.0) continue;
      weight_sum += w;
      acc += w * field.value[s];
    }
    if (weight_sum > 0.0) {
      out.value[i] = acc / weight_sum;
      return;
    }
    const VoxelIndex c = containing_voxel(band.grid, x);
    const auto s = band.find(c);
    if (s < 0 || !field.reached(s))
      throw DisconnectedBand("point " + std::to_string(i) + " in voxel " +
                             voxel_name(c) + " has no reached voxel");
    out.value[i] = field.value[s];
    out.out_of_band[i] = 1;
  });
  return out;
}

}  // namespace nptc
