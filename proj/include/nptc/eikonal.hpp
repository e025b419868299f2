#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nptc/narrowband.hpp"

namespace nptc {

struct SeedPolicy {
  enum class Kind { FixedIndex, MinCoordinate, PlaneEdge };
  Kind kind = Kind::MinCoordinate;
  std::uint32_t point_index = 0;  // FixedIndex
  int axis = 2;                   // MinCoordinate, PlaneEdge
  bool high_side = false;         // PlaneEdge

  static SeedPolicy fixed_index(std::uint32_t i) {
    return {Kind::FixedIndex, i, 0, false};
  }
  static SeedPolicy min_coordinate(int axis) {
    return {Kind::MinCoordinate, 0, axis, false};
  }
  static SeedPolicy plane_edge(int axis, bool high_side) {
    return {Kind::PlaneEdge, 0, axis, high_side};
  }
};

struct SeedSet {
  // Positions into NarrowBand::active, ascending.
  std::vector<std::int32_t> voxels;
  SeedPolicy policy;
  // Cloud point the seed came from; empty for face seeds.
  std::optional<std::uint32_t> point_index;
};

/// Point policies seed the single voxel containing the chosen point. A face
/// policy seeds every active voxel in the outermost active layer on that
/// side of the band (the layer whose index along `axis` is extreme).
SeedSet select_seed(const NarrowBand& band, const PointCloud& cloud,
                    const SeedPolicy& policy);

struct GridScalarField {
  std::vector<double> value;           // per active voxel; +inf if unreached
  std::vector<std::uint8_t> accepted;  // per active voxel
  std::vector<std::int32_t> acceptance_order;

  bool reached(std::int32_t slot) const { return accepted[slot] != 0; }
};

/// First-order upwind fast marching for |grad rho| = 1 over the 6-connected
/// active voxels. Voxels not connected to a seed stay unreached; if any of
/// them contains a cloud point a DisconnectedBand error is thrown.
GridScalarField fast_marching(const NarrowBand& band, const SeedSet& seeds);

struct PointScalarField {
  std::vector<double> value;
  std::vector<std::uint8_t> out_of_band;

  std::size_t size() const { return value.size(); }
};

/// Trilinear interpolation over the 8 surrounding voxel centers, keeping
/// only accepted active voxels and renormalizing their weights.
PointScalarField interpolate_to_points(const GridScalarField& field,
                                       const NarrowBand& band,
                                       const PointCloud& cloud);

}  // namespace nptc
