#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nptc/eikonal.hpp"
#include "nptc/frames.hpp"
#include "nptc/hierarchy.hpp"
#include "nptc/narrowband.hpp"
#include "nptc/nptc_operator.hpp"

namespace nptc {

struct PipelineConfig {
  int resolution = 100;
  std::optional<double> epsilon;  // empty: 2h
  SeedPolicy seed = SeedPolicy::min_coordinate(2);
  std::size_t k = 16;
  NormalPolicy normals = NormalPolicy::LpcaCentroidOriented;
  KernelSpec kernel;
  std::vector<double> ratios{1.0};
  std::uint32_t fps_start = 0;

  double resolved_epsilon() const {
    return epsilon ? *epsilon : 2.0 / resolution;
  }
};

/// Fingerprint of every field that changes the prepared geometry.
std::uint64_t fingerprint(const PipelineConfig& config);

/// Every intermediate of the per-cloud preprocessing, kept for inspection.
struct GeometryStages {
  NarrowBand band;
  SeedSet seeds;
  GridScalarField grid_distance;
  PointScalarField point_distance;
  FrameField frames;
};

/// Band, distance field and frames for a cloud already in the unit cube.
GeometryStages compute_frames(const PointCloud& cloud, const NeighborIndex& index,
                              const PipelineConfig& config);

/// Everything the network needs for one cloud: the FPS hierarchy, the
/// same-level operators used by residual blocks and the strided operators
/// between consecutive levels.
struct CloudGeometry {
  std::vector<Vec3> points;
  PointHierarchy hierarchy;
  std::vector<NptcOperator> level_ops;  // level l onto itself
  std::vector<NptcOperator> down_ops;   // level l onto level l + 1
};

CloudGeometry prepare_cloud(const PointCloud& cloud, const PipelineConfig& config);

/// Builds operators for an existing frame field (frames indexed like cloud).
CloudGeometry assemble_geometry(const std::vector<Vec3>& points,
                                const FrameField& frames,
                                const PipelineConfig& config);

void save_geometry(const CloudGeometry& geometry, const std::string& path,
                   std::uint64_t upstream_hash);
/// Throws CacheMiss when the file is missing or its upstream hash differs.
CloudGeometry load_geometry(const std::string& path,
                            std::uint64_t expected_upstream_hash);

}  // namespace nptc
