#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nptc/eikonal.hpp"
#include "nptc/neighbor_index.hpp"
#include "nptc/point_cloud.hpp"

namespace nptc {

struct TangentFrame {
  Vec3 u1 = Vec3::UnitX();
  Vec3 u2 = Vec3::UnitY();
  Vec3 n = Vec3::UnitZ();
  bool singular = false;
};

struct LocalBasis {
  Vec3 t1, t2, n;  // eigenvectors for descending eigenvalues
  bool degenerate = false;
};

/// Local PCA over the k nearest neighbors (the point included). Each
/// eigenvector is signed so its first nonzero component is positive.
/// Throws ArgumentError when k < 4 or k exceeds the cloud size.
std::vector<LocalBasis> lpca_basis(const PointCloud& cloud,
                                   const NeighborIndex& index, std::size_t k);

struct GradientEstimate {
  Vec3 g = Vec3::Zero();
  bool rank_deficient = false;
};

/// Least-squares gradient from the k - 1 nearest other points, solving the
/// Tikhonov-regularized normal equations
/// (A^T A + lambda I) g = A^T b, lambda = 1e-8 * (mean |x_k - x|)^2.
std::vector<GradientEstimate> ls_gradient(const PointCloud& cloud,
                                          const NeighborIndex& index,
                                          const PointScalarField& rho,
                                          std::size_t k);

enum class NormalPolicy { UseInput, LpcaCentroidOriented };

struct FrameField {
  std::vector<TangentFrame> frames;
  std::optional<std::uint32_t> seed_point;
  std::size_t singular_count = 0;

  std::size_t size() const { return frames.size(); }
};

inline constexpr double kSingularityThreshold = 1e-6;

/// u1 is the tangent projection of the estimated grad rho, u2 = u1 x n.
/// Points whose projected gradient is shorter than kSingularityThreshold, and
/// the seed point itself, are marked singular and fall back to the principal
/// LPCA direction.
FrameField build_frame_field(const PointCloud& cloud, const NeighborIndex& index,
                             const PointScalarField& rho, std::size_t k,
                             NormalPolicy policy,
                             std::optional<std::uint32_t> seed_point = {});

}  // namespace nptc
