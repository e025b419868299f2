#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nptc/point_cloud.hpp"
#include "nptc/tensor.hpp"

namespace nptc {

/// Greedy farthest point sampling restricted to `subset`: start from `start`,
/// then repeatedly take the subset point farthest from the picks so far
/// (lowest cloud index on ties). Throws ArgumentError if n > |subset| or
/// start is not in subset.
std::vector<std::uint32_t> farthest_point_sampling(
    std::span<const Vec3> points, std::span<const std::uint32_t> subset,
    std::size_t n, std::uint32_t start);

struct PointHierarchy {
  // levels[0] lists every base point; levels[i] is in FPS order and a subset
  // of levels[i - 1].
  std::vector<std::vector<std::uint32_t>> levels;
  // nearest_coarse[i][j]: position in levels[i] of the point nearest to the
  // j-th point of levels[i - 1] (lowest position on ties). Entry 0 is empty.
  std::vector<std::vector<std::uint32_t>> nearest_coarse;

  std::size_t level_count() const { return levels.size(); }

  /// Positions of levels[i] inside levels[i - 1].
  std::vector<std::uint32_t> positions_in_parent(std::size_t level) const;

  std::vector<Vec3> level_points(std::span<const Vec3> base,
                                 std::size_t level) const;
};

/// Level sizes are round(ratio * N) (at least 1); ratios[0] must be 1 and
/// sizes must strictly decrease.
PointHierarchy build_hierarchy(std::span<const Vec3> points,
                               std::span<const double> ratios,
                               std::uint32_t start = 0);

/// Copies each fine point's nearest coarse feature row (level -> level - 1).
template <typename T>
Tensor2<T> upsample_nn(const Tensor2<T>& coarse, const PointHierarchy& h,
                       std::size_t level);

/// Adjoint of upsample_nn: sums fine gradient rows into their coarse source.
template <typename T>
Tensor2<T> upsample_nn_adjoint(const Tensor2<T>& fine_grad,
                               const PointHierarchy& h, std::size_t level);

}  // namespace nptc
