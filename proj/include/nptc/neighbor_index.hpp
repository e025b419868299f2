#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nptc/point_cloud.hpp"

namespace nptc {

struct Neighbor {
  std::uint32_t index;
  double distance_squared;
};

/// Static k-d tree giving exact k-nearest-neighbor answers, identical to a
/// brute-force sort by (distance, index). Read-only after construction, so
/// concurrent queries are safe.
class NeighborIndex {
 public:
  explicit NeighborIndex(std::vector<Vec3> points);

  std::size_t size() const { return points_.size(); }
  std::span<const Vec3> points() const { return points_; }

  /// k closest points in ascending (distance, index) order.
  /// Throws ArgumentError when k == 0 or k > size().
  std::vector<Neighbor> k_nearest(const Vec3& query, std::size_t k) const;
  std::vector<std::uint32_t> k_nearest_indices(const Vec3& query,
                                               std::size_t k) const;

  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    // Leaf when axis < 0: covers order_[begin, end).
    std::int32_t axis = -1;
    double split = 0.0;
    std::uint32_t begin = 0, end = 0;
    std::int32_t left = -1, right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace nptc
