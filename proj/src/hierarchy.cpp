#include "nptc/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "nptc/error.hpp"
#include "nptc/neighbor_index.hpp"

namespace nptc {

std::vector<std::uint32_t> farthest_point_sampling(
    std::span<const Vec3> points, std::span<const std::uint32_t> subset,
    std::size_t n, std::uint32_t start) {
  if (n > subset.size())
    throw ArgumentError("cannot sample " + std::to_string(n) + " of " +
                        std::to_string(subset.size()) + " points");
  for (const auto s : subset)
    if (s >= points.size()) throw ArgumentError("subset index out of range");
  const auto start_it = std::find(subset.begin(), subset.end(), start);
  if (start_it == subset.end())
    throw ArgumentError("start point " + std::to_string(start) +
                        " is not in the subset");
  std::vector<std::uint32_t> picked;
  if (n == 0) return picked;
  picked.reserve(n);
  picked.push_back(start);

  std::vector<double> min_dist(subset.size(),
                               std::numeric_limits<double>::infinity());
  std::size_t last = static_cast<std::size_t>(start_it - subset.begin());
  min_dist[last] = -1.0;  // picked
  while (picked.size() < n) {
    const Vec3& p = points[subset[last]];
    std::size_t best = subset.size();
    for (std::size_t j = 0; j < subset.size(); ++j) {
      if (min_dist[j] < 0.0) continue;
      min_dist[j] = std::min(min_dist[j], (points[subset[j]] - p).squaredNorm());
      if (best == subset.size() || min_dist[j] > min_dist[best] ||
          (min_dist[j] == min_dist[best] && subset[j] < subset[best]))
        best = j;
    }
    picked.push_back(subset[best]);
    min_dist[best] = -1.0;
    last = best;
  }
  return picked;
}

std::vector<std::uint32_t> PointHierarchy::positions_in_parent(
    std::size_t level) const {
  if (level == 0 || level >= levels.size())
    throw ArgumentError("level has no parent");
  std::unordered_map<std::uint32_t, std::uint32_t> where;
  const auto& parent = levels[level - 1];
  for (std::size_t j = 0; j < parent.size(); ++j)
    where.emplace(parent[j], static_cast<std::uint32_t>(j));
  std::vector<std::uint32_t> out;
  out.reserve(levels[level].size());
  for (const auto idx : levels[level]) out.push_back(where.at(idx));
  return out;
}

std::vector<Vec3> PointHierarchy::level_points(std::span<const Vec3> base,
                                               std::size_t level) const {
  std::vector<Vec3> out;
  out.reserve(levels.at(level).size());
  for (const auto idx : levels[level]) out.push_back(base[idx]);
  return out;
}

PointHierarchy build_hierarchy(std::span<const Vec3> points,
                               std::span<const double> ratios,
                               std::uint32_t start) {
  if (points.empty()) throw EmptyCloud("cannot build a hierarchy of nothing");
  if (ratios.empty() || ratios.front() != 1.0)
    throw ArgumentError("hierarchy ratios must start with 1");
  if (start >= points.size()) throw ArgumentError("start point out of range");
  PointHierarchy h;
  std::vector<std::uint32_t> all(points.size());
  for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
  h.levels.push_back(all);
  h.nearest_coarse.emplace_back();

  for (std::size_t i = 1; i < ratios.size(); ++i) {
    const auto size = static_cast<std::size_t>(std::max(
        1.0, std::round(ratios[i] * static_cast<double>(points.size()))));
    if (size >= h.levels.back().size())
      throw ArgumentError("hierarchy level " + std::to_string(i) +
                          " does not shrink");
    auto level = farthest_point_sampling(points, h.levels.back(), size, start);

    std::vector<Vec3> coarse;
    coarse.reserve(level.size());
    for (const auto idx : level) coarse.push_back(points[idx]);
    const NeighborIndex index(std::move(coarse));
    std::vector<std::uint32_t> map;
    map.reserve(h.levels.back().size());
    for (const auto idx : h.levels.back())
      map.push_back(index.nearest(points[idx]).index);
    h.levels.push_back(std::move(level));
    h.nearest_coarse.push_back(std::move(map));
  }
  return h;
}

template <typename T>
Tensor2<T> upsample_nn(const Tensor2<T>& coarse, const PointHierarchy& h,
                       std::size_t level) {
  if (level == 0 || level >= h.level_count())
    throw ArgumentError("no finer level to upsample into");
  if (coarse.rows() != static_cast<Eigen::Index>(h.levels[level].size()))
    throw ShapeError("coarse features have " + std::to_string(coarse.rows()) +
                     " rows, level has " +
                     std::to_string(h.levels[level].size()));
  const auto& map = h.nearest_coarse[level];
  Tensor2<T> fine(static_cast<Eigen::Index>(map.size()), coarse.cols());
  for (std::size_t j = 0; j < map.size(); ++j)
    fine.row(static_cast<Eigen::Index>(j)) = coarse.row(map[j]);
  return fine;
}

template <typename T>
Tensor2<T> upsample_nn_adjoint(const Tensor2<T>& fine_grad,
                               const PointHierarchy& h, std::size_t level) {
  if (level == 0 || level >= h.level_count())
    throw ArgumentError("no finer level to upsample into");
  const auto& map = h.nearest_coarse[level];
  if (fine_grad.rows() != static_cast<Eigen::Index>(map.size()))
    throw ShapeError("fine gradient row count does not match the level");
  Tensor2<T> coarse =
      Tensor2<T>::Zero(static_cast<Eigen::Index>(h.levels[level].size()),
                       fine_grad.cols());
  for (std::size_t j = 0; j < map.size(); ++j)
    coarse.row(map[j]) += fine_grad.row(static_cast<Eigen::Index>(j));
  return coarse;
}

template Tensor2<float> upsample_nn(const Tensor2<float>&, const PointHierarchy&,
                                    std::size_t);
template Tensor2<double> upsample_nn(const Tensor2<double>&,
                                     const PointHierarchy&, std::size_t);
template Tensor2<float> upsample_nn_adjoint(const Tensor2<float>&,
                                            const PointHierarchy&, std::size_t);
template Tensor2<double> upsample_nn_adjoint(const Tensor2<double>&,
                                             const PointHierarchy&, std::size_t);

}  // namespace nptc
