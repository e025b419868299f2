#include "nptc/neighbor_index.hpp"

#include <algorithm>
#include <numeric>

#include "nptc/error.hpp"

namespace nptc {

namespace {

constexpr std::uint32_t kLeafSize = 12;

// Max-heap order on (distance, index): the heap top is the current worst.
bool closer(const Neighbor& a, const Neighbor& b) {
  if (a.distance_squared != b.distance_squared)
    return a.distance_squared < b.distance_squared;
  return a.index < b.index;
}

struct Search {
  const Vec3& query;
  std::size_t k;
  std::vector<Neighbor> heap;

  bool full() const { return heap.size() == k; }
  double worst() const { return heap.front().distance_squared; }

  void offer(Neighbor candidate) {
    if (!full()) {
      heap.push_back(candidate);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(candidate, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = candidate;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
  }
};

}  // namespace

NeighborIndex::NeighborIndex(std::vector<Vec3> points)
    : points_(std::move(points)) {
  if (points_.empty()) throw EmptyCloud("cannot index an empty cloud");
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * points_.size() / kLeafSize + 2);
  root_ = build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(Node{});
  nodes_[id].begin = begin;
  nodes_[id].end = end;
  if (end - begin <= kLeafSize) return id;

  Vec3 lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all coincident: keep as a leaf

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid,
                   order_.begin() + end, [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const auto left = build(begin, mid);
  const auto right = build(mid, end);
  Node& node = nodes_[id];
  node.axis = axis;
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<Neighbor> NeighborIndex::k_nearest(const Vec3& query,
                                               std::size_t k) const {
  if (k == 0 || k > points_.size())
    throw ArgumentError("k = " + std::to_string(k) + " outside [1, " +
                        std::to_string(points_.size()) + "]");
  Search search{query, k, {}};
  search.heap.reserve(k);

  // Explicit stack of (node, lower bound on squared distance to its cell).
  std::vector<std::pair<std::int32_t, double>> stack;
  stack.emplace_back(root_, 0.0);
  while (!stack.empty()) {
    const auto [id, bound] = stack.back();
    stack.pop_back();
    // Equal bounds must still be visited: a tie may win on index.
    if (search.full() && bound > search.worst()) continue;
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = order_[i];
        search.offer({p, (points_[p] - query).squaredNorm()});
      }
      continue;
    }
    const double diff = query[node.axis] - node.split;
    const double far_bound = std::max(bound, diff * diff);
    const auto near_child = diff < 0.0 ? node.left : node.right;
    const auto far_child = diff < 0.0 ? node.right : node.left;
    stack.emplace_back(far_child, far_bound);
    stack.emplace_back(near_child, bound);
  }
  std::sort_heap(search.heap.begin(), search.heap.end(), closer);
  return std::move(search.heap);
}

std::vector<std::uint32_t> NeighborIndex::k_nearest_indices(
    const Vec3& query, std::size_t k) const {
  const auto found = k_nearest(query, k);
  std::vector<std::uint32_t> out(found.size());
  std::transform(found.begin(), found.end(), out.begin(),
                 [](const Neighbor& n) { return n.index; });
  return out;
}

Neighbor NeighborIndex::nearest(const Vec3& query) const {
  return k_nearest(query, 1).front();
}

}  // namespace nptc
