#include "nptc/nptc_operator.hpp"

#include <cmath>

#include "nptc/binary_io.hpp"
#include "nptc/error.hpp"
#include "nptc/parallel.hpp"

namespace nptc {

namespace {

constexpr std::uint32_t kOperatorVersion = 1;

template <typename T>
void check_weights(const NptcOperator& op, const Tensor2<T>& weights,
                   Eigen::Index in_channels) {
  const Eigen::Index expected = op.tap_count() * in_channels;
  if (weights.rows() != expected)
    throw ShapeError("weights have " + std::to_string(weights.rows()) +
                     " rows, expected K^2 * C_in = " + std::to_string(expected));
}

template <typename T>
Tensor2<T> gather(const NptcOperator& op, const Tensor2<T>& features) {
  const Eigen::Index cin = features.cols();
  const int taps = op.tap_count();
  Tensor2<T> gathered(static_cast<Eigen::Index>(op.out_size()), taps * cin);
  for (std::size_t i = 0; i < op.out_size(); ++i)
    for (int pq = 0; pq < taps; ++pq)
      gathered.row(static_cast<Eigen::Index>(i)).segment(pq * cin, cin) =
          features.row(op.tap(i, pq));
  return gathered;
}

}  // namespace

double mean_neighbor_spacing(const NeighborIndex& index, std::size_t rank) {
  const std::size_t n = index.size();
  if (n < 2) return 1.0;
  const std::size_t k = std::min(rank + 1, n);
  std::vector<double> dist(n);
  parallel_for(0, n, [&](std::size_t i) {
    dist[i] = std::sqrt(index.k_nearest(index.points()[i], k).back().distance_squared);
  });
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / static_cast<double>(n);
}

NptcOperator build_operator(const NeighborIndex& in_index,
                            std::span<const TangentFrame> frames,
                            std::span<const std::uint32_t> out_indices,
                            const KernelSpec& spec) {
  const int k = spec.taps_per_axis;
  if (k < 1 || k % 2 == 0)
    throw ArgumentError("taps per axis must be a positive odd integer");
  if (out_indices.empty()) throw ArgumentError("no output points");
  if (frames.size() != in_index.size())
    throw ArgumentError("frame field size does not match the input cloud");
  for (const auto o : out_indices)
    if (o >= in_index.size())
      throw ArgumentError("output index " + std::to_string(o) +
                          " outside the input cloud");

  NptcOperator op;
  op.input_size = static_cast<std::uint32_t>(in_index.size());
  op.taps_per_axis = k;
  op.delta = spec.delta ? *spec.delta : spec.alpha * mean_neighbor_spacing(in_index);
  if (!(op.delta > 0.0)) throw ArgumentError("tap spacing must be positive");
  op.out_indices.assign(out_indices.begin(), out_indices.end());
  const auto taps = static_cast<std::size_t>(op.tap_count());
  op.taps.resize(out_indices.size() * taps);

  const int c = spec.center();
  parallel_for(0, out_indices.size(), [&](std::size_t row) {
    const auto o = out_indices[row];
    const Vec3& x = in_index.points()[o];
    const TangentFrame& f = frames[o];
    for (int p = 0; p < k; ++p)
      for (int q = 0; q < k; ++q) {
        const Vec3 v = x + (p - c) * op.delta * f.u1 + (q - c) * op.delta * f.u2;
        op.taps[row * taps + static_cast<std::size_t>(p * k + q)] =
            in_index.nearest(v).index;
      }
  });
  return op;
}

template <typename T>
Tensor2<T> apply(const NptcOperator& op, const Tensor2<T>& weights,
                 const Tensor2<T>& features) {
  if (features.rows() != static_cast<Eigen::Index>(op.input_size))
    throw ShapeError("features have " + std::to_string(features.rows()) +
                     " rows, operator expects " + std::to_string(op.input_size));
  const Eigen::Index cin = features.cols();
  check_weights(op, weights, cin);
  return gather(op, features) * weights;
}

template <typename T>
AdjointResult<T> apply_adjoint(const NptcOperator& op, const Tensor2<T>& weights,
                               const Tensor2<T>& features,
                               const Tensor2<T>& out_grad) {
  if (features.rows() != static_cast<Eigen::Index>(op.input_size))
    throw ShapeError("features row count does not match the operator");
  check_weights(op, weights, features.cols());
  if (out_grad.rows() != static_cast<Eigen::Index>(op.out_size()))
    throw ShapeError("output gradient row count does not match the operator");
  if (out_grad.cols() != weights.cols())
    throw ShapeError("output gradient channels do not match the weights");
  const int taps = op.tap_count();
  const Eigen::Index cin = features.cols();

  AdjointResult<T> result;
  result.weights_grad = gather(op, features).transpose() * out_grad;
  const Tensor2<T> gathered_grad = out_grad * weights.transpose();
  result.features_grad = Tensor2<T>::Zero(op.input_size, cin);
  for (std::size_t i = 0; i < op.out_size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int pq = 0; pq < taps; ++pq)
      result.features_grad.row(op.tap(i, pq)) +=
          gathered_grad.row(r).segment(pq * cin, cin);
  }
  return result;
}

template Tensor2<float> apply(const NptcOperator&, const Tensor2<float>&,
                              const Tensor2<float>&);
template Tensor2<double> apply(const NptcOperator&, const Tensor2<double>&,
                               const Tensor2<double>&);
template AdjointResult<float> apply_adjoint(const NptcOperator&,
                                            const Tensor2<float>&,
                                            const Tensor2<float>&,
                                            const Tensor2<float>&);
template AdjointResult<double> apply_adjoint(const NptcOperator&,
                                             const Tensor2<double>&,
                                             const Tensor2<double>&,
                                             const Tensor2<double>&);

void save_operator(const NptcOperator& op, const std::string& path,
                   std::uint64_t upstream_hash) {
  BinaryWriter out(path);
  out.write_magic("NPTC");
  out.write(kOperatorVersion);
  out.write(static_cast<std::uint64_t>(op.input_size));
  out.write(static_cast<std::uint64_t>(op.out_size()));
  out.write(static_cast<std::uint32_t>(op.taps_per_axis));
  out.write(op.delta);
  out.write(upstream_hash);
  out.write_span(std::span<const std::uint32_t>(op.out_indices));
  out.write_span(std::span<const std::uint32_t>(op.taps));
  out.close();
}

NptcOperator load_operator(const std::string& path,
                           std::uint64_t* upstream_hash) {
  BinaryReader in(path);
  in.expect_magic("NPTC");
  const auto version = in.read<std::uint32_t>();
  if (version != kOperatorVersion)
    throw ParseError(path + ": unsupported operator version " +
                     std::to_string(version));
  NptcOperator op;
  const auto n = in.read<std::uint64_t>();
  const auto out_count = in.read<std::uint64_t>();
  const auto k = in.read<std::uint32_t>();
  if (n > UINT32_MAX || k == 0 || k % 2 == 0 || k > 63)
    throw ParseError(path + ": corrupt operator header");
  op.input_size = static_cast<std::uint32_t>(n);
  op.taps_per_axis = static_cast<int>(k);
  op.delta = in.read<double>();
  const auto upstream = in.read<std::uint64_t>();
  if (upstream_hash) *upstream_hash = upstream;
  op.out_indices = in.read_vector<std::uint32_t>(out_count);
  op.taps = in.read_vector<std::uint32_t>(out_count * k * k);
  for (const auto t : op.taps)
    if (t >= op.input_size) throw ParseError(path + ": tap index out of range");
  return op;
}

}  // namespace nptc
