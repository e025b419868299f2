#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nptc/frames.hpp"
#include "nptc/neighbor_index.hpp"
#include "nptc/tensor.hpp"

namespace nptc {

struct KernelSpec {
  int taps_per_axis = 3;         // K, odd
  std::optional<double> delta;   // tap spacing; empty = auto
  double alpha = 1.0;            // auto: delta = alpha * mean 8-NN distance

  int tap_count() const { return taps_per_axis * taps_per_axis; }
  int center() const { return (taps_per_axis - 1) / 2; }
};

/// Mean over the cloud of the distance to each point's 8th nearest other
/// point (fewer when the cloud is smaller).
double mean_neighbor_spacing(const NeighborIndex& index, std::size_t rank = 8);

/// Per-output-point gather table realizing the discretized transported
/// kernel: row i lists the K^2 source points, row-major over (p, q), whose
/// features feed output point out_indices[i].
struct NptcOperator {
  std::uint32_t input_size = 0;
  int taps_per_axis = 1;
  double delta = 0.0;
  std::vector<std::uint32_t> out_indices;
  std::vector<std::uint32_t> taps;

  std::size_t out_size() const { return out_indices.size(); }
  int tap_count() const { return taps_per_axis * taps_per_axis; }
  std::uint32_t tap(std::size_t row, int pq) const {
    return taps[row * static_cast<std::size_t>(tap_count()) + pq];
  }
};

/// Tap (p, q) of output x sits at x + (p - c) delta u1 + (q - c) delta u2 with
/// c = (K - 1) / 2 and takes its value from the nearest input point (lowest
/// index on ties). Taps beyond the cloud simply snap to the closest point, so
/// boundary rows may repeat sources.
NptcOperator build_operator(const NeighborIndex& in_index,
                            std::span<const TangentFrame> frames,
                            std::span<const std::uint32_t> out_indices,
                            const KernelSpec& spec);

/// out[i, co] = sum_{pq, ci} W[pq * C_in + ci, co] * F[tap(i, pq), ci].
/// Weights are a (K^2 * C_in) x C_out matrix.
template <typename T>
Tensor2<T> apply(const NptcOperator& op, const Tensor2<T>& weights,
                 const Tensor2<T>& features);

template <typename T>
struct AdjointResult {
  Tensor2<T> features_grad;
  Tensor2<T> weights_grad;
};

/// Exact adjoint of apply() in both arguments: features_grad is the
/// transpose gather of out_grad through `weights`, weights_grad pairs
/// out_grad with the forward `features`. Scatter-adds run in row order so
/// results are reproducible.
template <typename T>
AdjointResult<T> apply_adjoint(const NptcOperator& op, const Tensor2<T>& weights,
                               const Tensor2<T>& features,
                               const Tensor2<T>& out_grad);

/// Binary cache layout, little-endian:
///   char[4] "NPTC", u32 version (1), u64 N, u64 |out|, u32 K, f64 delta,
///   u64 upstream hash, u32[|out|] out indices, u32[|out| * K^2] taps.
void save_operator(const NptcOperator& op, const std::string& path,
                   std::uint64_t upstream_hash);
NptcOperator load_operator(const std::string& path,
                           std::uint64_t* upstream_hash = nullptr);

}  // namespace nptc
