#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nptc/tensor.hpp"

namespace nptc {

struct GradTarget {
  std::string name;
  Tensor2<double>* value;         // perturbed in place, restored afterwards
  const Tensor2<double>* grad;    // analytic gradient of the loss
};

/// Central differences (step 1e-5) on every entry of every target versus the
/// analytic gradient, reporting max |a - n| / max(|a|, |n|, 1e-12). Entries
/// sitting on a ReLU kink (one-sided slopes differing by more than
/// max(0.1% relative, 1e-6)) have no derivative; they are skipped and counted.
struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t entries = 0;  // compared
  std::size_t kinks = 0;    // skipped
};
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<GradTarget>& targets,
                           double step = 1e-5);

struct GradCheckResult {
  std::string fragment;
  GradCheckReport report;
};

// Randomized fragments in double precision. Each forms a scalar loss
// (a fixed random projection of the output, or cross entropy), runs the
// analytic backward pass once and then finite-differences every parameter
// and input entry.
GradCheckReport check_linear(std::uint64_t seed);
GradCheckReport check_mlp(std::uint64_t seed);
GradCheckReport check_conv(std::uint64_t seed, int n = 16, int channels = 4, int k = 3);
GradCheckReport check_residual_block(std::uint64_t seed, int n = 16, int channels = 4,
                            int k = 3);
GradCheckReport check_max_pool(std::uint64_t seed);
GradCheckReport check_concat(std::uint64_t seed);
GradCheckReport check_upsample(std::uint64_t seed);
GradCheckReport check_cross_entropy(std::uint64_t seed);
/// Two-level classification network on a random sphere cloud of n points.
GradCheckReport check_network(std::uint64_t seed, int n = 64, int channels = 8, int k = 3,
                     bool segmentation = false);

/// Every fragment above for one seed.
std::vector<GradCheckResult> check_all(std::uint64_t seed);

}  // namespace nptc
