#pragma once

#include <random>
#include <string>
#include <vector>

#include "nptc/layers.hpp"
#include "nptc/pipeline.hpp"

namespace nptc {

enum class Task { Classification, Segmentation };

struct NetworkConfig {
  // One entry per hierarchy level.
  std::vector<int> widths{32, 64, 128};
  std::vector<int> residual_blocks{1, 1, 1};
  int taps_per_axis = 3;
  int head_width = 64;
  int input_channels = 3;
  Task task = Task::Classification;
  int num_classes = 3;  // part labels for segmentation

  std::size_t level_count() const { return widths.size(); }
  /// Throws ConfigError on inconsistent sizes or odd residual widths.
  void validate() const;
};

/// Desk-scale NPTC network.
///
/// Encoder: a pointwise stem lifts the inputs to widths[0]; each level runs
/// its residual blocks on the level's own operator, then a strided NPTC
/// convolution (ReLU) carries features to the next, coarser level.
/// Classification: global max pool of the coarsest features, then a
/// two-layer head. Segmentation: from the coarsest level up, nearest-neighbor
/// upsampling, concatenation with the encoder features of the finer level and
/// a pointwise layer back to that level's width, then a per-point head.
template <typename T>
class NptcNet {
 public:
  explicit NptcNet(const NetworkConfig& config);

  void init(std::uint64_t seed);

  const NetworkConfig& config() const { return config_; }
  Parameters<T>& parameters() { return params_; }
  const Parameters<T>& parameters() const { return params_; }

  /// Logits: 1 x classes for classification, N x parts for segmentation.
  Tensor2<T> forward(const CloudGeometry& geometry, const Tensor2<T>& input);

  /// Accumulates parameter gradients; returns the gradient w.r.t. the input.
  Tensor2<T> backward(const Tensor2<T>& logits_grad);

 private:
  void check_geometry(const CloudGeometry& g, const Tensor2<T>& input) const;

  NetworkConfig config_;
  Parameters<T> params_;
  Linear<T> stem_;
  std::vector<std::vector<ResidualBlock<T>>> blocks_;
  std::vector<NptcConv<T>> down_;
  Mlp<T> head_;
  std::vector<Linear<T>> decode_;  // decode_[l] maps level l + 1 -> l
  std::vector<Index> widths_;

  const CloudGeometry* geometry_ = nullptr;
  Index pooled_rows_ = 0;
  std::vector<Index> argmax_;
  std::vector<Index> skip_widths_;
};

template <typename T>
void NptcNet<T>::check_geometry(const CloudGeometry& g,
                                const Tensor2<T>& input) const {
  if (g.hierarchy.level_count() != config_.level_count())
    throw ShapeError("geometry has " + std::to_string(g.hierarchy.level_count()) +
                     " levels, network expects " +
                     std::to_string(config_.level_count()));
  if (input.rows() != static_cast<Index>(g.points.size()) ||
      input.cols() != config_.input_channels)
    throw ShapeError("input features must be N x " +
                     std::to_string(config_.input_channels));
}

template <typename T>
NptcNet<T>::NptcNet(const NetworkConfig& config) : config_(config) {
  config_.validate();
  const int taps = config_.taps_per_axis * config_.taps_per_axis;
  const std::size_t levels = config_.level_count();
  for (int w : config_.widths) widths_.push_back(w);

  stem_ = Linear<T>(params_, "stem", config_.input_channels, widths_[0], true);
  blocks_.resize(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0)
      down_.emplace_back(params_, "down" + std::to_string(l), taps,
                         widths_[l - 1], widths_[l], true);
    for (int b = 0; b < config_.residual_blocks[l]; ++b)
      blocks_[l].emplace_back(params_,
                              "level" + std::to_string(l) + ".block" + std::to_string(b),
                              taps, widths_[l]);
  }
  if (config_.task == Task::Segmentation) {
    for (std::size_t l = 0; l + 1 < levels; ++l)
      decode_.emplace_back(params_, "decode" + std::to_string(l),
                           widths_[l + 1] + widths_[l], widths_[l], true);
    head_ = Mlp<T>(params_, "head",
                   {widths_[0], config_.head_width, config_.num_classes}, true);
  } else {
    head_ = Mlp<T>(params_, "head",
                   {widths_.back(), config_.head_width, config_.num_classes},
                   true);
  }
}

template <typename T>
void NptcNet<T>::init(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  stem_.init(params_, rng);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    if (l > 0) down_[l - 1].init(params_, rng);
    for (const auto& b : blocks_[l]) b.init(params_, rng);
  }
  for (const auto& d : decode_) d.init(params_, rng);
  head_.init(params_, rng);
}

template <typename T>
Tensor2<T> NptcNet<T>::forward(const CloudGeometry& g, const Tensor2<T>& input) {
  check_geometry(g, input);
  geometry_ = &g;
  const std::size_t levels = config_.level_count();
  std::vector<Tensor2<T>> skips(levels);
  Tensor2<T> f = stem_.forward(params_, input);
  for (std::size_t l = 0; l < levels; ++l) {
    if (l > 0) f = down_[l - 1].forward(params_, g.down_ops[l - 1], f);
    for (auto& b : blocks_[l]) f = b.forward(params_, g.level_ops[l], f);
    check_finite(f, "encoder");
    skips[l] = f;
  }
  if (config_.task == Task::Classification) {
    auto pooled = global_max_pool(f);
    pooled_rows_ = f.rows();
    argmax_ = std::move(pooled.argmax);
    return head_.forward(params_, Tensor2<T>(pooled.values));
  }
  skip_widths_.assign(levels, 0);
  for (std::size_t l = levels - 1; l > 0; --l) {
    const Tensor2<T> up = upsample_nn(f, g.hierarchy, l);
    skip_widths_[l - 1] = skips[l - 1].cols();
    f = decode_[l - 1].forward(params_, concat(up, skips[l - 1]));
  }
  return head_.forward(params_, f);
}

template <typename T>
Tensor2<T> NptcNet<T>::backward(const Tensor2<T>& logits_grad) {
  const CloudGeometry& g = *geometry_;
  const std::size_t levels = config_.level_count();
  Tensor2<T> d = head_.backward(params_, logits_grad);
  // Gradients flowing into each level's encoder output from skip paths.
  std::vector<Tensor2<T>> skip_grad(levels);
  if (config_.task == Task::Classification) {
    d = global_max_pool_backward<T>(RowVector<T>(d.row(0)), argmax_, pooled_rows_);
  } else {
    for (std::size_t l = 1; l < levels; ++l) {
      const Tensor2<T> dc = decode_[l - 1].backward(params_, d);
      const Index up_cols = dc.cols() - skip_widths_[l - 1];
      skip_grad[l - 1] = dc.rightCols(skip_widths_[l - 1]);
      d = upsample_nn_adjoint(Tensor2<T>(dc.leftCols(up_cols)), g.hierarchy, l);
    }
  }
  for (std::size_t l = levels; l-- > 0;) {
    if (skip_grad[l].size() > 0) d += skip_grad[l];
    for (auto it = blocks_[l].rbegin(); it != blocks_[l].rend(); ++it)
      d = it->backward(params_, d);
    if (l > 0) d = down_[l - 1].backward(params_, d);
  }
  return stem_.backward(params_, d);
}

/// Centered coordinates 2 (x - 0.5), the network's default input features.
Tensor2<double> coordinate_features(const std::vector<Vec3>& points);

/// Checkpoint: char[4] "NPCK", u32 version, string network-config JSON,
/// u32 entry count, then per entry: string name, u32 rows, u32 cols,
/// f32[rows * cols] row-major values. Strings are u32 length + bytes.
void save_checkpoint(const NptcNet<float>& model, const std::string& config_json,
                     const std::string& path);
struct Checkpoint {
  std::string config_json;
  std::vector<std::pair<std::string, Tensor2<float>>> tensors;
};
Checkpoint read_checkpoint(const std::string& path);
/// Copies matching tensors into the model; throws ShapeError on mismatch.
void load_parameters(NptcNet<float>& model, const Checkpoint& checkpoint);

}  // namespace nptc
