#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nptc/model.hpp"

namespace nptc {

struct AugmentConfig {
  bool enabled = true;
  bool rotation = true;  // uniform angle about the z axis
  double scale_min = 0.9;
  double scale_max = 1.1;
  double jitter = 0.01;  // Gaussian sigma in normalized cloud units
};

struct OptimizerConfig {
  enum class Kind { Sgd, Adam };
  Kind kind = Kind::Sgd;
  double lr = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Rescales the whole gradient to this global L2 norm when it is larger;
  // 0 disables clipping.
  double clip_norm = 0.25;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  int epochs = 20;
  int batch_size = 8;
  AugmentConfig augment;
  std::uint64_t seed = 1;
  int voting_rounds = 1;
};

struct Sample {
  std::string name;
  std::shared_ptr<const CloudGeometry> geometry;
  int label = 0;
  std::vector<int> parts;  // per point, segmentation only
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;            // mean training loss
  double accuracy = 0.0;        // eval split, no augmentation
  double train_accuracy = 0.0;  // on the augmented training passes
};

/// SGD with momentum (v = mu v + g, theta -= lr v) or Adam with bias
/// correction; state is kept per parameter entry. Clipping, when enabled,
/// happens before the update.
class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& config) : config_(config) {}
  void step(Parameters<float>& params);

 private:
  OptimizerConfig config_;
  std::vector<Tensor2<float>> first_, second_;
  long steps_ = 0;
};

/// Features for one pass: jitter, then random z-rotation and isotropic
/// scale about the cube center, returned as centered coordinates.
Tensor2<double> augment_features(const std::vector<Vec3>& points,
                                 const AugmentConfig& augment,
                                 std::mt19937_64& rng);

/// Trains in place. Deterministic given config.seed. Throws CacheMiss when a
/// sample has no prepared geometry.
std::vector<EpochMetrics> train(
    NptcNet<float>& model, std::span<const Sample> train_set,
    std::span<const Sample> eval_set, const TrainConfig& config,
    const std::function<void(const EpochMetrics&)>& on_epoch = {});

/// Softmax probabilities for a single augmented pass seeded by `seed`
/// (one row for classification, one per point for segmentation).
Tensor2<double> predict(NptcNet<float>& model, const Sample& sample,
                        const AugmentConfig& augment, std::uint64_t seed);

/// Seed of voting round `round` derived from the base seed.
std::uint64_t voting_seed(std::uint64_t seed, int round);

/// Mean of predict() over n_a rounds seeded by voting_seed(seed, j).
Tensor2<double> predict_with_voting(NptcNet<float>& model, const Sample& sample,
                                    int rounds, std::uint64_t seed,
                                    const AugmentConfig& augment);

/// Fraction of correct argmax predictions (per point for segmentation).
double evaluate_accuracy(NptcNet<float>& model, std::span<const Sample> samples,
                         int rounds, std::uint64_t seed,
                         const AugmentConfig& augment);

/// CSV with header "epoch,loss,accuracy".
void write_metrics_csv(const std::vector<EpochMetrics>& log,
                       const std::string& path);

}  // namespace nptc
