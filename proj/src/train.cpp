#include "nptc/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "nptc/error.hpp"

namespace nptc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

const CloudGeometry& geometry_of(const Sample& s) {
  if (!s.geometry) throw CacheMiss("no prepared geometry for cloud '" + s.name + "'");
  return *s.geometry;
}

std::vector<int> targets(const Sample& s, Task task) {
  if (task == Task::Classification) return {s.label};
  if (s.parts.size() != geometry_of(s).points.size())
    throw ArgumentError("cloud '" + s.name + "' lacks per-point part labels");
  return s.parts;
}

int count_correct(const Tensor2<double>& probs, const std::vector<int>& labels) {
  int correct = 0;
  for (Index i = 0; i < probs.rows(); ++i) {
    Index best = 0;
    probs.row(i).maxCoeff(&best);
    correct += best == labels[static_cast<std::size_t>(i)];
  }
  return correct;
}

}  // namespace

void Optimizer::step(Parameters<float>& params) {
  auto& entries = params.entries;
  if (first_.empty()) {
    for (const auto& e : entries) {
      first_.push_back(Tensor2<float>::Zero(e.value.rows(), e.value.cols()));
      second_.push_back(Tensor2<float>::Zero(e.value.rows(), e.value.cols()));
    }
  }
  ++steps_;
  if (config_.clip_norm > 0.0) {
    double norm = 0.0;
    for (const auto& e : entries) norm += static_cast<double>(e.grad.squaredNorm());
    norm = std::sqrt(norm);
    if (norm > config_.clip_norm) {
      const auto factor = static_cast<float>(config_.clip_norm / norm);
      for (auto& e : entries) e.grad *= factor;
    }
  }
  const auto lr = static_cast<float>(config_.lr);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& e = entries[i];
    if (config_.kind == OptimizerConfig::Kind::Sgd) {
      first_[i] = static_cast<float>(config_.momentum) * first_[i] + e.grad;
      e.value -= lr * first_[i];
    } else {
      const auto b1 = static_cast<float>(config_.beta1);
      const auto b2 = static_cast<float>(config_.beta2);
      first_[i] = b1 * first_[i] + (1.0f - b1) * e.grad;
      second_[i] = b2 * second_[i] + (1.0f - b2) * e.grad.cwiseAbs2();
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(steps_));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(steps_));
      e.value.array() -= lr * (first_[i].array() / c1) /
                         ((second_[i].array() / c2).sqrt() +
                          static_cast<float>(config_.eps));
    }
  }
}

Tensor2<double> augment_features(const std::vector<Vec3>& points,
                                 const AugmentConfig& augment,
                                 std::mt19937_64& rng) {
  if (!augment.enabled) return coordinate_features(points);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double angle = augment.rotation ? 2.0 * M_PI * unit(rng) : 0.0;
  const double scale =
      augment.scale_min + (augment.scale_max - augment.scale_min) * unit(rng);
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  rot(0, 0) = std::cos(angle);
  rot(0, 1) = -std::sin(angle);
  rot(1, 0) = std::sin(angle);
  rot(1, 1) = std::cos(angle);
  std::vector<Vec3> moved(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    Vec3 p = points[i];
    if (augment.jitter > 0.0)
      p += augment.jitter * Vec3(noise(rng), noise(rng), noise(rng));
    moved[i] = Vec3::Constant(0.5) + scale * rot * (p - Vec3::Constant(0.5));
  }
  return coordinate_features(moved);
}

std::vector<EpochMetrics> train(NptcNet<float>& model,
                                std::span<const Sample> train_set,
                                std::span<const Sample> eval_set,
                                const TrainConfig& config,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
  if (!(config.optimizer.lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch size must be positive");
  if (train_set.empty()) throw ArgumentError("empty training set");
  for (const auto& s : train_set) geometry_of(s);
  for (const auto& s : eval_set) geometry_of(s);

  const Task task = model.config().task;
  std::mt19937_64 rng(config.seed);
  Optimizer optimizer(config.optimizer);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochMetrics> log;

  AugmentConfig plain = config.augment;
  plain.enabled = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    double loss_sum = 0.0;
    long correct = 0, seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      model.parameters().zero_grad();
      const auto scale = 1.0f / static_cast<float>(stop - start);
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = train_set[order[b]];
        const auto& geometry = geometry_of(s);
        const Tensor2<float> input =
            augment_features(geometry.points, config.augment, rng).cast<float>();
        const Tensor2<float> logits = model.forward(geometry, input);
        const auto labels = targets(s, task);
        auto loss = cross_entropy(logits, labels);
        loss_sum += loss.loss;
        correct += count_correct(softmax_rows(logits).cast<double>(), labels);
        seen += static_cast<long>(labels.size());
        model.backward(Tensor2<float>(loss.grad * scale));
      }
      optimizer.step(model.parameters());
    }
    EpochMetrics m;
    m.epoch = epoch;
    m.loss = loss_sum / static_cast<double>(train_set.size());
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    m.accuracy = eval_set.empty()
                     ? 0.0
                     : evaluate_accuracy(model, eval_set, 1, config.seed, plain);
    log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  return log;
}

Tensor2<double> predict(NptcNet<float>& model, const Sample& sample,
                        const AugmentConfig& augment, std::uint64_t seed) {
  const auto& geometry = geometry_of(sample);
  std::mt19937_64 rng(seed);
  const Tensor2<float> input =
      augment_features(geometry.points, augment, rng).cast<float>();
  return softmax_rows(model.forward(geometry, input).cast<double>().eval());
}

std::uint64_t voting_seed(std::uint64_t seed, int round) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(round) + 1));
}

Tensor2<double> predict_with_voting(NptcNet<float>& model, const Sample& sample,
                                    int rounds, std::uint64_t seed,
                                    const AugmentConfig& augment) {
  if (rounds < 1) throw ArgumentError("voting needs at least one round");
  Tensor2<double> sum = predict(model, sample, augment, voting_seed(seed, 0));
  for (int j = 1; j < rounds; ++j)
    sum += predict(model, sample, augment, voting_seed(seed, j));
  return sum / static_cast<double>(rounds);
}

double evaluate_accuracy(NptcNet<float>& model, std::span<const Sample> samples,
                         int rounds, std::uint64_t seed,
                         const AugmentConfig& augment) {
  long correct = 0, total = 0;
  for (const auto& s : samples) {
    const auto probs = predict_with_voting(model, s, rounds, seed, augment);
    const auto labels = targets(s, model.config().task);
    correct += count_correct(probs, labels);
    total += static_cast<long>(labels.size());
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

void write_metrics_csv(const std::vector<EpochMetrics>& log,
                       const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,loss,accuracy\n";
  out.precision(10);
  for (const auto& m : log) out << m.epoch << ',' << m.loss << ',' << m.accuracy << '\n';
}

}  // namespace nptc
