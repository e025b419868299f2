#include "nptc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nptc/layers.hpp"
#include "nptc/model.hpp"
#include "nptc/pipeline.hpp"

namespace nptc {

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<GradTarget>& targets, double step) {
  GradCheckReport report;
  const double base = loss();
  for (const auto& t : targets) {
    for (Index i = 0; i < t.value->size(); ++i) {
      double& x = t.value->data()[i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      // A ReLU switching inside [x - step, x + step] makes the one-sided
      // slopes disagree at O(1); the derivative is undefined there.
      const double forward = (up - base) / step, backward = (base - down) / step;
      if (std::abs(forward - backward) >
          std::max(1e-3 * std::max(std::abs(forward), std::abs(backward)), 1e-6)) {
        ++report.kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = t.grad->data()[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
      report.max_relative_error =
          std::max(report.max_relative_error, std::abs(analytic - numeric) / denom);
      ++report.entries;
    }
  }
  return report;
}

namespace {

Tensor2<double> random_tensor(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor2<double> t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
  return t;
}

std::vector<Vec3> random_sphere(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < n; ++i) {
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    pts.push_back(Vec3::Constant(0.5) + 0.4 * d);
  }
  return pts;
}

// Operators on a random sphere with LPCA principal directions as frames;
// enough structure to exercise gather/scatter with shared taps.
CloudGeometry random_geometry(int n, int k, std::vector<double> ratios,
                              std::mt19937_64& rng) {
  PointCloud cloud;
  cloud.points = random_sphere(n, rng);
  const NeighborIndex index(cloud.points);
  const auto basis = lpca_basis(cloud, index, std::min<std::size_t>(8, cloud.size()));
  FrameField frames;
  for (const auto& b : basis) frames.frames.push_back({b.t1, b.t2, b.n, false});
  PipelineConfig config;
  config.kernel.taps_per_axis = k;
  config.ratios = std::move(ratios);
  return assemble_geometry(cloud.points, frames, config);
}

double projected(const Tensor2<double>& out, const Tensor2<double>& r) {
  return out.cwiseProduct(r).sum();
}

std::vector<GradTarget> param_targets(Parameters<double>& params) {
  std::vector<GradTarget> t;
  for (auto& e : params.entries) t.push_back({e.name, &e.value, &e.grad});
  return t;
}

}  // namespace

GradCheckReport check_linear(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Parameters<double> params;
  Linear<double> layer(params, "linear", 3, 4, false);
  layer.init(params, rng);
  params.value(1) = random_tensor(1, 4, rng);
  Tensor2<double> x = random_tensor(5, 3, rng);
  const Tensor2<double> r = random_tensor(5, 4, rng);
  layer.forward(params, x);
  const Tensor2<double> dx = layer.backward(params, r);
  auto targets = param_targets(params);
  targets.push_back({"input", &x, &dx});
  return grad_check([&] { return projected(layer.forward(params, x), r); }, targets);
}

GradCheckReport check_mlp(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Parameters<double> params;
  Mlp<double> mlp(params, "mlp", {4, 6, 5, 3}, false);
  mlp.init(params, rng);
  for (auto& e : params.entries)
    if (e.value.rows() == 1) e.value = random_tensor(1, e.value.cols(), rng) * 0.1;
  Tensor2<double> x = random_tensor(7, 4, rng);
  const Tensor2<double> r = random_tensor(7, 3, rng);
  mlp.forward(params, x);
  const Tensor2<double> dx = mlp.backward(params, r);
  auto targets = param_targets(params);
  targets.push_back({"input", &x, &dx});
  return grad_check([&] { return projected(mlp.forward(params, x), r); }, targets);
}

GradCheckReport check_conv(std::uint64_t seed, int n, int channels, int k) {
  std::mt19937_64 rng(seed);
  const auto geometry = random_geometry(n, k, {1.0, 0.5}, rng);
  const auto& op = geometry.down_ops[0];
  Parameters<double> params;
  NptcConv<double> conv(params, "conv", k * k, channels, channels + 1, false);
  conv.init(params, rng);
  params.value(1) = random_tensor(1, channels + 1, rng);
  Tensor2<double> x = random_tensor(n, channels, rng);
  const Tensor2<double> r =
      random_tensor(static_cast<Index>(op.out_size()), channels + 1, rng);
  conv.forward(params, op, x);
  const Tensor2<double> dx = conv.backward(params, r);
  auto targets = param_targets(params);
  targets.push_back({"input", &x, &dx});
  return grad_check([&] { return projected(conv.forward(params, op, x), r); },
                    targets);
}

GradCheckReport check_residual_block(std::uint64_t seed, int n, int channels, int k) {
  std::mt19937_64 rng(seed);
  const auto geometry = random_geometry(n, k, {1.0}, rng);
  const auto& op = geometry.level_ops[0];
  Parameters<double> params;
  ResidualBlock<double> block(params, "block", k * k, channels);
  block.init(params, rng);
  for (auto& e : params.entries)
    if (e.value.rows() == 1) e.value = random_tensor(1, e.value.cols(), rng) * 0.1;
  Tensor2<double> x = random_tensor(n, channels, rng);
  const Tensor2<double> r = random_tensor(n, channels, rng);
  block.forward(params, op, x);
  const Tensor2<double> dx = block.backward(params, r);
  auto targets = param_targets(params);
  targets.push_back({"input", &x, &dx});
  return grad_check([&] { return projected(block.forward(params, op, x), r); },
                    targets);
}

GradCheckReport check_max_pool(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor2<double> x = random_tensor(6, 4, rng);
  const Tensor2<double> r = random_tensor(1, 4, rng);
  const auto pooled = global_max_pool(x);
  const Tensor2<double> dx =
      global_max_pool_backward<double>(r.row(0), pooled.argmax, x.rows());
  return grad_check(
      [&] { return Tensor2<double>(global_max_pool(x).values).cwiseProduct(r).sum(); },
      {{"input", &x, &dx}});
}

GradCheckReport check_concat(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor2<double> a = random_tensor(5, 2, rng), b = random_tensor(5, 3, rng);
  const Tensor2<double> r = random_tensor(5, 5, rng);
  const Tensor2<double> da = r.leftCols(2), db = r.rightCols(3);
  return grad_check([&] { return projected(concat(a, b), r); },
                    {{"a", &a, &da}, {"b", &b, &db}});
}

GradCheckReport check_upsample(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto pts = random_sphere(32, rng);
  const std::vector<double> ratios{1.0, 0.25};
  const auto h = build_hierarchy(pts, ratios, 0);
  Tensor2<double> coarse = random_tensor(8, 3, rng);
  const Tensor2<double> r = random_tensor(32, 3, rng);
  const Tensor2<double> dc = upsample_nn_adjoint(r, h, 1);
  return grad_check([&] { return projected(upsample_nn(coarse, h, 1), r); },
                    {{"coarse", &coarse, &dc}});
}

GradCheckReport check_cross_entropy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor2<double> logits = random_tensor(4, 3, rng) * 3.0;
  std::uniform_int_distribution<int> label(0, 2);
  std::vector<int> labels;
  for (int i = 0; i < 4; ++i) labels.push_back(label(rng));
  const Tensor2<double> grad = cross_entropy(logits, labels).grad;
  return grad_check([&] { return cross_entropy(logits, labels).loss; },
                    {{"logits", &logits, &grad}});
}

GradCheckReport check_network(std::uint64_t seed, int n, int channels, int k,
                     bool segmentation) {
  std::mt19937_64 rng(seed);
  const auto geometry = random_geometry(n, k, {1.0, 0.25}, rng);
  NetworkConfig config;
  config.widths = {channels, 2 * channels};
  config.residual_blocks = {1, 1};
  config.taps_per_axis = k;
  config.head_width = channels;
  config.num_classes = 3;
  config.task = segmentation ? Task::Segmentation : Task::Classification;
  NptcNet<double> net(config);
  net.init(seed);
  for (auto& e : net.parameters().entries)
    if (e.value.rows() == 1) e.value = random_tensor(1, e.value.cols(), rng) * 0.1;
  Tensor2<double> x = random_tensor(n, 3, rng);
  const Tensor2<double> r = random_tensor(segmentation ? n : 1, 3, rng);
  net.forward(geometry, x);
  const Tensor2<double> dx = net.backward(r);
  auto targets = param_targets(net.parameters());
  targets.push_back({"input", &x, &dx});
  return grad_check([&] { return projected(net.forward(geometry, x), r); }, targets);
}

std::vector<GradCheckResult> check_all(std::uint64_t seed) {
  return {
      {"linear", check_linear(seed)},
      {"mlp", check_mlp(seed)},
      {"nptc_conv", check_conv(seed)},
      {"residual_block", check_residual_block(seed)},
      {"global_max_pool", check_max_pool(seed)},
      {"concat", check_concat(seed)},
      {"upsample_nn", check_upsample(seed)},
      {"cross_entropy", check_cross_entropy(seed)},
      {"network_classification", check_network(seed, 64, 8, 3, false)},
      {"network_segmentation", check_network(seed, 64, 8, 3, true)},
  };
}

}  // namespace nptc
