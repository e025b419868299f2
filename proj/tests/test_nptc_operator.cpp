#include <numeric>

#include <Eigen/Geometry>

#include "doctest.h"
#include "nptc/error.hpp"
#include "nptc/nptc_operator.hpp"
#include "nptc/parallel.hpp"
#include "nptc/pipeline.hpp"
#include "oracles.hpp"

using namespace nptc;
using Eigen::Index;
using Indices = std::vector<std::uint32_t>;

namespace {

std::vector<std::uint32_t> all_indices(std::size_t n) {
  std::vector<std::uint32_t> out(n);
  std::iota(out.begin(), out.end(), 0u);
  return out;
}

std::vector<TangentFrame> plane_frames(std::size_t n) {
  TangentFrame f;
  f.u1 = Vec3::UnitX();
  f.u2 = -Vec3::UnitY();
  f.n = Vec3::UnitZ();
  return std::vector<TangentFrame>(n, f);
}

Tensor2<double> random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor2<double> m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

double inner(const Tensor2<double>& a, const Tensor2<double>& b) { return (a.array() * b.array()).sum(); }

KernelSpec kernel(int k, double delta) {
  KernelSpec spec;
  spec.taps_per_axis = k;
  spec.delta = delta;
  return spec;
}

// Random operator over a random cloud with random frames.
NptcOperator random_operator(std::size_t n, int k, std::mt19937_64& rng) {
  PointCloud cloud;
  cloud.points = testutil::random_points(n, rng);
  std::vector<TangentFrame> frames(n);
  std::normal_distribution<double> g;
  for (auto& f : frames) {
    f.n = Vec3(g(rng), g(rng), g(rng)).normalized();
    f.u1 = f.n.unitOrthogonal();
    f.u2 = f.u1.cross(f.n);
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < n; i += 2) out.push_back(i);
  return build_operator(NeighborIndex(cloud.points), frames, out, kernel(k, 0.1));
}

}  // namespace

TEST_CASE("grid plane taps are the eight neighbours and the point") {
  const int n = 12;
  const double step = 0.05;
  const auto cloud = testutil::grid_plane(n, 0.2, step, 0.5);
  const auto op = build_operator(NeighborIndex(cloud.points), plane_frames(cloud.size()),
                                 all_indices(cloud.size()), kernel(3, step));
  REQUIRE(op.taps.size() == cloud.size() * 9);
  for (int a = 1; a < n - 1; ++a)
    for (int b = 1; b < n - 1; ++b) {
      const std::size_t row = static_cast<std::size_t>(a * n + b);
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          // u2 = -e2, so q walks down the second grid index.
          CHECK(op.tap(row, p * 3 + q) == static_cast<std::uint32_t>((a + p - 1) * n + (b - (q - 1))));
    }
}

TEST_CASE("K = 1 gathers each output point itself") {
  std::mt19937_64 rng(3);
  PointCloud cloud;
  cloud.points = testutil::random_points(100, rng);
  std::vector<std::uint32_t> out = {5, 17, 99, 0, 42};
  const auto op = build_operator(NeighborIndex(cloud.points), plane_frames(100), out, kernel(1, 0.3));
  CHECK(op.out_indices == out);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(op.tap(i, 0) == out[i]);
}

TEST_CASE("boundary taps snap to the closest point") {
  const int n = 6;
  const auto cloud = testutil::grid_plane(n, 0.2, 0.05, 0.5);
  const auto op = build_operator(NeighborIndex(cloud.points), plane_frames(cloud.size()), Indices{0u},
                                 kernel(3, 0.05));
  // Corner (0, 0): taps toward negative a clamp onto row a = 0, taps with
  // b + 1 stay inside.
  CHECK(op.tap(0, 0 * 3 + 0) == 1u);  // (a-1, b+1) -> (0, 1)
  CHECK(op.tap(0, 0 * 3 + 1) == 0u);  // (a-1, b) -> (0, 0)
  CHECK(op.tap(0, 1 * 3 + 1) == 0u);
  CHECK(op.tap(0, 2 * 3 + 2) == static_cast<std::uint32_t>(1 * n + 0));  // (a+1, b-1) -> (1, 0)
  for (auto t : op.taps) CHECK(t < cloud.size());
}

TEST_CASE("empty output set is rejected") {
  const auto cloud = testutil::grid_plane(3, 0.2, 0.05, 0.5);
  CHECK_THROWS_AS(build_operator(NeighborIndex(cloud.points), plane_frames(9), Indices{}, kernel(3, 0.05)),
                  ArgumentError);
}

TEST_CASE("center-tap identity, zero weights and box filter") {
  const int n = 10;
  const double step = 0.04;
  const auto cloud = testutil::grid_plane(n, 0.2, step, 0.5);
  const auto op = build_operator(NeighborIndex(cloud.points), plane_frames(cloud.size()),
                                 all_indices(cloud.size()), kernel(3, step));
  std::mt19937_64 rng(5);
  const auto f = random_matrix(static_cast<Index>(cloud.size()), 3, rng);

  Tensor2<double> identity = Tensor2<double>::Zero(27, 3);
  identity.block(4 * 3, 0, 3, 3).setIdentity();
  CHECK((apply(op, identity, f) - f).cwiseAbs().maxCoeff() == 0.0);

  CHECK(apply(op, Tensor2<double>(Tensor2<double>::Zero(27, 2)), f).cwiseAbs().maxCoeff() == 0.0);

  Tensor2<double> box = Tensor2<double>::Zero(27, 3);
  for (int pq = 0; pq < 9; ++pq) box.block(pq * 3, 0, 3, 3) = Tensor2<double>::Identity(3, 3) / 9.0;
  const auto out = apply(op, box, f);
  for (int a = 1; a < n - 1; ++a)
    for (int b = 1; b < n - 1; ++b)
      for (int c = 0; c < 3; ++c) {
        double sum = 0;
        for (int da = -1; da <= 1; ++da)
          for (int db = -1; db <= 1; ++db) sum += f((a + da) * n + b + db, c);
        CHECK(std::abs(out(a * n + b, c) - sum / 9.0) <= 1e-6);
      }
}

TEST_CASE("planar reduction: NPTC equals dense 2-D convolution on a grid plane") {
  const int n = 24;
  const double step = 0.02;
  const auto cloud = testutil::grid_plane(n, 0.26, step, 0.5);
  PipelineConfig config;
  config.resolution = 50;
  config.seed = SeedPolicy::plane_edge(0, false);
  const auto frames = compute_frames(cloud, NeighborIndex(cloud.points), config).frames;
  std::mt19937_64 rng(17);
  for (int k : {3, 5}) {
    const auto op = build_operator(NeighborIndex(cloud.points), frames.frames,
                                   all_indices(cloud.size()), kernel(k, step));
    const int cin = 2, cout = 3, c = (k - 1) / 2;
    const auto w = random_matrix(k * k * cin, cout, rng);
    const auto f = random_matrix(static_cast<Index>(cloud.size()), cin, rng);
    const auto out = apply(op, w, f);
    std::vector<std::vector<std::vector<double>>> img(n, std::vector<std::vector<double>>(n, std::vector<double>(cin)));
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < cin; ++ci) img[a][b][ci] = f(a * n + b, ci);
    // Frames need a few rows of margin for the gradient estimate at the edge.
    const int margin = c + 3;
    double worst = 0;
    for (int a = margin; a < n - margin; ++a)
      for (int b = margin; b < n - margin; ++b)
        for (int co = 0; co < cout; ++co)
          worst = std::max(worst, std::abs(out(a * n + b, co) - oracle::conv2d_at(img, w, k, a, b, co, 1, -1)));
    MESSAGE("K=" << k << " worst difference " << worst);
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("channel mismatches raise ShapeError") {
  std::mt19937_64 rng(1);
  const auto op = random_operator(20, 3, rng);
  const auto f = random_matrix(20, 2, rng);
  CHECK_THROWS_AS(apply(op, random_matrix(9 * 3, 4, rng), f), ShapeError);
  CHECK_THROWS_AS(apply(op, random_matrix(9 * 2, 4, rng), random_matrix(19, 2, rng)), ShapeError);
  const auto w = random_matrix(9 * 2, 4, rng);
  CHECK_THROWS_AS(apply_adjoint(op, w, f, random_matrix(static_cast<Index>(op.out_size()), 3, rng)), ShapeError);
  CHECK_THROWS_AS(apply_adjoint(op, w, f, random_matrix(static_cast<Index>(op.out_size()) + 1, 4, rng)), ShapeError);
}

TEST_CASE("adjoint identity in features and weights") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    std::uniform_int_distribution<int> size(2, 64), chan(1, 4);
    const int n = size(rng), k = trial % 2 ? 3 : 1, cin = chan(rng), cout = chan(rng);
    const auto op = random_operator(static_cast<std::size_t>(n), k, rng);
    const auto w = random_matrix(k * k * cin, cout, rng);
    const auto f = random_matrix(n, cin, rng);
    const auto g = random_matrix(static_cast<Index>(op.out_size()), cout, rng);
    const auto adj = apply_adjoint(op, w, f, g);
    const double lhs = inner(apply(op, w, f), g);
    CHECK(std::abs(lhs - inner(f, adj.features_grad)) <= 1e-10);
    CHECK(std::abs(lhs - inner(w, adj.weights_grad)) <= 1e-10);
  }
}

TEST_CASE("adjoint of zero gradient is zero; single point K=1 is a matrix product") {
  std::mt19937_64 rng(2);
  const auto op = random_operator(10, 3, rng);
  const auto w = random_matrix(9 * 2, 3, rng);
  const auto f = random_matrix(10, 2, rng);
  const auto z = apply_adjoint(op, w, f, Tensor2<double>(Tensor2<double>::Zero(static_cast<Index>(op.out_size()), 3)));
  CHECK(z.features_grad.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.weights_grad.cwiseAbs().maxCoeff() == 0.0);

  PointCloud one;
  one.points = {Vec3(0.5, 0.5, 0.5)};
  const auto op1 = build_operator(NeighborIndex(one.points), plane_frames(1), Indices{0u}, kernel(1, 0.1));
  const auto w1 = random_matrix(3, 2, rng);
  const auto f1 = random_matrix(1, 3, rng);
  const auto g1 = random_matrix(1, 2, rng);
  const auto adj = apply_adjoint(op1, w1, f1, g1);
  CHECK((adj.features_grad - g1 * w1.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((adj.weights_grad - f1.transpose() * g1).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("float instantiation agrees with double") {
  std::mt19937_64 rng(6);
  const auto op = random_operator(40, 3, rng);
  const auto w = random_matrix(18, 3, rng);
  const auto f = random_matrix(40, 2, rng);
  const Tensor2<float> out = apply<float>(op, w.cast<float>(), f.cast<float>());
  CHECK((out.cast<double>() - apply(op, w, f)).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("operator construction is deterministic across thread counts") {
  std::mt19937_64 a(77), b(77);
  const auto x = random_operator(300, 5, a);
  set_thread_count(4);
  const auto y = random_operator(300, 5, b);
  set_thread_count(1);
  CHECK(x.taps == y.taps);
  CHECK(x.out_indices == y.out_indices);
}

TEST_CASE("operator cache round trip and stale detection") {
  std::mt19937_64 rng(8);
  const auto op = random_operator(50, 3, rng);
  testutil::TempDir dir("op");
  const auto path = (dir / "op.bin").string();
  save_operator(op, path, 0xabcdef);
  std::uint64_t upstream = 0;
  const auto back = load_operator(path, &upstream);
  CHECK(upstream == 0xabcdefu);
  CHECK(back.input_size == op.input_size);
  CHECK(back.taps_per_axis == op.taps_per_axis);
  CHECK(back.delta == op.delta);
  CHECK(back.out_indices == op.out_indices);
  CHECK(back.taps == op.taps);

  const auto bytes = testutil::read_text(path);
  CHECK(bytes.substr(0, 4) == "NPTC");
  testutil::write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_operator((dir / "short.bin").string()), ParseError);
  CHECK_THROWS_AS(load_operator((dir / "missing.bin").string()), CacheMiss);
}

TEST_CASE("auto spacing is the mean distance to the eighth neighbour") {
  const auto cloud = testutil::grid_plane(20, 0.1, 0.03, 0.5);
  const NeighborIndex index(cloud.points);
  double sum = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto order = oracle::knn(cloud.points, cloud.points[i], 9);
    // order[0] is the point itself.
    sum += (cloud.points[order[8]] - cloud.points[i]).norm();
  }
  CHECK(mean_neighbor_spacing(index) == doctest::Approx(sum / cloud.size()).epsilon(1e-12));
}
