#include "nptc/frames.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "nptc/error.hpp"
#include "nptc/parallel.hpp"

namespace nptc {

namespace {

Vec3 canonical_sign(Vec3 v) {
  for (int a = 0; a < 3; ++a) {
    if (std::abs(v[a]) > 1e-12) return v[a] < 0.0 ? Vec3(-v) : v;
  }
  return v;
}

void check_k(std::size_t k, std::size_t n) {
  if (k < 4) throw ArgumentError("neighborhood size k must be at least 4");
  if (k > n)
    throw ArgumentError("k = " + std::to_string(k) + " exceeds cloud size " +
                        std::to_string(n));
}

// Any unit vector orthogonal to n.
Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 axis = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return (axis - axis.dot(n) * n).normalized();
}

}  // namespace

std::vector<LocalBasis> lpca_basis(const PointCloud& cloud,
                                   const NeighborIndex& index, std::size_t k) {
  check_k(k, cloud.size());
  std::vector<LocalBasis> out(cloud.size());
  parallel_for(0, cloud.size(), [&](std::size_t i) {
    const auto nbrs = index.k_nearest(cloud.points[i], k);
    Vec3 c = Vec3::Zero();
    for (const auto& nb : nbrs) c += cloud.points[nb.index];
    c /= static_cast<double>(k);
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : nbrs) {
      const Vec3 d = cloud.points[nb.index] - c;
      cov += d * d.transpose();
    }
    LocalBasis& basis = out[i];
    if (cov.cwiseAbs().maxCoeff() == 0.0) {
      basis.t1 = Vec3::UnitX();
      basis.t2 = Vec3::UnitY();
      basis.n = Vec3::UnitZ();
      basis.degenerate = true;
      return;
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    basis.n = canonical_sign(eig.eigenvectors().col(0));
    basis.t2 = canonical_sign(eig.eigenvectors().col(1));
    basis.t1 = canonical_sign(eig.eigenvectors().col(2));
  });
  return out;
}

std::vector<GradientEstimate> ls_gradient(const PointCloud& cloud,
                                          const NeighborIndex& index,
                                          const PointScalarField& rho,
                                          std::size_t k) {
  check_k(k, cloud.size());
  if (rho.size() != cloud.size())
    throw ArgumentError("scalar field length does not match the cloud");
  std::vector<GradientEstimate> out(cloud.size());
  parallel_for(0, cloud.size(), [&](std::size_t i) {
    const Vec3& x = cloud.points[i];
    const auto nbrs = index.k_nearest(x, k);
    Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
    Vec3 atb = Vec3::Zero();
    double mean_len = 0.0;
    std::size_t used = 0;
    for (const auto& nb : nbrs) {
      if (used == k - 1) break;
      if (nb.index == i) continue;
      if (rho.out_of_band[nb.index])
        throw ArgumentError("neighbor " + std::to_string(nb.index) +
                            " of point " + std::to_string(i) +
                            " has an out-of-band distance value");
      const Vec3 d = cloud.points[nb.index] - x;
      const double b = rho.value[nb.index] - rho.value[i];
      ata += d * d.transpose();
      atb += b * d;
      mean_len += d.norm();
      ++used;
    }
    mean_len /= static_cast<double>(used);
    const double lambda = 1e-8 * mean_len * mean_len;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(
        ata, Eigen::EigenvaluesOnly);
    const auto ev = eig.eigenvalues();
    out[i].rank_deficient = ev(0) <= 1e-9 * std::max(ev(2), 1e-300);
    if (lambda == 0.0) return;  // all neighbors coincide with x
    out[i].g = (ata + lambda * Eigen::Matrix3d::Identity()).ldlt().solve(atb);
  });
  return out;
}

FrameField build_frame_field(const PointCloud& cloud, const NeighborIndex& index,
                             const PointScalarField& rho, std::size_t k,
                             NormalPolicy policy,
                             std::optional<std::uint32_t> seed_point) {
  if (policy == NormalPolicy::UseInput && !cloud.has_normals())
    throw ArgumentError("normal policy 'input' needs a cloud with normals");
  if (seed_point && *seed_point >= cloud.size())
    throw ArgumentError("seed point outside the cloud");
  const auto basis = lpca_basis(cloud, index, k);
  const auto grad = ls_gradient(cloud, index, rho, k);

  Vec3 centroid = Vec3::Zero();
  for (const Vec3& p : cloud.points) centroid += p;
  centroid /= static_cast<double>(cloud.size());

  FrameField field;
  field.seed_point = seed_point;
  field.frames.resize(cloud.size());
  parallel_for(0, cloud.size(), [&](std::size_t i) {
    TangentFrame& f = field.frames[i];
    if (policy == NormalPolicy::UseInput) {
      f.n = (*cloud.normals)[i];
    } else {
      f.n = basis[i].n;
      // Tangential offsets (|dot| at roundoff level) keep the LPCA sign.
      const double side = f.n.dot(cloud.points[i] - centroid);
      if (side < -1e-12) f.n = -f.n;
    }
    const Vec3& g = grad[i].g;
    const Vec3 tangential = g - g.dot(f.n) * f.n;
    const bool is_seed = seed_point && *seed_point == i;
    if (is_seed || basis[i].degenerate ||
        tangential.norm() < kSingularityThreshold) {
      f.singular = true;
      Vec3 fallback = basis[i].t1 - basis[i].t1.dot(f.n) * f.n;
      f.u1 = fallback.norm() > 1e-6 ? fallback.normalized()
                                    : any_perpendicular(f.n);
    } else {
      f.u1 = tangential.normalized();
    }
    f.u2 = f.u1.cross(f.n).normalized();
  });
  for (const auto& f : field.frames) field.singular_count += f.singular;
  return field;
}

}  // namespace nptc
