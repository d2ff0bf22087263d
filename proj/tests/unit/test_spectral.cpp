#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/spectral.hpp"

using namespace sagdmix;

namespace {

Eigen::MatrixXd random_stable(int n, std::mt19937_64& gen, double target) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = nd(gen);
  return m * (target / spectral_radius(m));
}

// Brute-force outer radius from a dense polar scan; an independent lower estimate.
double scan_radius(const Eigen::MatrixXd& m, double eps, int angles, int radii, double r_max) {
  double best = 0.0;
  for (int a = 0; a < angles; ++a) {
    const double th = 2 * M_PI * a / angles;
    for (int r = radii; r >= 1; --r) {
      const double rad = r_max * r / radii;
      if (rad <= best) break;
      if (resolvent_sigma_min(m, std::polar(rad, th)) <= eps) {
        best = rad;
        break;
      }
    }
  }
  return best;
}

}  // namespace

TEST(SpectralRadius, Examples) {
  Eigen::Matrix2d rot;
  rot << 0, 1, -1, 0;
  EXPECT_NEAR(spectral_radius(rot), 1.0, 1e-14);
  EXPECT_NEAR(spectral_radius(Eigen::Vector2d(0.3, 0.9).asDiagonal().toDenseMatrix()), 0.9, 1e-15);
  // Companion matrix of z^2 - (1 + b - g l) z + b with complex roots: |z| = sqrt(b).
  const double b = 0.9, g = 0.1, l = 1.0;
  Eigen::Matrix2d comp;
  comp << 1 + b - g * l, -b, 1, 0;
  EXPECT_NEAR(spectral_radius(comp), std::sqrt(b), 1e-12);
  EXPECT_THROW(spectral_radius(Eigen::MatrixXd(2, 3)), ValidationError);
}

TEST(Pseudospectrum, NormalMatrixIsRhoPlusEps) {
  Eigen::MatrixXd m = Eigen::Vector2d(0.5, 0.9).asDiagonal();
  EXPECT_NEAR(pseudospectral_radius(m, 0.05), 0.95, 1e-9);
  // Rotated normal matrix with complex spectrum.
  Eigen::Matrix2d rot;
  rot << 0.6, -0.6, 0.6, 0.6;
  EXPECT_NEAR(pseudospectral_radius(rot, 0.01), std::sqrt(0.72) + 0.01, 1e-6);
}

TEST(Pseudospectrum, JordanBlockInflates) {
  Eigen::Matrix2d j;
  j << 0.9, 1, 0, 0.9;
  const double r = pseudospectral_radius(j, 0.01);
  EXPECT_GT(r, 0.91 + 1e-3);
  // For a 2x2 Jordan block the eps-pseudospectrum is the disc of radius
  // sqrt(eps (1 + eps)) about 0.9 (sigma_min(J - zI) = eps solved in |z - 0.9|).
  EXPECT_NEAR(r, 0.9 + std::sqrt(0.01 * 1.01), 1e-6);
  EXPECT_THROW(pseudospectral_radius(j, 0.0), ValidationError);
}

TEST(Pseudospectrum, MonotoneAndAboveRho) {
  std::mt19937_64 gen(3);
  for (int t = 0; t < 10; ++t) {
    Eigen::MatrixXd m = random_stable(5, gen, 0.8);
    double prev = spectral_radius(m);
    for (double eps : {1e-3, 1e-2, 5e-2, 0.1}) {
      const double r = pseudospectral_radius(m, eps);
      EXPECT_GE(r, spectral_radius(m) + eps - 1e-9);
      EXPECT_GE(r, prev - 1e-9);
      prev = r;
    }
  }
}

TEST(Pseudospectrum, AgreesWithBruteForceScan) {
  std::mt19937_64 gen(5);
  for (int t = 0; t < 2; ++t) {
    Eigen::MatrixXd m = random_stable(3, gen, 0.7);
    const double eps = 0.05;
    const double r = pseudospectral_radius(m, eps);
    const double scan = scan_radius(m, eps, 240, 2000, 2.0);
    EXPECT_GE(r, scan - 1e-9);
    EXPECT_LE(r, scan + 2.0 / 2000 + 1e-3);
  }
}

TEST(PowerNorm, Examples) {
  Eigen::MatrixXd diag = Eigen::Vector3d(0.2, 0.5, 0.8).asDiagonal();
  auto c = power_norm_bound_check(diag, 0.1, 20);
  EXPECT_TRUE(c.ok);
  EXPECT_NEAR(c.lhs, std::pow(0.8, 20), 1e-14);
  Eigen::Matrix2d j;
  j << 0.9, 1, 0, 0.9;
  EXPECT_TRUE(power_norm_bound_check(j, 0.05, 50).ok);
  std::mt19937_64 gen(8);
  for (int t = 0; t < 100; ++t) {
    auto r = power_norm_bound_check(random_stable(6, gen, 0.9), 0.05, 1 + t % 40, {64, 10});
    EXPECT_TRUE(r.ok) << r.lhs << " > " << r.rhs;
  }
  Eigen::MatrixXd big = 1e3 * Eigen::MatrixXd::Identity(2, 2);
  auto s = power_norm_bound_check(big, 0.1, 200);
  EXPECT_TRUE(s.saturated);
}

TEST(Perturbation, Examples) {
  std::mt19937_64 gen(13);
  Eigen::MatrixXd a = random_stable(4, gen, 0.8);
  auto zero = perturbation_bound_check(a, Eigen::MatrixXd::Zero(4, 4), 0.02);
  EXPECT_TRUE(zero.ok());
  EXPECT_NEAR(zero.robust_lhs, zero.robust_rhs, 1e-12);

  Eigen::MatrixXd normal = Eigen::Vector3d(0.1, -0.4, 0.7).asDiagonal();
  Eigen::MatrixXd small = 1e-3 * Eigen::MatrixXd::Ones(3, 3);
  auto n = perturbation_bound_check(normal, small, 0.05);
  EXPECT_TRUE(n.ok());
  EXPECT_NEAR(n.kappa, 1.0, 1e-12);

  // Diagonalizable with an ill-conditioned eigenbasis.
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(4, 4);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) v(i, j) = 3.0 * nd(gen);
    Eigen::MatrixXd d = Eigen::Vector4d(0.1, 0.4, -0.6, 0.8).asDiagonal();
    Eigen::MatrixXd amat = v * d * v.inverse();
    Eigen::MatrixXd pert = 0.01 * random_stable(4, gen, 1.0);
    auto r = perturbation_bound_check(amat, pert, 0.01);
    EXPECT_TRUE(r.ok()) << r.bf_lhs << " vs " << r.bf_rhs << ", " << r.robust_lhs << " vs " << r.robust_rhs;
    EXPECT_GT(r.kappa, 1.5);
  }
}

TEST(JBlocks, EntriesAndNoiselessCase) {
  // Rademacher coordinate: k = sigma^2 cancels the noise terms.
  auto m = make_uniform_rademacher_model(0.05, RademacherScale::unit);
  Theta th{2.0, 0.9, 0.05};
  auto j = build_J_blocks(m, th)[0];
  const double d1 = 1.9 - 0.05 * 3.0 * 1.0, d2 = 2 * 0.05 * 1.0 - 0.9;
  Eigen::Matrix3d expect;
  expect << d1 * d1, 2 * d1, 1, d1 * d2, d2, 0, d2 * d2, 0, 0;
  EXPECT_TRUE(j.isApprox(expect, 1e-15));
}

TEST(JBlocks, PermutationSimilarity) {
  auto m = rotate_model(make_gaussian_model(Eigen::Vector3d(0.05, 0.4, 1.0)),
                        Eigen::Matrix3d(Eigen::AngleAxisd(0.8, Eigen::Vector3d(1, 1, 0).normalized())));
  Theta th{2.0, 0.93, 0.1};
  // Cbar: C with the off-diagonal entries of every d x d block removed.
  auto c = build_contraction_matrix(m, th);
  Eigen::MatrixXd cbar = c.mat;
  for (int r = 0; r < 9; ++r)
    for (int q = 0; q < 9; ++q)
      if (r % 3 != q % 3) cbar(r, q) = 0.0;
  EXPECT_TRUE(cbar.isApprox(jblock_diagonal_part(m, th), 1e-14));

  auto p = jblock_permutation(3);
  Eigen::MatrixXd bd = p.transpose() * cbar * p;
  auto blocks = build_J_blocks(m, th);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(bd.block(3 * i, 3 * i, 3, 3).isApprox(blocks[i], 1e-14));
  for (int r = 0; r < 9; ++r)
    for (int q = 0; q < 9; ++q)
      if (r / 3 != q / 3) EXPECT_EQ(bd(r, q), 0.0);

  // Eigenvalue multisets agree.
  std::vector<std::complex<double>> lhs, rhs;
  auto ev = eigenvalues(cbar);
  for (int i = 0; i < ev.size(); ++i) lhs.push_back(ev(i));
  for (const auto& b : blocks) {
    auto e = eigenvalues(b);
    for (int i = 0; i < 3; ++i) rhs.push_back(e(i));
  }
  auto less = [](auto x, auto y) { return x.real() < y.real() || (x.real() == y.real() && x.imag() < y.imag()); };
  std::sort(lhs.begin(), lhs.end(), less);
  std::sort(rhs.begin(), rhs.end(), less);
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_LT(std::abs(lhs[i] - rhs[i]), 1e-9);
}

TEST(JBlocks, MixingBoundOneDimension) {
  auto m = make_gaussian_model(Eigen::VectorXd::Constant(1, 0.3));
  Theta th{1.0, 0.5, 0.2};
  auto rep = jblock_mixing_bound(m, th, 0.01);
  EXPECT_EQ(rep.perturbation_term, 0.0);
  EXPECT_NEAR(rep.rho_eps, spectral_radius(build_J_blocks(m, th)[0]) + 0.01, 1e-15);
}

TEST(JBlocks, ExampleEightCoordinates) {
  for (double mu : {0.005, 0.01, 0.02}) {
    auto m = make_gaussian_model(Eigen::Vector2d(mu, 1.0));
    Theta th{2.0, 1.0 - std::sqrt(mu / 10.0), 0.1};
    auto rep = jblock_mixing_bound(m, th, 0.05 * std::sqrt(mu));
    EXPECT_LE(rep.j_radii(0), 1.0 - std::sqrt(mu) / std::sqrt(10.0)) << mu;
    EXPECT_LE(rep.j_radii(1), 0.966) << mu;
    EXPECT_LE(rep.rho_eps, 1.0 - std::sqrt(mu) / 5.0) << mu;
  }
}
