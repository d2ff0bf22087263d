#pragma once

#include <complex>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sagdmix/chains.hpp"
#include "sagdmix/moments.hpp"

namespace sagdmix {

enum class SpectralMethod { exact_eigen, grid_resolvent, jblock_bound };

std::string_view to_string(SpectralMethod method);

struct SpectralReport {
  double rho = 0.0;      ///< spectral radius (of the J blocks for jblock_bound)
  double rho_eps = 0.0;  ///< pseudospectral radius or its upper bound
  double eps = 0.0;
  SpectralMethod method = SpectralMethod::exact_eigen;
  Eigen::VectorXd j_radii;         ///< rho(J_i), i = 1..d, when applicable
  double perturbation_term = 0.0;  ///< 3 (1+alpha)^2 gamma^2 ||diag(sigma)^2 - sigma sigma^T||
};

/// Eigenvalues of a real square matrix. Throws NumericError on solver failure.
Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m);

/// max |lambda|. Throws ValidationError for non-square or non-finite input.
double spectral_radius(const Eigen::MatrixXd& m);

/// sigma_min(M - z I).
double resolvent_sigma_min(const Eigen::MatrixXd& m, std::complex<double> z);

struct PseudospectrumOptions {
  int angles = 256;          ///< uniform rays in addition to one ray per eigenvalue argument
  int refine_iters = 30;     ///< golden-section steps around the best ray
  double radial_tol = 1e-12; ///< relative tolerance of the boundary radius on a ray
};

/// sup{|z| : sigma_min(M - z I) <= eps}, searched along rays from the origin.
///
/// Each ray is marched inward from ||M||_2 + eps using the 1-Lipschitz bound
/// on sigma_min (so no boundary crossing is skipped), then bisected. Rays
/// through every eigenvalue come first, so the result is at least rho + eps;
/// the best uniform ray is then refined in angle. Accuracy is limited by the
/// angular grid. Throws ValidationError if eps <= 0.
double pseudospectral_radius(const Eigen::MatrixXd& m, double eps, const PseudospectrumOptions& opts = {});

struct ResolventSample {
  double re;
  double im;
  double sigma_min;
};

/// sigma_min(M - zI) on an nre x nim grid over [re_lo, re_hi] x [im_lo, im_hi], row-major in im.
std::vector<ResolventSample> pseudospectrum_grid(const Eigen::MatrixXd& m, double re_lo, double re_hi, double im_lo,
                                                 double im_hi, int nre, int nim);

/// Per-coordinate 3x3 blocks
///   [[D1_i^2 + (1+a)^2 g^2 (k_i - s_i^2), 2 D1_i, 1],
///    [D1_i D2_i - a (1+a) g^2 (k_i - s_i^2), D2_i, 0],
///    [D2_i^2 + g^2 a^2 (k_i - s_i^2), 0, 0]].
std::vector<Eigen::Matrix3d> build_J_blocks(const MomentSpec& model, const Theta& theta);

/// max_i rho(J_i).
double jblock_radius(const MomentSpec& model, const Theta& theta);

/// The 3d x 3d matrix whose blocks are diag(J_.(r, c)); permuting it by
/// jblock_permutation gives blockdiag(J_1, ..., J_d).
Eigen::MatrixXd jblock_diagonal_part(const MomentSpec& model, const Theta& theta);

/// P with P^T Cbar P = blockdiag(J_1, ..., J_d): index b d + i maps to 3 i + b.
Eigen::PermutationMatrix<Eigen::Dynamic> jblock_permutation(int d);

/// 3 (1+alpha)^2 gamma^2 ||diag(sigma)^2 - sigma sigma^T||_2.
double jblock_perturbation_term(const MomentSpec& model, const Theta& theta);

/// max_i rho(J_i) + eps + perturbation term. Throws ValidationError if eps <= 0.
SpectralReport jblock_mixing_bound(const MomentSpec& model, const Theta& theta, double eps);

/// Exact rho and grid rho_eps of an arbitrary matrix.
SpectralReport analyze_matrix(const Eigen::MatrixXd& m, double eps, const PseudospectrumOptions& opts = {});

struct PowerNormCheck {
  double lhs = 0.0;  ///< ||M^n||_2
  double rhs = 0.0;  ///< rho_eps^{n+1} / eps
  bool ok = false;
  bool saturated = false;  ///< either side overflowed
};

PowerNormCheck power_norm_bound_check(const Eigen::MatrixXd& m, double eps, int n,
                                      const PseudospectrumOptions& opts = {});

struct PerturbationCheck {
  double robust_lhs = 0.0;  ///< rho_eps(A + M)
  double robust_rhs = 0.0;  ///< rho_{eps + ||M||}(A)
  double bf_lhs = 0.0;      ///< rho_eps(A)
  double bf_rhs = 0.0;      ///< rho(A) + kappa eps, kappa = cond_2 of the eigenvector matrix
  double kappa = 0.0;       ///< infinite for defective A
  bool robust_ok = false;
  bool bauer_fike_ok = false;
  bool ok() const { return robust_ok && bauer_fike_ok; }
};

/// Checks both inequalities with 1e-3 slack on the right-hand sides.
PerturbationCheck perturbation_bound_check(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m, double eps,
                                           const PseudospectrumOptions& opts = {});

}  // namespace sagdmix
