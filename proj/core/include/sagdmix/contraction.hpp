#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "sagdmix/chains.hpp"
#include "sagdmix/moments.hpp"
#include "sagdmix/spectral.hpp"

namespace sagdmix {

/// The 3d x 3d linear map on eigenvalue triples
///
///   C = [[D1^2 + (1+a)^2 K,        2 D1, I],
///        [D1 D2 - a (1+a) K,       D2,   0],
///        [D2^2 + a^2 K,            0,    0]]
///
/// with D1 = (1+b) I - g (1+a) diag(sigma), D2 = a g diag(sigma) - b I and
/// K = g^2 (diag(k - 2 sigma^2) + sigma sigma^T).
struct ContractionMatrix {
  int d = 0;
  Eigen::MatrixXd mat;
  Eigen::VectorXd d1;  ///< diagonal of D1
  Eigen::VectorXd d2;  ///< diagonal of D2
  Eigen::VectorXd k_diag;    ///< g^2 (k - 2 sigma^2), diagonal part of K
  Eigen::VectorXd k_rank1;   ///< g sigma, so K = diag(k_diag) + k_rank1 k_rank1^T
  Theta theta;
  std::string model_id;

  Eigen::MatrixXd K() const;
  /// d x d block (row, col), both in 0..2.
  Eigen::MatrixXd block(int row, int col) const;
};

ContractionMatrix build_contraction_matrix(const MomentSpec& model, const Theta& theta);

/// d x d SGD second-moment map (I - g diag(sigma))^2 + K, built independently
/// of the SAGD assembly. Equals C's top-left block when alpha = beta = 0.
Eigen::MatrixXd sgd_contraction_matrix(const MomentSpec& model, double gamma);

/// Initial Gram matrix in eigenvalue-triple form.
enum class InitialGram {
  all_ones,  ///< a_0 = 1: M_0 = [[I, I], [I, I]], the w_curr = w_prev start
  identity,  ///< a_0 = (1, 0, 1): M_0 = I_{2d}
};

struct SecondMomentState {
  Eigen::VectorXd a;  ///< (lambda1, lambda2, lambda3), each of length d
  std::size_t n = 0;
  InitialGram init = InitialGram::all_ones;

  int dim() const { return static_cast<int>(a.size() / 3); }
  Eigen::VectorXd lambda(int which) const { return a.segment(which * dim(), dim()); }
};

SecondMomentState initial_second_moment(int d, InitialGram init = InitialGram::all_ones);

/// a_n = C^n a_0 by repeated mat-vec. Throws DivergenceError when an entry
/// leaves the finite range.
SecondMomentState evolve_second_moment(const ContractionMatrix& c, std::size_t n,
                                       InitialGram init = InitialGram::all_ones);
SecondMomentState evolve_second_moment(const ContractionMatrix& c, const SecondMomentState& from, std::size_t steps);

/// [[U diag(l1) U^T, U diag(l2) U^T], [U diag(l2) U^T, U diag(l3) U^T]].
///
/// Equals E[B_n^T M_0 B_n] with B_n = A_n ... A_1 and M_0 the reconstruction
/// of a_0 (so a_0 = (1, 0, 1) gives E[B_n^T B_n]); no index shift between a_n
/// and chain step n. Throws NumericError if lambda1 or lambda3 has an entry
/// below -1e-9 (relative to ||a||_inf).
Eigen::MatrixXd reconstruct_Mn(const MomentSpec& model, const SecondMomentState& state);

struct MonteCarloGram {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd std_error;  ///< per-entry standard error of the mean
  std::size_t trials = 0;
};

/// Trials per deterministic reduction chunk.
inline constexpr std::size_t kMonteCarloChunk = 1024;

/// Average of B_n^T M_0 B_n over independent input sequences, using dense
/// 2d x 2d products (no rank-one shortcuts). Trial t uses Rng::stream(seed, t).
/// M_0 defaults to the identity.
MonteCarloGram mc_estimate_Mn(const MomentSpec& model, const Theta& theta, std::size_t n, std::size_t trials,
                              std::uint64_t seed, const std::optional<Eigen::MatrixXd>& initial_gram = std::nullopt);

/// 18 d^{3/2} c0 rho_eps(C)^{n+1} / eps with c0 = E||u_0^(1) - u_0^(0)||^2.
double w2_upper_bound(const ContractionMatrix& c, double eps, std::size_t n, double c0,
                      const PseudospectrumOptions& opts = {});

/// Same expression with the stationary-start constant
/// c' = 18 d^{3/2} E||u_0 - E u||, a first moment.
double w2_stationary_bound(const ContractionMatrix& c, double eps, std::size_t n, double first_moment,
                           const PseudospectrumOptions& opts = {});

struct QuadraticFormBounds {
  double value = 0.0;        ///< [v; v]^T M_n [v; v]
  double stated_lower = 0.0; ///< ||a_n||_inf ||v||^2
  double tight_lower = 0.0;  ///< min_i (l1 + 2 l2 + l3)_i ||v||^2
  double upper = 0.0;        ///< 6 sqrt(d) ||a_n|| ||v||^2
};

QuadraticFormBounds quadratic_form_bounds(const MomentSpec& model, const SecondMomentState& state,
                                          const Eigen::VectorXd& v);

}  // namespace sagdmix
