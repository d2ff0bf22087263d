#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sagdmix/rng.hpp"

namespace sagdmix {

enum class SamplerKind { gaussian, uniform, two_point, three_point };

std::string_view to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(std::string_view name);

/// Symmetric scalar law with closed-form second and fourth moments.
///
/// Parameters by kind:
///   gaussian     variance s                      E v^2 = s,        E v^4 = 3 s^2
///   uniform      half-width h on [-h, h]         E v^2 = h^2 / 3,  E v^4 = h^4 / 5
///   two_point    magnitude a, v = +-a            E v^2 = a^2,      E v^4 = a^4
///   three_point  magnitude a, mass p on {+-a}    E v^2 = p a^2,    E v^4 = p a^4
class ScalarSampler {
 public:
  static ScalarSampler gaussian(double variance);
  static ScalarSampler uniform(double half_width);
  static ScalarSampler two_point(double magnitude);
  static ScalarSampler three_point(double magnitude, double mass);

  /// Builds from a kind name and its named parameters (the model-file form).
  static ScalarSampler from_params(std::string_view kind, const std::vector<std::pair<std::string, double>>& params);

  SamplerKind kind() const { return kind_; }
  double second_moment() const;
  double fourth_moment() const;
  double draw(Rng& rng) const;
  std::vector<std::pair<std::string, double>> params() const;

  friend bool operator==(const ScalarSampler&, const ScalarSampler&) = default;

 private:
  ScalarSampler(SamplerKind kind, double a, double b) : kind_(kind), a_(a), b_(b) {}

  SamplerKind kind_;
  double a_;
  double b_;
};

/// Input distribution x = U v with independent symmetric coordinates v_i.
///
/// Columns of `basis` are covariance eigenvectors, so Sigma = U diag(sigma) U^T.
/// Coordinates are kept sorted by ascending sigma; mu() and L() are the
/// endpoints. Immutable after construction.
class MomentSpec {
 public:
  /// Moments read from the sampler declarations; coordinates (and basis
  /// columns) are permuted so that sigma is ascending.
  static MomentSpec from_samplers(Eigen::MatrixXd basis, std::vector<ScalarSampler> samplers, std::string id);

  /// Moment-only model without samplers (empirical data). sample_input throws.
  static MomentSpec from_moments(Eigen::MatrixXd basis, Eigen::VectorXd sigma, Eigen::VectorXd kurt, std::string id);

  int dim() const { return static_cast<int>(sigma_.size()); }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& kurt() const { return kurt_; }
  const std::vector<ScalarSampler>& samplers() const { return samplers_; }
  bool can_sample() const { return !samplers_.empty(); }
  const std::string& id() const { return id_; }

  double mu() const { return sigma_(0); }
  double L() const { return sigma_(sigma_.size() - 1); }
  Eigen::MatrixXd covariance() const;

 private:
  MomentSpec() = default;
  void validate() const;

  Eigen::MatrixXd basis_;
  Eigen::VectorXd sigma_;
  Eigen::VectorXd kurt_;
  std::vector<ScalarSampler> samplers_;
  std::string id_;
};

/// Scale of the Rademacher-type coordinate in the uniform/Rademacher example.
/// `half_variance`: two-point at +-1/sqrt(2) (sigma = 1/2, k = 1/4), the default.
/// `unit`: classic +-1 Rademacher (sigma = 1, k = 1).
enum class RademacherScale { half_variance, unit };

MomentSpec make_gaussian_model(const Eigen::VectorXd& sigma);
MomentSpec make_uniform_rademacher_model(double kappa, RademacherScale scale = RademacherScale::half_variance);
MomentSpec make_custom_model(Eigen::MatrixXd basis, std::vector<ScalarSampler> samplers);

/// Same coordinate laws, basis replaced by rotation * basis.
MomentSpec rotate_model(const MomentSpec& model, const Eigen::MatrixXd& rotation);

/// Orthogonal 2x2 rotation by `radians`.
Eigen::Matrix2d rotation2d(double radians);

Eigen::VectorXd sample_input(const MomentSpec& model, Rng& rng);
void sample_input(const MomentSpec& model, Rng& rng, Eigen::Ref<Eigen::VectorXd> out);

/// For M = U diag(lambda) U^T, E[x x^T M x x^T] = U diag(lambda') U^T with
/// lambda'_p = (k_p - sigma_p^2) lambda_p + sigma_p <sigma, lambda>.
Eigen::VectorXd fourth_moment_transform(const MomentSpec& model, const Eigen::VectorXd& lambda);

/// Eigenvalues of E[Delta M Delta], Delta = Sigma - x x^T, for M = U diag(lambda) U^T:
/// (diag(k - 2 sigma^2) + sigma sigma^T) lambda.
Eigen::VectorXd noise_second_moment(const MomentSpec& model, const Eigen::VectorXd& lambda);

/// U diag(values) U^T.
Eigen::MatrixXd in_eigenbasis(const MomentSpec& model, const Eigen::VectorXd& values);

/// E||grad f_z(w0)||^2 / ||grad f(w0)||^2 with zero labels and w0 the
/// eigenvector of the smallest covariance eigenvalue.
double strong_growth_lower_bound(const MomentSpec& model);

}  // namespace sagdmix
