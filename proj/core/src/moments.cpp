#include "sagdmix/moments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sagdmix/errors.hpp"

namespace sagdmix {

namespace {

constexpr double kOrthogonalityTol = 1e-12;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void require_dim(const MomentSpec& model, Eigen::Index n, const char* what) {
  if (n != model.dim()) {
    std::ostringstream msg;
    msg << what << ": expected length " << model.dim() << ", got " << n;
    throw ValidationError(msg.str());
  }
}

}  // namespace

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::gaussian: return "gaussian";
    case SamplerKind::uniform: return "uniform";
    case SamplerKind::two_point: return "two_point";
    case SamplerKind::three_point: return "three_point";
  }
  return "unknown";
}

SamplerKind sampler_kind_from_string(std::string_view name) {
  if (name == "gaussian") return SamplerKind::gaussian;
  if (name == "uniform") return SamplerKind::uniform;
  if (name == "two_point") return SamplerKind::two_point;
  if (name == "three_point") return SamplerKind::three_point;
  throw ValidationError("unknown sampler kind '" + std::string(name) + "' (moments not declared)");
}

ScalarSampler ScalarSampler::gaussian(double variance) {
  if (!positive_finite(variance)) throw ValidationError("gaussian sampler: variance must be positive");
  return {SamplerKind::gaussian, variance, 0.0};
}

ScalarSampler ScalarSampler::uniform(double half_width) {
  if (!positive_finite(half_width)) throw ValidationError("uniform sampler: half_width must be positive");
  return {SamplerKind::uniform, half_width, 0.0};
}

ScalarSampler ScalarSampler::two_point(double magnitude) {
  if (!positive_finite(magnitude)) throw ValidationError("two_point sampler: magnitude must be positive");
  return {SamplerKind::two_point, magnitude, 0.0};
}

ScalarSampler ScalarSampler::three_point(double magnitude, double mass) {
  if (!positive_finite(magnitude)) throw ValidationError("three_point sampler: magnitude must be positive");
  if (!(mass > 0.0 && mass <= 1.0)) throw ValidationError("three_point sampler: mass must lie in (0, 1]");
  return {SamplerKind::three_point, magnitude, mass};
}

ScalarSampler ScalarSampler::from_params(std::string_view kind,
                                         const std::vector<std::pair<std::string, double>>& params) {
  auto get = [&](const char* name) {
    for (const auto& [key, value] : params)
      if (key == name) return value;
    throw ValidationError(std::string(kind) + " sampler: missing parameter '" + name + "'");
  };
  switch (sampler_kind_from_string(kind)) {
    case SamplerKind::gaussian: return gaussian(get("variance"));
    case SamplerKind::uniform: return uniform(get("half_width"));
    case SamplerKind::two_point: return two_point(get("magnitude"));
    case SamplerKind::three_point: return three_point(get("magnitude"), get("mass"));
  }
  throw ValidationError("unreachable sampler kind");
}

double ScalarSampler::second_moment() const {
  switch (kind_) {
    case SamplerKind::gaussian: return a_;
    case SamplerKind::uniform: return a_ * a_ / 3.0;
    case SamplerKind::two_point: return a_ * a_;
    case SamplerKind::three_point: return b_ * a_ * a_;
  }
  return 0.0;
}

double ScalarSampler::fourth_moment() const {
  switch (kind_) {
    case SamplerKind::gaussian: return 3.0 * a_ * a_;
    case SamplerKind::uniform: return std::pow(a_, 4) / 5.0;
    case SamplerKind::two_point: return std::pow(a_, 4);
    case SamplerKind::three_point: return b_ * std::pow(a_, 4);
  }
  return 0.0;
}

double ScalarSampler::draw(Rng& rng) const {
  switch (kind_) {
    case SamplerKind::gaussian: return std::sqrt(a_) * rng.normal();
    case SamplerKind::uniform: return rng.uniform(-a_, a_);
    case SamplerKind::two_point: return rng.coin() ? a_ : -a_;
    case SamplerKind::three_point: {
      const double u = rng.uniform(0.0, 1.0);
      if (u >= b_) return 0.0;
      return u < 0.5 * b_ ? a_ : -a_;
    }
  }
  return 0.0;
}

std::vector<std::pair<std::string, double>> ScalarSampler::params() const {
  switch (kind_) {
    case SamplerKind::gaussian: return {{"variance", a_}};
    case SamplerKind::uniform: return {{"half_width", a_}};
    case SamplerKind::two_point: return {{"magnitude", a_}};
    case SamplerKind::three_point: return {{"magnitude", a_}, {"mass", b_}};
  }
  return {};
}

MomentSpec MomentSpec::from_samplers(Eigen::MatrixXd basis, std::vector<ScalarSampler> samplers, std::string id) {
  const auto d = static_cast<Eigen::Index>(samplers.size());
  if (d == 0) throw ValidationError("model needs at least one coordinate");
  if (basis.rows() != d || basis.cols() != d) throw ValidationError("basis must be d x d with d = number of samplers");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return samplers[static_cast<std::size_t>(a)].second_moment() < samplers[static_cast<std::size_t>(b)].second_moment();
  });

  MomentSpec spec;
  spec.basis_.resize(d, d);
  spec.sigma_.resize(d);
  spec.kurt_.resize(d);
  spec.samplers_.reserve(samplers.size());
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto src = order[static_cast<std::size_t>(i)];
    const auto& s = samplers[static_cast<std::size_t>(src)];
    spec.basis_.col(i) = basis.col(src);
    spec.sigma_(i) = s.second_moment();
    spec.kurt_(i) = s.fourth_moment();
    spec.samplers_.push_back(s);
  }
  spec.id_ = std::move(id);
  spec.validate();
  return spec;
}

MomentSpec MomentSpec::from_moments(Eigen::MatrixXd basis, Eigen::VectorXd sigma, Eigen::VectorXd kurt,
                                    std::string id) {
  MomentSpec spec;
  spec.basis_ = std::move(basis);
  spec.sigma_ = std::move(sigma);
  spec.kurt_ = std::move(kurt);
  spec.id_ = std::move(id);
  spec.validate();
  return spec;
}

void MomentSpec::validate() const {
  const auto d = sigma_.size();
  if (d == 0) throw ValidationError("model needs at least one coordinate");
  if (kurt_.size() != d) throw ValidationError("kurt must have the same length as sigma");
  if (basis_.rows() != d || basis_.cols() != d) throw ValidationError("basis must be d x d");
  if (!basis_.allFinite()) throw ValidationError("basis has non-finite entries");
  const double off = (basis_.transpose() * basis_ - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff();
  if (off > kOrthogonalityTol) {
    std::ostringstream msg;
    msg << "basis is not orthogonal: max |U^T U - I| = " << off;
    throw ValidationError(msg.str());
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!positive_finite(sigma_(i))) throw ValidationError("sigma must be strictly positive");
    if (i > 0 && sigma_(i) < sigma_(i - 1)) throw ValidationError("sigma must be sorted ascending");
    if (!positive_finite(kurt_(i))) throw ValidationError("kurt must be strictly positive");
    // Jensen: E v^4 >= (E v^2)^2; relative slack for rounding in derived moments.
    if (kurt_(i) < sigma_(i) * sigma_(i) * (1.0 - 1e-12))
      throw ValidationError("kurt_i must be at least sigma_i^2");
  }
}

Eigen::MatrixXd MomentSpec::covariance() const { return in_eigenbasis(*this, sigma_); }

MomentSpec make_gaussian_model(const Eigen::VectorXd& sigma) {
  if (sigma.size() == 0) throw ValidationError("sigma must be non-empty");
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (!positive_finite(sigma(i))) throw ValidationError("sigma must be strictly positive");
    if (i > 0 && sigma(i) < sigma(i - 1)) throw ValidationError("sigma must be sorted ascending");
  }
  std::vector<ScalarSampler> samplers;
  samplers.reserve(static_cast<std::size_t>(sigma.size()));
  for (double s : sigma) samplers.push_back(ScalarSampler::gaussian(s));
  std::ostringstream id;
  id << "gaussian(";
  for (Eigen::Index i = 0; i < sigma.size(); ++i) id << (i ? "," : "") << sigma(i);
  id << ")";
  return MomentSpec::from_samplers(Eigen::MatrixXd::Identity(sigma.size(), sigma.size()), std::move(samplers),
                                   id.str());
}

MomentSpec make_uniform_rademacher_model(double kappa, RademacherScale scale) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw ValidationError("kappa must lie in (0, 1)");
  const double magnitude = scale == RademacherScale::half_variance ? 1.0 / std::sqrt(2.0) : 1.0;
  std::vector<ScalarSampler> samplers{ScalarSampler::two_point(magnitude),
                                      ScalarSampler::uniform(1.0 / std::sqrt(kappa))};
  std::ostringstream id;
  id << "uniform_rademacher(kappa=" << kappa << (scale == RademacherScale::unit ? ",unit" : "") << ")";
  return MomentSpec::from_samplers(Eigen::MatrixXd::Identity(2, 2), std::move(samplers), id.str());
}

MomentSpec make_custom_model(Eigen::MatrixXd basis, std::vector<ScalarSampler> samplers) {
  return MomentSpec::from_samplers(std::move(basis), std::move(samplers), "custom");
}

MomentSpec rotate_model(const MomentSpec& model, const Eigen::MatrixXd& rotation) {
  if (rotation.rows() != model.dim() || rotation.cols() != model.dim())
    throw ValidationError("rotation must be d x d");
  Eigen::MatrixXd basis = rotation * model.basis();
  if (model.can_sample()) return MomentSpec::from_samplers(std::move(basis), model.samplers(), model.id() + "+rot");
  return MomentSpec::from_moments(std::move(basis), model.sigma(), model.kurt(), model.id() + "+rot");
}

Eigen::Matrix2d rotation2d(double radians) {
  Eigen::Matrix2d r;
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  r << c, -s, s, c;
  return r;
}

void sample_input(const MomentSpec& model, Rng& rng, Eigen::Ref<Eigen::VectorXd> out) {
  if (!model.can_sample()) throw ValidationError("model '" + model.id() + "' has no samplers");
  require_dim(model, out.size(), "sample_input output");
  const auto& samplers = model.samplers();
  Eigen::VectorXd v(model.dim());
  for (int i = 0; i < model.dim(); ++i) v(i) = samplers[static_cast<std::size_t>(i)].draw(rng);
  out.noalias() = model.basis() * v;
}

Eigen::VectorXd sample_input(const MomentSpec& model, Rng& rng) {
  Eigen::VectorXd x(model.dim());
  sample_input(model, rng, x);
  return x;
}

Eigen::VectorXd fourth_moment_transform(const MomentSpec& model, const Eigen::VectorXd& lambda) {
  require_dim(model, lambda.size(), "fourth_moment_transform lambda");
  const auto& s = model.sigma();
  const auto& k = model.kurt();
  return (k - s.cwiseProduct(s)).cwiseProduct(lambda) + s * s.dot(lambda);
}

Eigen::VectorXd noise_second_moment(const MomentSpec& model, const Eigen::VectorXd& lambda) {
  require_dim(model, lambda.size(), "noise_second_moment lambda");
  const auto& s = model.sigma();
  const auto& k = model.kurt();
  return (k - 2.0 * s.cwiseProduct(s)).cwiseProduct(lambda) + s * s.dot(lambda);
}

Eigen::MatrixXd in_eigenbasis(const MomentSpec& model, const Eigen::VectorXd& values) {
  require_dim(model, values.size(), "eigenvalue vector");
  return model.basis() * values.asDiagonal() * model.basis().transpose();
}

double strong_growth_lower_bound(const MomentSpec& model) {
  // w0 = U e_1: ||grad f(w0)||^2 = sigma_1^2 and
  // E||grad f_z(w0)||^2 = w0^T E[x x^T I x x^T] w0 = lambda'_1 with lambda = 1.
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(model.dim());
  const double second = fourth_moment_transform(model, ones)(0);
  return second / (model.mu() * model.mu());
}

}  // namespace sagdmix
