#include "sagdmix/contraction.hpp"

#include <cmath>
#include <vector>

#include "parallel.hpp"
#include "sagdmix/errors.hpp"

namespace sagdmix {

Eigen::MatrixXd ContractionMatrix::K() const {
  Eigen::MatrixXd k = k_rank1 * k_rank1.transpose();
  k.diagonal() += k_diag;
  return k;
}

Eigen::MatrixXd ContractionMatrix::block(int row, int col) const {
  if (row < 0 || row > 2 || col < 0 || col > 2) throw ValidationError("block index out of range");
  return mat.block(row * d, col * d, d, d);
}

ContractionMatrix build_contraction_matrix(const MomentSpec& model, const Theta& theta) {
  theta.validate();
  const int d = model.dim();
  const auto& s = model.sigma();
  const auto& k = model.kurt();
  const double a = theta.alpha, b = theta.beta, g = theta.gamma;

  ContractionMatrix c;
  c.d = d;
  c.theta = theta;
  c.model_id = model.id();
  c.d1 = (1.0 + b) - g * (1.0 + a) * s.array();
  c.d2 = a * g * s.array() - b;
  c.k_diag = g * g * (k - 2.0 * s.cwiseProduct(s));
  c.k_rank1 = g * s;

  const Eigen::MatrixXd K = c.K();
  const auto D1 = c.d1.asDiagonal();
  const auto D2 = c.d2.asDiagonal();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);

  c.mat = Eigen::MatrixXd::Zero(3 * d, 3 * d);
  Eigen::MatrixXd b00 = (1.0 + a) * (1.0 + a) * K;
  b00.diagonal() += c.d1.cwiseProduct(c.d1);
  Eigen::MatrixXd b10 = -a * (1.0 + a) * K;
  b10.diagonal() += c.d1.cwiseProduct(c.d2);
  Eigen::MatrixXd b20 = a * a * K;
  b20.diagonal() += c.d2.cwiseProduct(c.d2);

  c.mat.block(0, 0, d, d) = b00;
  c.mat.block(0, d, d, d) = 2.0 * Eigen::MatrixXd(D1);
  c.mat.block(0, 2 * d, d, d) = I;
  c.mat.block(d, 0, d, d) = b10;
  c.mat.block(d, d, d, d) = Eigen::MatrixXd(D2);
  c.mat.block(2 * d, 0, d, d) = b20;
  return c;
}

Eigen::MatrixXd sgd_contraction_matrix(const MomentSpec& model, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  const auto& s = model.sigma();
  const auto& k = model.kurt();
  // E[(I - g xx^T) M (I - g xx^T)] on eigenvalue lists, expanded term by term.
  Eigen::MatrixXd out = gamma * gamma * (s * s.transpose());
  for (int i = 0; i < model.dim(); ++i) {
    const double shrink = 1.0 - gamma * s(i);
    out(i, i) += shrink * shrink + gamma * gamma * (k(i) - 2.0 * s(i) * s(i));
  }
  return out;
}

SecondMomentState initial_second_moment(int d, InitialGram init) {
  if (d < 1) throw ValidationError("dimension must be >= 1");
  SecondMomentState st;
  st.init = init;
  st.a = Eigen::VectorXd::Ones(3 * d);
  if (init == InitialGram::identity) st.a.segment(d, d).setZero();
  return st;
}

SecondMomentState evolve_second_moment(const ContractionMatrix& c, const SecondMomentState& from, std::size_t steps) {
  if (from.a.size() != c.mat.rows()) throw ValidationError("second-moment state does not match the contraction matrix");
  SecondMomentState st = from;
  Eigen::VectorXd next(st.a.size());
  for (std::size_t i = 0; i < steps; ++i) {
    next.noalias() = c.mat * st.a;
    st.a.swap(next);
    ++st.n;
    if (!st.a.allFinite()) throw DivergenceError("second-moment recursion overflowed", st.n);
  }
  return st;
}

SecondMomentState evolve_second_moment(const ContractionMatrix& c, std::size_t n, InitialGram init) {
  return evolve_second_moment(c, initial_second_moment(c.d, init), n);
}

Eigen::MatrixXd reconstruct_Mn(const MomentSpec& model, const SecondMomentState& state) {
  const int d = model.dim();
  if (state.a.size() != 3 * d) throw ValidationError("second-moment state does not match the model dimension");
  const double scale = std::max(1.0, state.a.cwiseAbs().maxCoeff());
  const Eigen::VectorXd l1 = state.lambda(0), l2 = state.lambda(1), l3 = state.lambda(2);
  if (l1.minCoeff() < -1e-9 * scale || l3.minCoeff() < -1e-9 * scale)
    throw NumericError("second-moment state has negative diagonal eigenvalues");
  Eigen::MatrixXd m(2 * d, 2 * d);
  m.topLeftCorner(d, d) = in_eigenbasis(model, l1);
  m.topRightCorner(d, d) = in_eigenbasis(model, l2);
  m.bottomLeftCorner(d, d) = m.topRightCorner(d, d);
  m.bottomRightCorner(d, d) = in_eigenbasis(model, l3);
  return m;
}

MonteCarloGram mc_estimate_Mn(const MomentSpec& model, const Theta& theta, std::size_t n, std::size_t trials,
                              std::uint64_t seed, const std::optional<Eigen::MatrixXd>& initial_gram) {
  theta.validate();
  if (trials < 1000) throw ValidationError("mc_estimate_Mn: trials must be >= 1000");
  const int d = model.dim();
  const Eigen::MatrixXd g0 = initial_gram ? *initial_gram : Eigen::MatrixXd::Identity(2 * d, 2 * d);
  if (g0.rows() != 2 * d || g0.cols() != 2 * d) throw ValidationError("initial Gram matrix must be 2d x 2d");

  struct Partial {
    std::size_t count = 0;
    Eigen::MatrixXd mean;
    Eigen::MatrixXd m2;
  };
  const std::size_t chunks = (trials + kMonteCarloChunk - 1) / kMonteCarloChunk;
  std::vector<Partial> parts(chunks);

  detail::parallel_for(chunks, [&](std::size_t ci) {
    Partial p;
    p.mean = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    p.m2 = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    Eigen::VectorXd x(d);
    Eigen::MatrixXd b(2 * d, 2 * d), tmp(2 * d, 2 * d), sample(2 * d, 2 * d);
    const std::size_t end = std::min(trials, (ci + 1) * kMonteCarloChunk);
    for (std::size_t t = ci * kMonteCarloChunk; t < end; ++t) {
      Rng rng = Rng::stream(seed, t);
      b.setIdentity();
      for (std::size_t k = 0; k < n; ++k) {
        sample_input(model, rng, x);
        tmp.noalias() = build_A_matrix(x, theta) * b;
        b.swap(tmp);
      }
      sample.noalias() = b.transpose() * g0 * b;
      ++p.count;
      const Eigen::MatrixXd delta = sample - p.mean;
      p.mean += delta / static_cast<double>(p.count);
      p.m2 += delta.cwiseProduct(sample - p.mean);
    }
    parts[ci] = std::move(p);
  });

  // Chunk-ordered merge, independent of thread scheduling.
  Partial acc = parts[0];
  for (std::size_t ci = 1; ci < chunks; ++ci) {
    const Partial& p = parts[ci];
    const double na = static_cast<double>(acc.count), nb = static_cast<double>(p.count);
    const Eigen::MatrixXd delta = p.mean - acc.mean;
    acc.mean += delta * (nb / (na + nb));
    acc.m2 += p.m2 + delta.cwiseAbs2() * (na * nb / (na + nb));
    acc.count += p.count;
  }
  MonteCarloGram out;
  out.trials = acc.count;
  out.mean = acc.mean;
  const double N = static_cast<double>(acc.count);
  out.std_error = (acc.m2 / (N - 1.0) / N).cwiseSqrt();
  return out;
}

namespace {

double bound_expr(const ContractionMatrix& c, double eps, std::size_t n, double constant,
                  const PseudospectrumOptions& opts) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  if (!(constant >= 0.0)) throw ValidationError("initial moment must be nonnegative");
  const double rho_eps = pseudospectral_radius(c.mat, eps, opts);
  return 18.0 * std::pow(static_cast<double>(c.d), 1.5) * constant *
         std::pow(rho_eps, static_cast<double>(n) + 1.0) / eps;
}

}  // namespace

double w2_upper_bound(const ContractionMatrix& c, double eps, std::size_t n, double c0,
                      const PseudospectrumOptions& opts) {
  return bound_expr(c, eps, n, c0, opts);
}

double w2_stationary_bound(const ContractionMatrix& c, double eps, std::size_t n, double first_moment,
                           const PseudospectrumOptions& opts) {
  return bound_expr(c, eps, n, first_moment, opts);
}

QuadraticFormBounds quadratic_form_bounds(const MomentSpec& model, const SecondMomentState& state,
                                          const Eigen::VectorXd& v) {
  const int d = model.dim();
  if (v.size() != d) throw ValidationError("quadratic_form_bounds: v must have length d");
  // [v; v]^T M_n [v; v] = v^T U diag(l1 + 2 l2 + l3) U^T v.
  const Eigen::VectorXd combined = state.lambda(0) + 2.0 * state.lambda(1) + state.lambda(2);
  const Eigen::VectorXd coords = model.basis().transpose() * v;
  const double vv = v.squaredNorm();
  QuadraticFormBounds out;
  out.value = coords.cwiseAbs2().dot(combined);
  out.stated_lower = state.a.cwiseAbs().maxCoeff() * vv;
  out.tight_lower = combined.minCoeff() * vv;
  out.upper = 6.0 * std::sqrt(static_cast<double>(d)) * state.a.norm() * vv;
  return out;
}

}  // namespace sagdmix
