#include "sagdmix/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sagdmix/errors.hpp"

namespace sagdmix {

namespace {

using cd = std::complex<double>;

void require_square(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ValidationError(std::string(what) + ": matrix must be square");
  if (!m.allFinite()) throw ValidationError(std::string(what) + ": matrix has non-finite entries");
}

void require_eps(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be positive");
}

double operator_norm(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues()(0);
}

class RaySearch {
 public:
  RaySearch(const Eigen::MatrixXd& m, double eps, const PseudospectrumOptions& opts)
      : mc_(m.cast<cd>()), eps_(eps), tol_(opts.radial_tol) {
    r_hi_ = operator_norm(m) + 1.001 * eps;
    h_min_ = std::max(1e-4 * eps, tol_ * r_hi_);
  }

  double r_hi() const { return r_hi_; }

  // Outermost r >= floor on the ray with sigma_min <= eps, or -1 if none.
  double boundary(double angle, double floor) const {
    const cd dir = std::polar(1.0, angle);
    double r_out = r_hi_;
    double r = r_hi_;
    while (r >= floor) {
      const double s = smin(r * dir);
      if (s <= eps_) return bisect(dir, r, r_out);
      r_out = r;
      r -= std::max(s - eps_, h_min_);
    }
    return -1.0;
  }

 private:
  double smin(cd z) const {
    Eigen::MatrixXcd shifted = mc_;
    shifted.diagonal().array() -= z;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
    return svd.singularValues()(svd.singularValues().size() - 1);
  }

  double bisect(cd dir, double r_in, double r_out) const {
    while (r_out - r_in > tol_ * std::max(1.0, r_out)) {
      const double mid = 0.5 * (r_in + r_out);
      if (smin(mid * dir) <= eps_)
        r_in = mid;
      else
        r_out = mid;
    }
    return r_in;
  }

  Eigen::MatrixXcd mc_;
  double eps_;
  double tol_;
  double r_hi_ = 0.0;
  double h_min_ = 0.0;
};

}  // namespace

std::string_view to_string(SpectralMethod method) {
  switch (method) {
    case SpectralMethod::exact_eigen: return "exact-eigen";
    case SpectralMethod::grid_resolvent: return "grid-resolvent";
    case SpectralMethod::jblock_bound: return "jblock-bound";
  }
  return "unknown";
}

Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& m) {
  require_square(m, "eigenvalues");
  Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
  if (es.info() != Eigen::Success) throw NumericError("eigenvalue solver did not converge");
  return es.eigenvalues();
}

double spectral_radius(const Eigen::MatrixXd& m) { return eigenvalues(m).cwiseAbs().maxCoeff(); }

double resolvent_sigma_min(const Eigen::MatrixXd& m, std::complex<double> z) {
  require_square(m, "resolvent_sigma_min");
  Eigen::MatrixXcd shifted = m.cast<cd>();
  shifted.diagonal().array() -= z;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(shifted);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double pseudospectral_radius(const Eigen::MatrixXd& m, double eps, const PseudospectrumOptions& opts) {
  require_square(m, "pseudospectral_radius");
  require_eps(eps);
  if (opts.angles < 1) throw ValidationError("pseudospectral_radius: angles must be >= 1");
  RaySearch search(m, eps, opts);

  double best = 0.0;
  double best_angle = 0.0;
  auto try_ray = [&](double angle) {
    const double r = search.boundary(angle, best);
    if (r > best) {
      best = r;
      best_angle = angle;
    }
  };

  // Rays through the eigenvalues: each crosses the disc of radius eps around one.
  const Eigen::VectorXcd ev = eigenvalues(m);
  for (Eigen::Index i = 0; i < ev.size(); ++i) try_ray(std::abs(ev(i)) > 0.0 ? std::arg(ev(i)) : 0.0);

  const double step = 2.0 * std::numbers::pi / opts.angles;
  for (int j = 0; j < opts.angles; ++j) try_ray(j * step);

  // Golden-section refinement in angle around the best ray.
  auto value = [&](double angle) { return std::max(0.0, search.boundary(angle, 0.0)); };
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_angle - step, hi = best_angle + step;
  double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
  double fa = value(a), fb = value(b);
  for (int it = 0; it < opts.refine_iters; ++it) {
    if (fa > fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - g * (hi - lo);
      fa = value(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + g * (hi - lo);
      fb = value(b);
    }
    best = std::max({best, fa, fb});
  }
  return best;
}

std::vector<ResolventSample> pseudospectrum_grid(const Eigen::MatrixXd& m, double re_lo, double re_hi, double im_lo,
                                                 double im_hi, int nre, int nim) {
  require_square(m, "pseudospectrum_grid");
  if (nre < 2 || nim < 2) throw ValidationError("pseudospectrum_grid: need at least 2 points per axis");
  std::vector<ResolventSample> out;
  out.reserve(static_cast<std::size_t>(nre) * static_cast<std::size_t>(nim));
  for (int j = 0; j < nim; ++j) {
    const double im = im_lo + (im_hi - im_lo) * j / (nim - 1);
    for (int i = 0; i < nre; ++i) {
      const double re = re_lo + (re_hi - re_lo) * i / (nre - 1);
      out.push_back({re, im, resolvent_sigma_min(m, {re, im})});
    }
  }
  return out;
}

std::vector<Eigen::Matrix3d> build_J_blocks(const MomentSpec& model, const Theta& theta) {
  const auto& s = model.sigma();
  const auto& k = model.kurt();
  const double a = theta.alpha, b = theta.beta, g = theta.gamma;
  std::vector<Eigen::Matrix3d> out;
  out.reserve(static_cast<std::size_t>(model.dim()));
  for (int i = 0; i < model.dim(); ++i) {
    const double d1 = (1.0 + b) - g * (1.0 + a) * s(i);
    const double d2 = a * g * s(i) - b;
    const double noise = g * g * (k(i) - s(i) * s(i));
    Eigen::Matrix3d j;
    j << d1 * d1 + (1.0 + a) * (1.0 + a) * noise, 2.0 * d1, 1.0,
         d1 * d2 - a * (1.0 + a) * noise, d2, 0.0,
         d2 * d2 + a * a * noise, 0.0, 0.0;
    out.push_back(j);
  }
  return out;
}

double jblock_radius(const MomentSpec& model, const Theta& theta) {
  double r = 0.0;
  for (const auto& j : build_J_blocks(model, theta)) r = std::max(r, spectral_radius(j));
  return r;
}

Eigen::MatrixXd jblock_diagonal_part(const MomentSpec& model, const Theta& theta) {
  const int d = model.dim();
  const auto blocks = build_J_blocks(model, theta);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(3 * d, 3 * d);
  for (int i = 0; i < d; ++i)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) out(r * d + i, c * d + i) = blocks[static_cast<std::size_t>(i)](r, c);
  return out;
}

Eigen::PermutationMatrix<Eigen::Dynamic> jblock_permutation(int d) {
  Eigen::PermutationMatrix<Eigen::Dynamic> p(3 * d);
  for (int i = 0; i < d; ++i)
    for (int b = 0; b < 3; ++b) p.indices()(3 * i + b) = b * d + i;
  return p;
}

double jblock_perturbation_term(const MomentSpec& model, const Theta& theta) {
  const auto& s = model.sigma();
  Eigen::MatrixXd rem = s * s.transpose();
  rem.diagonal().setZero();
  // Symmetric, so the 2-norm is the largest |eigenvalue|.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rem, Eigen::EigenvaluesOnly);
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  const double f = (1.0 + theta.alpha) * theta.gamma;
  return 3.0 * f * f * norm;
}

SpectralReport jblock_mixing_bound(const MomentSpec& model, const Theta& theta, double eps) {
  require_eps(eps);
  SpectralReport rep;
  rep.method = SpectralMethod::jblock_bound;
  rep.eps = eps;
  const auto blocks = build_J_blocks(model, theta);
  rep.j_radii.resize(model.dim());
  for (int i = 0; i < model.dim(); ++i) rep.j_radii(i) = spectral_radius(blocks[static_cast<std::size_t>(i)]);
  rep.rho = rep.j_radii.maxCoeff();
  rep.perturbation_term = jblock_perturbation_term(model, theta);
  rep.rho_eps = rep.rho + eps + rep.perturbation_term;
  return rep;
}

SpectralReport analyze_matrix(const Eigen::MatrixXd& m, double eps, const PseudospectrumOptions& opts) {
  SpectralReport rep;
  rep.method = SpectralMethod::grid_resolvent;
  rep.eps = eps;
  rep.rho = spectral_radius(m);
  rep.rho_eps = pseudospectral_radius(m, eps, opts);
  return rep;
}

PowerNormCheck power_norm_bound_check(const Eigen::MatrixXd& m, double eps, int n, const PseudospectrumOptions& opts) {
  require_square(m, "power_norm_bound_check");
  require_eps(eps);
  if (n < 1) throw ValidationError("power_norm_bound_check: n must be >= 1");
  Eigen::MatrixXd power = Eigen::MatrixXd::Identity(m.rows(), m.cols());
  Eigen::MatrixXd base = m;
  for (int e = n; e > 0; e >>= 1) {
    if (e & 1) power = power * base;
    if (e > 1) base = base * base;
    if (!power.allFinite() || !base.allFinite()) break;
  }
  PowerNormCheck out;
  out.lhs = power.allFinite() ? operator_norm(power) : std::numeric_limits<double>::infinity();
  out.rhs = std::pow(pseudospectral_radius(m, eps, opts), n + 1) / eps;
  out.saturated = !std::isfinite(out.lhs) || !std::isfinite(out.rhs);
  out.ok = out.lhs <= out.rhs;
  return out;
}

PerturbationCheck perturbation_bound_check(const Eigen::MatrixXd& a, const Eigen::MatrixXd& m, double eps,
                                           const PseudospectrumOptions& opts) {
  require_square(a, "perturbation_bound_check");
  require_square(m, "perturbation_bound_check");
  require_eps(eps);
  if (a.rows() != m.rows()) throw ValidationError("perturbation_bound_check: size mismatch");
  constexpr double slack = 1e-3;
  PerturbationCheck out;
  out.robust_lhs = pseudospectral_radius(a + m, eps, opts);
  out.robust_rhs = pseudospectral_radius(a, eps + operator_norm(m), opts);
  out.robust_ok = out.robust_lhs <= out.robust_rhs + slack;

  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) throw NumericError("eigenvalue solver did not converge");
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(es.eigenvectors());
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  out.kappa = smin > 1e-14 * sv(0) ? sv(0) / smin : std::numeric_limits<double>::infinity();
  out.bf_lhs = pseudospectral_radius(a, eps, opts);
  out.bf_rhs = es.eigenvalues().cwiseAbs().maxCoeff() + out.kappa * eps;
  out.bauer_fike_ok = out.bf_lhs <= out.bf_rhs + slack;
  return out;
}

}  // namespace sagdmix
