#include "sagdmix/chains.hpp"

#include <cmath>
#include <sstream>

#include "parallel.hpp"
#include "sagdmix/errors.hpp"

namespace sagdmix {

namespace {

// Separate generators per run: inputs drive the shared linear part, noise only labels.
constexpr std::uint64_t kInputStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

void require_state(const ChainState& s, int d, const char* what) {
  if (s.w_curr.size() != d || s.w_prev.size() != d) {
    std::ostringstream msg;
    msg << what << ": state dimension " << s.w_curr.size() << "/" << s.w_prev.size() << ", expected " << d;
    throw ValidationError(msg.str());
  }
}

void check_finite_norm(const ChainState& s, std::size_t step) {
  if (!s.finite()) throw DivergenceError("non-finite iterate", step);
  double sq = s.w_curr.squaredNorm() + s.w_prev.squaredNorm();
  if (!(std::sqrt(sq) <= kDivergenceNorm)) throw DivergenceError("iterate norm above 1e150", step);
}

bool record_at(std::size_t k, std::size_t stride) { return stride != 0 && k % stride == 0; }

}  // namespace

void Theta::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw ValidationError("alpha must be finite and >= 0");
  if (!std::isfinite(beta) || beta < 0.0 || beta >= 1.0) throw ValidationError("beta must lie in [0, 1)");
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ValidationError("gamma must be finite and > 0");
}

Eigen::VectorXd ChainState::lifted() const {
  Eigen::VectorXd u(2 * w_curr.size());
  u << w_curr, w_prev;
  return u;
}

LabelModel LabelModel::realizable(Eigen::VectorXd wstar) {
  if (!wstar.allFinite()) throw ValidationError("realizable labels: w* must be finite");
  return LabelModel(Kind::realizable, std::move(wstar), ScalarSampler::gaussian(1.0));
}

LabelModel LabelModel::linear_plus_noise(Eigen::VectorXd wstar, ScalarSampler noise) {
  if (!wstar.allFinite()) throw ValidationError("noisy labels: w* must be finite");
  return LabelModel(Kind::linear_plus_noise, std::move(wstar), noise);
}

double LabelModel::label(const Eigen::Ref<const Eigen::VectorXd>& x, Rng& noise) const {
  switch (kind_) {
    case Kind::zero: return 0.0;
    case Kind::realizable: return x.dot(wstar_);
    case Kind::linear_plus_noise: return x.dot(wstar_) + noise_.draw(noise);
  }
  return 0.0;
}

ModelSource::ModelSource(MomentSpec model, LabelModel labels) : model_(std::move(model)), labels_(std::move(labels)) {
  if (!model_.can_sample()) throw ValidationError("model '" + model_.id() + "' has no samplers (moments only)");
  if (labels_.kind() != LabelModel::Kind::zero && labels_.wstar().size() != model_.dim())
    throw ValidationError("label model: w* dimension does not match the input model");
}

void ModelSource::draw(Rng& inputs, Rng& noise, Eigen::Ref<Eigen::VectorXd> x, double& y) const {
  sample_input(model_, inputs, x);
  y = labels_.label(x, noise);
}

Eigen::VectorXd sgd_step(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y, double gamma, double ridge) {
  if (w.size() != x.size()) throw ValidationError("sgd_step: dimension mismatch");
  // Same operation order as sagd_step_inplace, so alpha = beta = 0 agrees bitwise.
  double r = x.dot(w) - y;
  Eigen::VectorXd next = w - (gamma * r) * x;
  if (ridge != 0.0) next -= (gamma * ridge) * w;
  return next;
}

void sagd_step_inplace(ChainState& s, const Eigen::Ref<const Eigen::VectorXd>& x, double y, const Theta& theta,
                       double ridge) {
  // diff reuses w_prev's storage; e = w + alpha diff is the gradient point.
  s.w_prev = s.w_curr - s.w_prev;
  Eigen::VectorXd e = s.w_curr + theta.alpha * s.w_prev;
  double r = x.dot(e) - y;
  Eigen::VectorXd next = s.w_curr + theta.beta * s.w_prev;
  next -= (theta.gamma * r) * x;
  if (ridge != 0.0) next -= (theta.gamma * ridge) * e;
  s.w_prev.swap(s.w_curr);
  s.w_curr.swap(next);
}

ChainState sagd_step(const ChainState& state, const Eigen::VectorXd& x, double y, const Theta& theta, double ridge) {
  require_state(state, static_cast<int>(x.size()), "sagd_step");
  ChainState out = state;
  sagd_step_inplace(out, x, y, theta, ridge);
  return out;
}

Eigen::MatrixXd build_A_matrix(const Eigen::VectorXd& x, const Theta& theta, double ridge) {
  const Eigen::Index d = x.size();
  Eigen::MatrixXd H = x * x.transpose();
  H.diagonal().array() += ridge;
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  A.topLeftCorner(d, d) = (1.0 + theta.beta) * I - (1.0 + theta.alpha) * theta.gamma * H;
  A.topRightCorner(d, d) = theta.alpha * theta.gamma * H - theta.beta * I;
  A.bottomLeftCorner(d, d) = I;
  return A;
}

ChainRun run_chain(const DataSource& source, const Theta& theta, const ChainState& init, std::size_t n,
                   std::uint64_t seed, std::size_t stride) {
  theta.validate();
  const int d = source.dim();
  require_state(init, d, "run_chain");
  Rng inputs = Rng::stream(seed, kInputStream);
  Rng noise = Rng::stream(seed, kNoiseStream);
  const double ridge = source.ridge();

  ChainRun run;
  ChainState s = init;
  check_finite_norm(s, 0);
  if (record_at(0, stride)) {
    run.steps.push_back(0);
    run.states.push_back(s);
  }
  Eigen::VectorXd x(d);
  double y = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    source.draw(inputs, noise, x, y);
    sagd_step_inplace(s, x, y, theta, ridge);
    check_finite_norm(s, k);
    if (record_at(k, stride)) {
      run.steps.push_back(k);
      run.states.push_back(s);
    }
  }
  run.final_state = std::move(s);
  return run;
}

ChainRun run_chain(const MomentSpec& model, const LabelModel& labels, const Theta& theta, const ChainState& init,
                   std::size_t n, std::uint64_t seed, std::size_t stride) {
  return run_chain(ModelSource(model, labels), theta, init, n, seed, stride);
}

CoupledTrajectory run_coupled_chains(const DataSource& source, const Theta& theta, const ChainState& init0,
                                     const ChainState& init1, std::size_t n, std::uint64_t seed,
                                     std::size_t stride) {
  theta.validate();
  const int d = source.dim();
  require_state(init0, d, "run_coupled_chains");
  require_state(init1, d, "run_coupled_chains");
  Rng inputs = Rng::stream(seed, kInputStream);
  Rng noise = Rng::stream(seed, kNoiseStream);
  const double ridge = source.ridge();

  CoupledTrajectory out;
  out.n = n;
  out.seed = seed;
  out.theta = theta;
  out.model_id = source.id();
  out.sq_dist.reserve(n + 1);

  ChainState s0 = init0;
  ChainState s1 = init1;
  ChainState v{init0.w_curr - init1.w_curr, init0.w_prev - init1.w_prev};
  check_finite_norm(s0, 0);
  check_finite_norm(s1, 0);
  out.sq_dist.push_back(v.w_curr.squaredNorm() + v.w_prev.squaredNorm());
  if (record_at(0, stride)) {
    out.steps.push_back(0);
    out.states0.push_back(s0);
    out.states1.push_back(s1);
  }

  Eigen::VectorXd x(d);
  double y = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    source.draw(inputs, noise, x, y);
    sagd_step_inplace(s0, x, y, theta, ridge);
    sagd_step_inplace(s1, x, y, theta, ridge);
    sagd_step_inplace(v, x, 0.0, theta, ridge);
    check_finite_norm(s0, k);
    check_finite_norm(s1, k);
    double sq = v.w_curr.squaredNorm() + v.w_prev.squaredNorm();
    if (!std::isfinite(sq)) throw DivergenceError("non-finite chain difference", k);
    out.sq_dist.push_back(sq);
    if (record_at(k, stride)) {
      out.steps.push_back(k);
      out.states0.push_back(s0);
      out.states1.push_back(s1);
    }
  }
  return out;
}

CoupledTrajectory run_coupled_chains(const MomentSpec& model, const LabelModel& labels, const Theta& theta,
                                     const ChainState& init0, const ChainState& init1, std::size_t n,
                                     std::uint64_t seed, std::size_t stride) {
  return run_coupled_chains(ModelSource(model, labels), theta, init0, init1, n, seed, stride);
}

std::vector<CoupledTrajectory> run_coupled_batch(const DataSource& source, const Theta& theta,
                                                 const ChainState& init0, const ChainState& init1, std::size_t n,
                                                 std::size_t runs, std::uint64_t seed) {
  std::vector<CoupledTrajectory> out(runs);
  detail::parallel_for(runs, [&](std::size_t r) {
    out[r] = run_coupled_chains(source, theta, init0, init1, n, run_seed(seed, r));
  });
  return out;
}

}  // namespace sagdmix
