#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sagdmix/moments.hpp"
#include "sagdmix/rng.hpp"

namespace sagdmix {

/// SAGD hyperparameters: extrapolation alpha (may exceed 1), momentum beta,
/// stepsize gamma.
struct Theta {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  /// Throws ValidationError unless alpha >= 0, 0 <= beta < 1, gamma > 0.
  void validate() const;

  friend bool operator==(const Theta&, const Theta&) = default;
};

/// Lifted iterate u_k = (w_k, w_{k-1}).
struct ChainState {
  Eigen::VectorXd w_curr;
  Eigen::VectorXd w_prev;

  /// (w, w): the default start with equal consecutive iterates.
  static ChainState at(const Eigen::VectorXd& w) { return {w, w}; }
  static ChainState zero(int d) { return at(Eigen::VectorXd::Zero(d)); }

  int dim() const { return static_cast<int>(w_curr.size()); }
  Eigen::VectorXd lifted() const;
  bool finite() const { return w_curr.allFinite() && w_prev.allFinite(); }
};

/// How labels are produced from inputs.
class LabelModel {
 public:
  enum class Kind { zero, realizable, linear_plus_noise };

  static LabelModel zero() { return LabelModel(Kind::zero, {}, ScalarSampler::gaussian(1.0)); }
  static LabelModel realizable(Eigen::VectorXd wstar);
  static LabelModel linear_plus_noise(Eigen::VectorXd wstar, ScalarSampler noise);

  Kind kind() const { return kind_; }
  const Eigen::VectorXd& wstar() const { return wstar_; }

  /// Label for input x. Only the noisy kind consumes `noise`.
  double label(const Eigen::Ref<const Eigen::VectorXd>& x, Rng& noise) const;

 private:
  LabelModel(Kind kind, Eigen::VectorXd wstar, ScalarSampler noise)
      : kind_(kind), wstar_(std::move(wstar)), noise_(noise) {}

  Kind kind_;
  Eigen::VectorXd wstar_;
  ScalarSampler noise_;
};

/// Stream of samples z = (x, y) feeding a chain. Inputs and label noise are
/// drawn from separate generators so the x-stream does not depend on labels.
class DataSource {
 public:
  virtual ~DataSource() = default;
  virtual int dim() const = 0;
  /// l2 penalty lambda added to every stochastic gradient (lambda * w).
  virtual double ridge() const { return 0.0; }
  virtual std::string id() const = 0;
  virtual void draw(Rng& inputs, Rng& noise, Eigen::Ref<Eigen::VectorXd> x, double& y) const = 0;
};

class ModelSource final : public DataSource {
 public:
  ModelSource(MomentSpec model, LabelModel labels);

  int dim() const override { return model_.dim(); }
  std::string id() const override { return model_.id(); }
  void draw(Rng& inputs, Rng& noise, Eigen::Ref<Eigen::VectorXd> x, double& y) const override;

  const MomentSpec& model() const { return model_; }

 private:
  MomentSpec model_;
  LabelModel labels_;
};

/// w - gamma (x (x^T w) - y x + ridge w); O(d).
Eigen::VectorXd sgd_step(const Eigen::VectorXd& w, const Eigen::VectorXd& x, double y, double gamma,
                         double ridge = 0.0);

/// One SAGD update:
///   w_next = w + beta (w - w_prev) - gamma grad f_z(w + alpha (w - w_prev)).
/// Returns (w_next, w_curr). O(d).
ChainState sagd_step(const ChainState& state, const Eigen::VectorXd& x, double y, const Theta& theta,
                     double ridge = 0.0);

/// In-place variant used by the simulation loops.
void sagd_step_inplace(ChainState& state, const Eigen::Ref<const Eigen::VectorXd>& x, double y, const Theta& theta,
                       double ridge = 0.0);

/// Dense 2d x 2d transition
///   [[(1+beta) I - (1+alpha) gamma H, alpha gamma H - beta I], [I, 0]],  H = x x^T + ridge I.
/// With y = 0, A [w_curr; w_prev] equals sagd_step. Test and oracle use only.
Eigen::MatrixXd build_A_matrix(const Eigen::VectorXd& x, const Theta& theta, double ridge = 0.0);

/// Iterate norm above which a run is declared divergent.
inline constexpr double kDivergenceNorm = 1e150;

struct ChainRun {
  std::vector<std::size_t> steps;   ///< step index of each recorded state
  std::vector<ChainState> states;   ///< recorded at `stride` (step 0 included)
  ChainState final_state;
};

/// Runs n SAGD steps. Records every `stride`-th state (stride 0: none besides
/// the final state). Throws DivergenceError on a non-finite iterate or an
/// iterate norm above kDivergenceNorm.
ChainRun run_chain(const DataSource& source, const Theta& theta, const ChainState& init, std::size_t n,
                   std::uint64_t seed, std::size_t stride = 0);
ChainRun run_chain(const MomentSpec& model, const LabelModel& labels, const Theta& theta, const ChainState& init,
                   std::size_t n, std::uint64_t seed, std::size_t stride = 0);

struct CoupledTrajectory {
  std::size_t n = 0;
  /// ||u_k^(0) - u_k^(1)||^2 for k = 0..n (n + 1 entries; entry 0 is the initial distance).
  std::vector<double> sq_dist;
  std::uint64_t seed = 0;
  Theta theta;
  std::string model_id;
  /// States of both chains at `stride` (empty when stride is 0).
  std::vector<std::size_t> steps;
  std::vector<ChainState> states0;
  std::vector<ChainState> states1;
};

/// Two SAGD chains driven by the identical (x_k, y_k) stream.
///
/// The difference v_k = u_k^(0) - u_k^(1) is advanced by the shared linear map
/// v_{k+1} = A_k v_k (the label term cancels exactly), so sq_dist carries no
/// dependence on the label model, bit for bit.
CoupledTrajectory run_coupled_chains(const DataSource& source, const Theta& theta, const ChainState& init0,
                                     const ChainState& init1, std::size_t n, std::uint64_t seed,
                                     std::size_t stride = 0);
CoupledTrajectory run_coupled_chains(const MomentSpec& model, const LabelModel& labels, const Theta& theta,
                                     const ChainState& init0, const ChainState& init1, std::size_t n,
                                     std::uint64_t seed, std::size_t stride = 0);

/// Seed of run `index` within a batch started from `seed`.
inline std::uint64_t run_seed(std::uint64_t seed, std::size_t index) { return Rng::mix(seed, index); }

/// Independent coupled runs with seeds run_seed(seed, r). Results are ordered
/// by run index. A divergent run rethrows its DivergenceError.
std::vector<CoupledTrajectory> run_coupled_batch(const DataSource& source, const Theta& theta,
                                                 const ChainState& init0, const ChainState& init1, std::size_t n,
                                                 std::size_t runs, std::uint64_t seed);

}  // namespace sagdmix
