#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sagdmix/chains.hpp"
#include "sagdmix/moments.hpp"
#include "sagdmix/spectral.hpp"

namespace sagdmix {

struct RateFit {
  double rate = 0.0;  ///< r in e^{-r k}
  double stderr_rate = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;  ///< points used by the regression
};

/// OLS of log(values[k]) on k over k >= floor(burn_in * size). Trailing
/// entries below 1e-280 (or non-positive) are trimmed first. A constant
/// sequence gives rate 0, stderr 0 and r^2 = 1. Fewer than 10 usable points
/// throws FitError.
RateFit fit_exponential_rate(const std::vector<double>& values, double burn_in = 0.1);

/// Which spectral quantity the theoretical column reports.
///   jblock: -log max_i rho(J_i)   (default)
///   rho_c:  -log rho(C)
enum class TheoryConvention { jblock, rho_c };

std::string_view to_string(TheoryConvention convention);
TheoryConvention theory_convention_from_string(std::string_view name);

struct TableOptions {
  std::size_t n = 1000;
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  double burn_in = 0.1;
  TheoryConvention convention = TheoryConvention::jblock;
  /// Coupled starts: chain 0 at (w0, w0), chain 1 at the origin. Empty means all ones.
  Eigen::VectorXd w0;
};

struct RateRow {
  Theta theta;
  double empirical_rate = 0.0;
  double empirical_stderr = 0.0;  ///< leave-one-run-out jackknife
  double theoretical_rate = 0.0;
  double rho_c = 0.0;     ///< diagnostic, always filled
  double rho_j = 0.0;     ///< max_i rho(J_i), diagnostic
  double r_squared = 0.0;
  std::size_t runs_used = 0;
  std::size_t diverged_runs = 0;
  bool diverged = false;  ///< every run diverged or the fit failed; rates are NaN
  std::string notes;
};

/// Theoretical rate of one Theta; a pure function of (model, theta).
double theoretical_rate(const MomentSpec& model, const Theta& theta, TheoryConvention convention);

/// One row per Theta. Each row runs `runs` coupled pairs with seeds
/// run_seed(seed, r) on the zero-label model and fits the mean sq_dist.
/// Divergent runs are counted in the row, not thrown.
std::vector<RateRow> run_table(const MomentSpec& model, const std::vector<Theta>& configs,
                               const TableOptions& options = {});

/// Same on an arbitrary source (datasets); the theoretical columns are left NaN.
RateRow run_rate_row(const DataSource& source, const Theta& theta, const TableOptions& options);

/// True when at least half of the rows diverged.
bool divergence_dominated(const std::vector<RateRow>& rows);

struct RealizableResult {
  std::vector<double> mean_sq;             ///< E||u_k - (w*, w*)||^2, k = 0..n
  std::vector<std::vector<double>> runs;   ///< per-run trajectories
  std::vector<double> envelope;            ///< w2 upper bound at each k (empty when eps <= 0)
  double rho_eps = 0.0;
  std::size_t diverged_runs = 0;
  bool diverged = false;
};

/// Chains with realizable labels y = x^T w* started at `init`; divergent runs
/// are dropped from the mean and counted.
RealizableResult run_realizable(const MomentSpec& model, const Eigen::VectorXd& wstar, const Theta& theta,
                                std::size_t n, std::size_t runs, std::uint64_t seed, const ChainState& init,
                                double eps = 0.0);

struct IngestOptions {
  std::string target;        ///< column name
  double ridge = 0.0;
  bool standardize = true;   ///< center, unit variance, then shrink so L <= 1
};

/// Real data: standardized features, their empirical moments and a resampling source.
struct EmpiricalModel {
  Eigen::MatrixXd features;  ///< rows x p, after standardization
  Eigen::VectorXd targets;   ///< centered
  std::vector<std::string> feature_names;
  std::vector<std::string> warnings;
  double ridge = 0.0;
  double global_scale = 1.0;  ///< applied after unit-variance scaling
  /// Moment-only model of the features (no ridge).
  MomentSpec moments;
  /// Diagnostic model of the ridge Hessian: sigma + lambda, k + 2 lambda sigma + lambda^2.
  MomentSpec effective;
};

EmpiricalModel ingest_dataset(const std::string& path, const IngestOptions& options);

/// Uniform row resampling with replacement; gradient gets + ridge * w.
class DatasetSource final : public DataSource {
 public:
  DatasetSource(Eigen::MatrixXd features, Eigen::VectorXd targets, double ridge, std::string id);
  explicit DatasetSource(const EmpiricalModel& model, std::string id = "dataset");

  int dim() const override { return static_cast<int>(features_.cols()); }
  double ridge() const override { return ridge_; }
  std::string id() const override { return id_; }
  void draw(Rng& inputs, Rng& noise, Eigen::Ref<Eigen::VectorXd> x, double& y) const override;

 private:
  Eigen::MatrixXd features_;
  Eigen::VectorXd targets_;
  double ridge_;
  std::string id_;
};

struct StrongGrowthEstimate {
  double analytic = 0.0;
  double mc_mean = 0.0;
  double mc_stderr = 0.0;
};

/// E||grad f_z(w0)||^2 / ||grad f(w0)||^2 at w0 = smallest-eigenvalue
/// eigenvector, zero labels, by Monte Carlo (ratio of means, delta-method stderr).
StrongGrowthEstimate estimate_strong_growth(const MomentSpec& model, std::size_t samples, std::uint64_t seed);

enum class OutputFormat { csv, json };
OutputFormat output_format_from_string(std::string_view name);

/// Table header: alpha,beta,gamma,empirical_rate,empirical_stderr,theoretical_rate.
void emit_table(const std::string& path, const std::vector<RateRow>& rows, OutputFormat format = OutputFormat::csv);
std::vector<RateRow> read_table_csv(const std::string& path);

/// Two-column series: `step,<value_name>`.
void emit_series(const std::string& path, const std::vector<double>& values, OutputFormat format = OutputFormat::csv,
                 const std::string& value_name = "value");
std::vector<double> read_series_csv(const std::string& path);

/// Contour data: re,im,sigma_min.
void emit_pseudospectrum(const std::string& path, const std::vector<ResolventSample>& samples);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Fast self-checks: oracle vs closed form, label independence, Dirac
/// invariance, power bound. Takes a few seconds.
std::vector<CheckResult> run_verification(std::uint64_t seed);

}  // namespace sagdmix
