#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sagdmix/chains.hpp"
#include "sagdmix/moments.hpp"

namespace sagdmix {

/// One hyperparameter axis: linear with spacing `step`, or `points`
/// log-spaced values, plus any `extra` values.
struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;
  int points = 0;
  bool log_scale = false;
  std::vector<double> extra;

  static GridAxis linear(double lo, double hi, double step) { return {lo, hi, step, 0, false, {}}; }
  static GridAxis logspace(double lo, double hi, int points) { return {lo, hi, 0.0, points, true, {}}; }

  /// Sorted, deduplicated values; the linear form includes hi.
  std::vector<double> values() const;
  /// Spacing in the axis' own coordinates (log10 for log axes).
  double spacing() const;
};

enum class TuneObjective { rho_j1, jblock_bound, rho_c };

std::string_view to_string(TuneObjective objective);
TuneObjective tune_objective_from_string(std::string_view name);

struct TuneConfig {
  GridAxis alpha = GridAxis::linear(0.0, 4.0, 0.25);
  GridAxis beta = GridAxis::linear(0.0, 0.999, 0.005);
  GridAxis gamma = GridAxis::logspace(1e-4, 1.0, 33);
  /// Adds beta = 1 - 10^{-1/2} sqrt(mu) to the beta axis.
  bool include_preset_beta = true;
  double constraint_c = 0.2;
  int refine_rounds = 2;
  TuneObjective objective = TuneObjective::rho_j1;
  /// eps for the jblock_bound objective; 0 means 0.05 sqrt(mu).
  double eps = 0.0;
  /// Objective on J_d and constraint on J_1 instead of the literal J_1 / J_d program.
  bool swap_indices = false;

  /// Throws ValidationError for empty grids, beta outside [0, 1), gamma <= 0, c <= 0.
  void validate() const;
};

struct TuneResult {
  Theta theta;
  double objective_value = 0.0;
  double constraint_value = 0.0;  ///< rho of the constrained block
  double constraint_bound = 0.0;  ///< 1 - c sqrt(mu / L)
  bool feasible = false;
  std::size_t evaluations = 0;
};

/// Grid search for
///   min objective(Theta)  subject to  rho(J_d(Theta)) <= 1 - c sqrt(mu / L),
/// then `refine_rounds` local grids shrunk 4x around the incumbent. Ties go to
/// the lexicographically smallest (gamma, beta, alpha). With no feasible
/// point the least-violating Theta is returned with feasible = false.
TuneResult tune(const MomentSpec& model, const TuneConfig& config = {});

/// Objective and constraint of one Theta under `config`.
TuneResult evaluate_theta(const MomentSpec& model, const TuneConfig& config, const Theta& theta);

struct SgdTuneResult {
  double gamma = 0.0;
  double rho = 0.0;  ///< rho of the SGD second-moment map
};

/// Best SGD stepsize on a gamma axis by the spectral radius of the SGD map.
SgdTuneResult tune_sgd(const MomentSpec& model, const GridAxis& gamma = GridAxis::logspace(1e-4, 1.0, 33));

enum class PresetKind { gaussian, uniform_rademacher };

struct Preset {
  Theta theta;
  std::optional<std::string> warning;  ///< set when the parameter is outside the guaranteed range
};

/// gaussian(mu): (2, 1 - 10^{-1/2} sqrt(mu), 0.1);
/// uniform_rademacher(kappa): (2, 1 - 10^{-1/2} sqrt(kappa), kappa / 10).
/// Warns when the parameter exceeds 0.02.
Preset preset_theta(PresetKind kind, double parameter);

std::string to_json(const TuneConfig& config);
std::string to_json(const TuneResult& result);
TuneConfig tune_config_from_json(std::string_view text);

}  // namespace sagdmix
