#include "sagdmix/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/spectral.hpp"

namespace sagdmix {

namespace {

using json = nlohmann::json;

double preset_beta(double parameter) { return 1.0 - std::sqrt(parameter) / std::sqrt(10.0); }

double j_radius(const MomentSpec& model, const Theta& th, int i) {
  const double s = model.sigma()(i), k = model.kurt()(i);
  const double a = th.alpha, b = th.beta, g = th.gamma;
  const double d1 = (1.0 + b) - g * (1.0 + a) * s;
  const double d2 = a * g * s - b;
  const double noise = g * g * (k - s * s);
  Eigen::Matrix3d j;
  j << d1 * d1 + (1.0 + a) * (1.0 + a) * noise, 2.0 * d1, 1.0,
       d1 * d2 - a * (1.0 + a) * noise, d2, 0.0,
       d2 * d2 + a * a * noise, 0.0, 0.0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(j, false);
  if (es.info() != Eigen::Success) throw NumericError("eigenvalue solver did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Strict "a is better than b" with the documented tie-break.
bool better(const TuneResult& a, const TuneResult& b) {
  auto lex = [](const Theta& t) { return std::make_tuple(t.gamma, t.beta, t.alpha); };
  if (a.feasible != b.feasible) return a.feasible;
  if (a.feasible) {
    if (a.objective_value != b.objective_value) return a.objective_value < b.objective_value;
  } else {
    if (a.constraint_value != b.constraint_value) return a.constraint_value < b.constraint_value;
    if (a.objective_value != b.objective_value) return a.objective_value < b.objective_value;
  }
  return lex(a.theta) < lex(b.theta);
}

std::vector<double> local_axis(const GridAxis& axis, double center, int round) {
  const double h = axis.spacing() / std::pow(4.0, round);
  std::vector<double> out;
  if (h <= 0.0) return {center};
  const double lo = std::min(axis.lo, center), hi = std::max(axis.hi, center);
  for (int j = -4; j <= 4; ++j) {
    double v = axis.log_scale ? std::pow(10.0, std::log10(center) + j * h) : center + j * h;
    if (v >= lo && v <= hi) out.push_back(v);
  }
  return out;
}

struct Search {
  const MomentSpec& model;
  const TuneConfig& config;
  TuneResult best;
  bool have = false;
  std::size_t evaluations = 0;

  void run(const std::vector<double>& as, const std::vector<double>& bs, const std::vector<double>& gs) {
    // One slot per gamma value; each is reduced independently, then merged in order.
    std::vector<std::optional<TuneResult>> slots(gs.size());
    detail::parallel_for(gs.size(), [&](std::size_t gi) {
      std::optional<TuneResult> local;
      for (double b : bs)
        for (double a : as) {
          TuneResult r = evaluate_theta(model, config, Theta{a, b, gs[gi]});
          if (!local || better(r, *local)) local = r;
        }
      slots[gi] = local;
    });
    evaluations += as.size() * bs.size() * gs.size();
    for (const auto& s : slots)
      if (s && (!have || better(*s, best))) {
        best = *s;
        have = true;
      }
  }
};

GridAxis axis_from_json(const json& j) {
  GridAxis a;
  a.lo = j.at("lo").get<double>();
  a.hi = j.at("hi").get<double>();
  a.log_scale = j.value("log_scale", false);
  a.step = j.value("step", 0.0);
  a.points = j.value("points", 0);
  a.extra = j.value("extra", std::vector<double>{});
  return a;
}

json axis_to_json(const GridAxis& a) {
  json j{{"lo", a.lo}, {"hi", a.hi}, {"log_scale", a.log_scale}, {"extra", a.extra}};
  if (a.log_scale)
    j["points"] = a.points;
  else
    j["step"] = a.step;
  return j;
}

json theta_json(const Theta& t) { return {{"alpha", t.alpha}, {"beta", t.beta}, {"gamma", t.gamma}}; }

}  // namespace

std::vector<double> GridAxis::values() const {
  std::vector<double> out;
  if (log_scale) {
    if (points < 1 || !(lo > 0.0) || !(hi >= lo)) throw ValidationError("log axis needs points >= 1 and 0 < lo <= hi");
    if (points == 1) {
      out.push_back(lo);
    } else {
      const double l0 = std::log10(lo), l1 = std::log10(hi);
      for (int i = 0; i < points; ++i) out.push_back(std::pow(10.0, l0 + (l1 - l0) * i / (points - 1)));
      out.back() = hi;
    }
  } else {
    if (!(hi >= lo)) throw ValidationError("linear axis needs lo <= hi");
    if (!(step > 0.0)) {
      out.push_back(lo);
    } else {
      const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
      for (long i = 0; i <= count; ++i) out.push_back(lo + step * static_cast<double>(i));
      if (hi - out.back() > 1e-12 * std::max(1.0, std::abs(hi))) out.push_back(hi);
    }
  }
  out.insert(out.end(), extra.begin(), extra.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double GridAxis::spacing() const {
  if (log_scale) return points > 1 ? (std::log10(hi) - std::log10(lo)) / (points - 1) : 0.0;
  return step;
}

std::string_view to_string(TuneObjective objective) {
  switch (objective) {
    case TuneObjective::rho_j1: return "rho_j1";
    case TuneObjective::jblock_bound: return "jblock_bound";
    case TuneObjective::rho_c: return "rho_c";
  }
  return "unknown";
}

TuneObjective tune_objective_from_string(std::string_view name) {
  if (name == "rho_j1") return TuneObjective::rho_j1;
  if (name == "jblock_bound") return TuneObjective::jblock_bound;
  if (name == "rho_c") return TuneObjective::rho_c;
  throw ValidationError("unknown objective '" + std::string(name) + "' (rho_j1, jblock_bound, rho_c)");
}

void TuneConfig::validate() const {
  const auto as = alpha.values(), bs = beta.values(), gs = gamma.values();
  if (as.empty() || bs.empty() || gs.empty()) throw ValidationError("tuning grids must be non-empty");
  if (as.front() < 0.0) throw ValidationError("alpha grid must be >= 0");
  if (bs.front() < 0.0 || bs.back() >= 1.0) throw ValidationError("beta grid must lie in [0, 1)");
  if (!(gs.front() > 0.0)) throw ValidationError("gamma grid must be positive");
  if (!(constraint_c > 0.0)) throw ValidationError("constraint constant c must be positive");
  if (refine_rounds < 0) throw ValidationError("refine_rounds must be >= 0");
  if (eps < 0.0) throw ValidationError("eps must be >= 0");
}

TuneResult evaluate_theta(const MomentSpec& model, const TuneConfig& config, const Theta& theta) {
  const int d = model.dim();
  const int obj_index = config.swap_indices ? d - 1 : 0;
  const int con_index = config.swap_indices ? 0 : d - 1;
  TuneResult r;
  r.theta = theta;
  r.evaluations = 1;
  r.constraint_bound = 1.0 - config.constraint_c * std::sqrt(model.mu() / model.L());
  r.constraint_value = j_radius(model, theta, con_index);
  switch (config.objective) {
    case TuneObjective::rho_j1: r.objective_value = j_radius(model, theta, obj_index); break;
    case TuneObjective::jblock_bound: {
      const double eps = config.eps > 0.0 ? config.eps : 0.05 * std::sqrt(model.mu());
      r.objective_value = jblock_mixing_bound(model, theta, eps).rho_eps;
      break;
    }
    case TuneObjective::rho_c: r.objective_value = spectral_radius(build_contraction_matrix(model, theta).mat); break;
  }
  r.feasible = r.constraint_value <= r.constraint_bound + 1e-12;
  return r;
}

TuneResult tune(const MomentSpec& model, const TuneConfig& config) {
  config.validate();
  TuneConfig cfg = config;
  if (cfg.include_preset_beta) cfg.beta.extra.push_back(preset_beta(model.mu()));
  if (cfg.beta.values().back() >= 1.0) throw ValidationError("beta grid must lie in [0, 1)");

  Search search{model, cfg, {}, false, 0};
  search.run(cfg.alpha.values(), cfg.beta.values(), cfg.gamma.values());
  for (int round = 1; round <= cfg.refine_rounds; ++round) {
    const Theta c = search.best.theta;
    search.run(local_axis(cfg.alpha, c.alpha, round), local_axis(cfg.beta, c.beta, round),
               local_axis(cfg.gamma, c.gamma, round));
  }
  TuneResult out = search.best;
  out.evaluations = search.evaluations;
  return out;
}

SgdTuneResult tune_sgd(const MomentSpec& model, const GridAxis& gamma) {
  SgdTuneResult best{0.0, std::numeric_limits<double>::infinity()};
  for (double g : gamma.values()) {
    const double r = spectral_radius(sgd_contraction_matrix(model, g));
    if (r < best.rho) best = {g, r};
  }
  return best;
}

Preset preset_theta(PresetKind kind, double parameter) {
  if (!(parameter > 0.0 && parameter < 1.0)) throw ValidationError("preset parameter must lie in (0, 1)");
  Preset p;
  p.theta.alpha = 2.0;
  p.theta.beta = preset_beta(parameter);
  p.theta.gamma = kind == PresetKind::gaussian ? 0.1 : parameter / 10.0;
  if (parameter > 0.02) {
    p.warning = std::string(kind == PresetKind::gaussian ? "mu" : "kappa") + " = " + std::to_string(parameter) +
                " exceeds 0.02; the rate guarantee for this preset does not apply";
  }
  return p;
}

std::string to_json(const TuneConfig& c) {
  json j{{"alpha", axis_to_json(c.alpha)},
         {"beta", axis_to_json(c.beta)},
         {"gamma", axis_to_json(c.gamma)},
         {"include_preset_beta", c.include_preset_beta},
         {"constraint_c", c.constraint_c},
         {"refine_rounds", c.refine_rounds},
         {"objective", std::string(to_string(c.objective))},
         {"eps", c.eps},
         {"swap_indices", c.swap_indices}};
  return j.dump(2);
}

std::string to_json(const TuneResult& r) {
  json j{{"theta", theta_json(r.theta)},
         {"objective_value", r.objective_value},
         {"constraint_value", r.constraint_value},
         {"constraint_bound", r.constraint_bound},
         {"feasible", r.feasible},
         {"evaluations", r.evaluations}};
  return j.dump(2);
}

TuneConfig tune_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("tune config: ") + e.what());
  }
  TuneConfig c;
  try {
    if (j.contains("alpha")) c.alpha = axis_from_json(j["alpha"]);
    if (j.contains("beta")) c.beta = axis_from_json(j["beta"]);
    if (j.contains("gamma")) c.gamma = axis_from_json(j["gamma"]);
    c.include_preset_beta = j.value("include_preset_beta", c.include_preset_beta);
    c.constraint_c = j.value("constraint_c", c.constraint_c);
    c.refine_rounds = j.value("refine_rounds", c.refine_rounds);
    if (j.contains("objective")) c.objective = tune_objective_from_string(j["objective"].get<std::string>());
    c.eps = j.value("eps", c.eps);
    c.swap_indices = j.value("swap_indices", c.swap_indices);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("tune config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace sagdmix
