#include "sagdmix/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/io.hpp"
#include "sagdmix/tuner.hpp"

namespace sagdmix {

namespace {

using json = nlohmann::json;

constexpr double kUnderflow = 1e-280;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kTableHeader = {"alpha",          "beta",           "gamma",
                                               "empirical_rate", "empirical_stderr", "theoretical_rate"};

double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty()) throw ValidationError(where + ": empty cell");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) throw ValidationError(where + ": not numeric: '" + cell + "'");
  return v;
}

std::vector<double> mean_of(const std::vector<const std::vector<double>*>& runs, std::size_t skip) {
  std::vector<double> mean(runs.front()->size(), 0.0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    if (r == skip) continue;
    ++count;
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += (*runs[r])[k];
  }
  for (double& m : mean) m /= static_cast<double>(count);
  return mean;
}

}  // namespace

RateFit fit_exponential_rate(const std::vector<double>& values, double burn_in) {
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw ValidationError("burn-in fraction must lie in [0, 1)");
  std::size_t end = values.size();
  while (end > 0 && !(values[end - 1] > kUnderflow)) --end;
  const auto start = static_cast<std::size_t>(std::floor(burn_in * static_cast<double>(values.size())));

  std::vector<double> xs, ys;
  for (std::size_t k = start; k < end; ++k) {
    if (!(values[k] > kUnderflow) || !std::isfinite(values[k])) continue;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(values[k]));
  }
  const std::size_t m = xs.size();
  if (m < 10) throw FitError("rate fit needs at least 10 positive points after burn-in, got " + std::to_string(m));

  RateFit fit;
  fit.points = m;
  double xbar = 0.0, ybar = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    xbar += xs[i];
    ybar += ys[i];
  }
  xbar /= static_cast<double>(m);
  ybar /= static_cast<double>(m);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    sxy += (xs[i] - xbar) * (ys[i] - ybar);
    syy += (ys[i] - ybar) * (ys[i] - ybar);
  }
  if (std::all_of(ys.begin(), ys.end(), [&](double v) { return v == ys[0]; })) {
    fit.r_squared = 1.0;
    return fit;
  }
  const double slope = sxy / sxx;
  const double sse = std::max(0.0, syy - slope * sxy);
  fit.rate = -slope;
  fit.stderr_rate = std::sqrt(sse / static_cast<double>(m - 2) / sxx);
  fit.r_squared = 1.0 - sse / syy;
  return fit;
}

std::string_view to_string(TheoryConvention convention) {
  return convention == TheoryConvention::jblock ? "jblock" : "rho_c";
}

TheoryConvention theory_convention_from_string(std::string_view name) {
  if (name == "jblock") return TheoryConvention::jblock;
  if (name == "rho_c") return TheoryConvention::rho_c;
  throw ValidationError("unknown theory convention '" + std::string(name) + "' (jblock, rho_c)");
}

double theoretical_rate(const MomentSpec& model, const Theta& theta, TheoryConvention convention) {
  theta.validate();
  const double rho = convention == TheoryConvention::jblock
                         ? jblock_radius(model, theta)
                         : spectral_radius(build_contraction_matrix(model, theta).mat);
  return -std::log(rho);
}

RateRow run_rate_row(const DataSource& source, const Theta& theta, const TableOptions& options) {
  theta.validate();
  if (options.runs < 1) throw ValidationError("runs must be >= 1");
  if (options.n < 10) throw ValidationError("n must be >= 10 for rate fitting");
  const int d = source.dim();
  const Eigen::VectorXd w0 = options.w0.size() ? options.w0 : Eigen::VectorXd::Ones(d);
  if (w0.size() != d) throw ValidationError("w0 has the wrong dimension");
  const ChainState init0 = ChainState::at(w0), init1 = ChainState::zero(d);

  std::vector<std::vector<double>> traj(options.runs);
  std::vector<char> failed(options.runs, 0);
  detail::parallel_for(options.runs, [&](std::size_t r) {
    try {
      traj[r] = run_coupled_chains(source, theta, init0, init1, options.n, run_seed(options.seed, r)).sq_dist;
    } catch (const DivergenceError&) {
      failed[r] = 1;
    }
  });

  RateRow row;
  row.theta = theta;
  row.theoretical_rate = row.rho_c = row.rho_j = kNaN;
  std::vector<const std::vector<double>*> ok;
  for (std::size_t r = 0; r < options.runs; ++r) {
    if (failed[r])
      ++row.diverged_runs;
    else
      ok.push_back(&traj[r]);
  }
  row.runs_used = ok.size();
  row.empirical_rate = row.empirical_stderr = kNaN;
  if (2 * row.diverged_runs > options.runs || ok.empty()) {
    row.diverged = true;
    row.notes = std::to_string(row.diverged_runs) + "/" + std::to_string(options.runs) + " runs diverged";
    return row;
  }
  if (row.diverged_runs > 0)
    row.notes = std::to_string(row.diverged_runs) + " divergent runs excluded from the mean";

  try {
    const RateFit fit = fit_exponential_rate(mean_of(ok, ok.size()), options.burn_in);
    row.empirical_rate = fit.rate;
    row.r_squared = fit.r_squared;
    if (ok.size() >= 2) {
      // leave-one-run-out jackknife of the mean-trajectory fit
      std::vector<double> loo(ok.size());
      for (std::size_t r = 0; r < ok.size(); ++r) loo[r] = fit_exponential_rate(mean_of(ok, r), options.burn_in).rate;
      double bar = 0.0;
      for (double v : loo) bar += v;
      bar /= static_cast<double>(loo.size());
      double ss = 0.0;
      for (double v : loo) ss += (v - bar) * (v - bar);
      row.empirical_stderr = std::sqrt(ss * static_cast<double>(loo.size() - 1) / static_cast<double>(loo.size()));
    } else {
      row.empirical_stderr = fit.stderr_rate;
      row.notes += (row.notes.empty() ? "" : "; ") + std::string("single run: regression stderr");
    }
  } catch (const FitError& e) {
    row.notes += (row.notes.empty() ? "" : "; ") + std::string(e.what());
  }
  return row;
}

std::vector<RateRow> run_table(const MomentSpec& model, const std::vector<Theta>& configs,
                               const TableOptions& options) {
  const ModelSource source(model, LabelModel::zero());
  std::vector<RateRow> rows;
  rows.reserve(configs.size());
  for (const Theta& th : configs) {
    RateRow row = run_rate_row(source, th, options);
    row.rho_c = spectral_radius(build_contraction_matrix(model, th).mat);
    row.rho_j = jblock_radius(model, th);
    row.theoretical_rate = theoretical_rate(model, th, options.convention);
    rows.push_back(std::move(row));
  }
  return rows;
}

bool divergence_dominated(const std::vector<RateRow>& rows) {
  if (rows.empty()) return false;
  const auto bad = std::count_if(rows.begin(), rows.end(), [](const RateRow& r) { return r.diverged; });
  return 2 * static_cast<std::size_t>(bad) >= rows.size();
}

RealizableResult run_realizable(const MomentSpec& model, const Eigen::VectorXd& wstar, const Theta& theta,
                                std::size_t n, std::size_t runs, std::uint64_t seed, const ChainState& init,
                                double eps) {
  theta.validate();
  if (runs < 1) throw ValidationError("runs must be >= 1");
  if (wstar.size() != model.dim() || init.dim() != model.dim())
    throw ValidationError("w* and the initial state must match the model dimension");
  const LabelModel labels = LabelModel::realizable(wstar);

  RealizableResult out;
  out.runs.resize(runs);
  std::vector<char> failed(runs, 0);
  detail::parallel_for(runs, [&](std::size_t r) {
    try {
      const ChainRun run = run_chain(model, labels, theta, init, n, run_seed(seed, r), 1);
      auto& t = out.runs[r];
      t.reserve(run.states.size());
      for (const auto& s : run.states) t.push_back((s.w_curr - wstar).squaredNorm() + (s.w_prev - wstar).squaredNorm());
    } catch (const DivergenceError&) {
      failed[r] = 1;
    }
  });

  out.mean_sq.assign(n + 1, 0.0);
  std::size_t used = 0;
  for (std::size_t r = 0; r < runs; ++r) {
    if (failed[r]) {
      ++out.diverged_runs;
      continue;
    }
    ++used;
    for (std::size_t k = 0; k <= n; ++k) out.mean_sq[k] += out.runs[r][k];
  }
  std::erase_if(out.runs, [](const std::vector<double>& t) { return t.empty(); });
  out.diverged = 2 * out.diverged_runs > runs || used == 0;
  if (used == 0) {
    std::fill(out.mean_sq.begin(), out.mean_sq.end(), kNaN);
  } else {
    for (double& v : out.mean_sq) v /= static_cast<double>(used);
  }

  if (eps > 0.0) {
    const ContractionMatrix c = build_contraction_matrix(model, theta);
    const double c0 = (init.w_curr - wstar).squaredNorm() + (init.w_prev - wstar).squaredNorm();
    out.rho_eps = pseudospectral_radius(c.mat, eps);
    const double b0 = w2_upper_bound(c, eps, 0, c0);
    out.envelope.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) out.envelope[k] = b0 * std::pow(out.rho_eps, static_cast<double>(k));
  }
  return out;
}

DatasetSource::DatasetSource(Eigen::MatrixXd features, Eigen::VectorXd targets, double ridge, std::string id)
    : features_(std::move(features)), targets_(std::move(targets)), ridge_(ridge), id_(std::move(id)) {
  if (features_.rows() < 1 || features_.cols() < 1) throw ValidationError("dataset is empty");
  if (targets_.size() != features_.rows()) throw ValidationError("dataset: target length differs from row count");
  if (!(ridge_ >= 0.0)) throw ValidationError("ridge must be >= 0");
}

DatasetSource::DatasetSource(const EmpiricalModel& model, std::string id)
    : DatasetSource(model.features, model.targets, model.ridge, std::move(id)) {}

void DatasetSource::draw(Rng& inputs, Rng&, Eigen::Ref<Eigen::VectorXd> x, double& y) const {
  std::uniform_int_distribution<Eigen::Index> pick(0, features_.rows() - 1);
  const Eigen::Index i = pick(inputs);
  x = features_.row(i).transpose();
  y = targets_(i);
}

EmpiricalModel ingest_dataset(const std::string& path, const IngestOptions& options) {
  if (!(options.ridge >= 0.0)) throw ValidationError("ridge must be >= 0");
  const CsvTable table = read_csv(path);
  const auto& header = table.header;
  std::size_t target = header.size() - 1;
  if (!options.target.empty()) {
    const auto it = std::find(header.begin(), header.end(), options.target);
    if (it == header.end()) throw ValidationError(path + ": no column named '" + options.target + "'");
    target = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() < 2) throw ValidationError(path + ": need at least one feature column and a target");
  const auto rows = static_cast<Eigen::Index>(table.rows.size());
  if (rows < 2) throw ValidationError(path + ": need at least two data rows");

  Eigen::MatrixXd raw(rows, static_cast<Eigen::Index>(header.size()));
  for (Eigen::Index r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < header.size(); ++c)
      raw(r, static_cast<Eigen::Index>(c)) =
          parse_number(table.rows[static_cast<std::size_t>(r)][c],
                       path + ": row " + std::to_string(r + 1) + ", column '" + header[c] + "'");
  if (!raw.allFinite()) throw ValidationError(path + ": non-finite values");

  std::vector<std::string> warnings, names;
  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target) continue;
    const auto col = raw.col(static_cast<Eigen::Index>(c));
    if (col.maxCoeff() == col.minCoeff()) {
      warnings.push_back("dropped constant column '" + header[c] + "'");
      continue;
    }
    keep.push_back(static_cast<Eigen::Index>(c));
    names.push_back(header[c]);
  }
  if (keep.empty()) throw ValidationError(path + ": every feature column is constant");
  const auto p = static_cast<Eigen::Index>(keep.size());
  if (rows < p) throw ValidationError(path + ": fewer rows than features");

  Eigen::MatrixXd x(rows, p);
  for (Eigen::Index j = 0; j < p; ++j) x.col(j) = raw.col(keep[static_cast<std::size_t>(j)]);
  Eigen::VectorXd y = raw.col(static_cast<Eigen::Index>(target));
  const double nrows = static_cast<double>(rows);

  double scale = 1.0;
  if (options.standardize) {
    x.rowwise() -= x.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) x.col(j) /= std::sqrt(x.col(j).squaredNorm() / nrows);
    y.array() -= y.mean();
  }
  Eigen::MatrixXd cov = x.transpose() * x / nrows;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw NumericError("covariance eigendecomposition failed");
  if (options.standardize && es.eigenvalues().maxCoeff() > 1.0) {
    scale = 1.0 / std::sqrt(es.eigenvalues().maxCoeff());
    x *= scale;
    cov = x.transpose() * x / nrows;
    es.compute(cov);
  }
  Eigen::VectorXd sigma = es.eigenvalues();
  const Eigen::MatrixXd u = es.eigenvectors();
  if (!(sigma(0) > 1e-12 * sigma(p - 1)))
    throw ValidationError(path + ": feature covariance is singular (collinear columns or too few rows)");
  const Eigen::MatrixXd v = x * u;
  Eigen::VectorXd kurt(p);
  for (Eigen::Index i = 0; i < p; ++i) kurt(i) = std::max(v.col(i).array().pow(4).mean(), sigma(i) * sigma(i));

  const double lam = options.ridge;
  const Eigen::VectorXd sigma_eff = sigma.array() + lam;
  const Eigen::VectorXd kurt_eff = kurt.array() + 2.0 * lam * sigma.array() + lam * lam;
  MomentSpec moments = MomentSpec::from_moments(u, sigma, kurt, "dataset:" + path);
  MomentSpec effective = MomentSpec::from_moments(u, sigma_eff, kurt_eff, "dataset:" + path + ":ridge");
  return EmpiricalModel{std::move(x), std::move(y), std::move(names), std::move(warnings), lam, scale,
                        std::move(moments), std::move(effective)};
}

StrongGrowthEstimate estimate_strong_growth(const MomentSpec& model, std::size_t samples, std::uint64_t seed) {
  if (!model.can_sample()) throw ValidationError("strong growth estimate needs a model with samplers");
  if (samples < 2) throw ValidationError("need at least 2 samples");
  StrongGrowthEstimate out;
  out.analytic = strong_growth_lower_bound(model);
  // grad f(w0) = mu w0 exactly, so only the numerator is random.
  const Eigen::VectorXd w0 = model.basis().col(0);
  const double denom = model.mu() * model.mu();
  Rng rng = Rng::stream(seed, 0);
  Eigen::VectorXd x(model.dim());
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    sample_input(model, rng, x);
    const double xw = x.dot(w0);
    const double g = xw * xw * x.squaredNorm() / denom;
    const double delta = g - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (g - mean);
  }
  out.mc_mean = mean;
  out.mc_stderr = std::sqrt(m2 / static_cast<double>(samples - 1) / static_cast<double>(samples));
  return out;
}

OutputFormat output_format_from_string(std::string_view name) {
  if (name == "csv") return OutputFormat::csv;
  if (name == "json") return OutputFormat::json;
  throw ValidationError("unknown format '" + std::string(name) + "' (csv, json)");
}

void emit_table(const std::string& path, const std::vector<RateRow>& rows, OutputFormat format) {
  if (format == OutputFormat::json) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    json arr = json::array();
    for (const auto& r : rows)
      arr.push_back({{"alpha", r.theta.alpha},
                     {"beta", r.theta.beta},
                     {"gamma", r.theta.gamma},
                     {"empirical_rate", num(r.empirical_rate)},
                     {"empirical_stderr", num(r.empirical_stderr)},
                     {"theoretical_rate", num(r.theoretical_rate)},
                     {"rho_c", num(r.rho_c)},
                     {"rho_j", num(r.rho_j)},
                     {"r_squared", r.r_squared},
                     {"runs_used", r.runs_used},
                     {"diverged_runs", r.diverged_runs},
                     {"diverged", r.diverged},
                     {"notes", r.notes}});
    write_text_file(path, arr.dump(2) + "\n");
    return;
  }
  std::vector<std::vector<double>> cols(kTableHeader.size());
  for (const auto& r : rows) {
    cols[0].push_back(r.theta.alpha);
    cols[1].push_back(r.theta.beta);
    cols[2].push_back(r.theta.gamma);
    cols[3].push_back(r.empirical_rate);
    cols[4].push_back(r.empirical_stderr);
    cols[5].push_back(r.theoretical_rate);
  }
  write_csv(path, kTableHeader, cols);
}

std::vector<RateRow> read_table_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header != kTableHeader) throw ValidationError(path + ": not a rate table");
  std::vector<RateRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& c = t.rows[i];
    const std::string where = path + ": row " + std::to_string(i + 1);
    RateRow r;
    r.theta = {parse_number(c[0], where), parse_number(c[1], where), parse_number(c[2], where)};
    r.empirical_rate = parse_number(c[3], where);
    r.empirical_stderr = parse_number(c[4], where);
    r.theoretical_rate = parse_number(c[5], where);
    rows.push_back(r);
  }
  return rows;
}

void emit_series(const std::string& path, const std::vector<double>& values, OutputFormat format,
                 const std::string& value_name) {
  std::vector<double> steps(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) steps[k] = static_cast<double>(k);
  if (format == OutputFormat::json) {
    json j{{"step", steps}, {value_name, values}};
    write_text_file(path, j.dump() + "\n");
    return;
  }
  write_csv(path, {"step", value_name}, {steps, values});
}

std::vector<double> read_series_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() != 2 || t.header[0] != "step") throw ValidationError(path + ": not a step series");
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back(parse_number(t.rows[i][1], path + ": row " + std::to_string(i + 1)));
  return out;
}

void emit_pseudospectrum(const std::string& path, const std::vector<ResolventSample>& samples) {
  std::vector<std::vector<double>> cols(3);
  for (const auto& s : samples) {
    cols[0].push_back(s.re);
    cols[1].push_back(s.im);
    cols[2].push_back(s.sigma_min);
  }
  write_csv(path, {"re", "im", "sigma_min"}, cols);
}

std::vector<CheckResult> run_verification(std::uint64_t seed) {
  std::vector<CheckResult> out;
  auto add = [&](std::string name, bool ok, std::string detail) { out.push_back({std::move(name), ok, std::move(detail)}); };
  const MomentSpec model = rotate_model(make_gaussian_model(Eigen::Vector2d(0.1, 1.0)), rotation2d(0.7));
  const Theta th{1.5, 0.8, 0.2};

  {
    const ContractionMatrix c = build_contraction_matrix(model, th);
    const Eigen::MatrixXd closed = reconstruct_Mn(model, evolve_second_moment(c, 5));
    Eigen::MatrixXd m0(4, 4);  // [[I, I], [I, I]], the all-ones start
    m0 << Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Identity(),
        Eigen::Matrix2d::Identity();
    const MonteCarloGram mc = mc_estimate_Mn(model, th, 5, 20000, seed, m0);
    const double z = ((mc.mean - closed).cwiseAbs().array() / mc.std_error.array().max(1e-300)).maxCoeff();
    std::ostringstream s;
    s << "max |z| = " << z;
    add("second-moment recursion vs Monte Carlo (n = 5)", z <= 5.0, s.str());
  }
  {
    const Eigen::Vector2d wstar(0.3, -1.2);
    const auto a = run_coupled_chains(model, LabelModel::zero(), th, ChainState::at(Eigen::Vector2d(1, 1)),
                                      ChainState::zero(2), 500, seed);
    const auto b = run_coupled_chains(model, LabelModel::realizable(wstar), th,
                                      ChainState::at(Eigen::Vector2d(1, 1)), ChainState::zero(2), 500, seed);
    const auto c = run_coupled_chains(model, LabelModel::linear_plus_noise(wstar, ScalarSampler::gaussian(0.5)), th,
                                      ChainState::at(Eigen::Vector2d(1, 1)), ChainState::zero(2), 500, seed);
    add("coupling is label independent", a.sq_dist == b.sq_dist && a.sq_dist == c.sq_dist, "500 steps, 3 label models");
  }
  {
    const Eigen::Vector2d wstar(0.3, -1.2);
    const ChainRun run = run_chain(model, LabelModel::realizable(wstar), th, ChainState::at(wstar), 10000, seed);
    const double dev = std::max((run.final_state.w_curr - wstar).cwiseAbs().maxCoeff(),
                                (run.final_state.w_prev - wstar).cwiseAbs().maxCoeff());
    add("Dirac invariance at (w*, w*)", dev == 0.0, "10000 steps, max deviation " + format_double(dev));
  }
  {
    const ContractionMatrix c = build_contraction_matrix(model, th);
    const PowerNormCheck p = power_norm_bound_check(c.mat, 0.1, 50);
    add("power norm bound ||C^n|| <= rho_eps^{n+1} / eps", p.ok, "lhs " + format_double(p.lhs) + ", rhs " + format_double(p.rhs));
  }
  {
    const double mu = 0.01;
    const MomentSpec g = make_gaussian_model(Eigen::Vector2d(mu, 1.0));
    const SpectralReport r = jblock_mixing_bound(g, preset_theta(PresetKind::gaussian, mu).theta, 0.05 * std::sqrt(mu));
    add("Gaussian preset block bound <= 1 - sqrt(mu)/5", r.rho_eps <= 1.0 - std::sqrt(mu) / 5.0,
        "bound " + format_double(r.rho_eps) + " at mu = 0.01");
  }
  return out;
}

}  // namespace sagdmix
