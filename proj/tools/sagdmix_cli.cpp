// sagdmix command line: simulate, couple, analyze, tune, table, verify, ingest.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sagdmix/chains.hpp"
#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/harness.hpp"
#include "sagdmix/io.hpp"
#include "sagdmix/moments.hpp"
#include "sagdmix/spectral.hpp"
#include "sagdmix/tuner.hpp"

using namespace sagdmix;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;

struct Options {
  std::string model = "gaussian";
  double mu = 0.05;
  double kappa = 0.05;
  std::optional<double> alpha, beta, gamma;
  std::string preset;
  std::size_t n = 1000;
  std::size_t runs = 10;
  std::uint64_t seed = 1;
  double eps = 0.0;
  std::string out;
  std::string format = "csv";
  std::string dataset;
  std::string target;
  double ridge = 1e-3;
  std::string labels = "zero";
  double noise = 0.1;
  double burn_in = 0.1;
  std::string convention = "jblock";
  std::string table;
  int grid = 0;
  json tune = json::object();
  std::vector<Theta> configs;
};

// Values from a JSON config (or a sidecar holding one under "config").
void apply_config_file(const std::string& path, Options& o) {
  json j = json::parse(read_text_file(path));
  if (j.contains("config") && j["config"].is_object()) {
    if (j.contains("seed")) o.seed = j["seed"].get<std::uint64_t>();
    j = j["config"];
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::decay_t<decltype(field)>>();
  };
  get("model", o.model);
  get("mu", o.mu);
  get("kappa", o.kappa);
  for (auto [key, field] : {std::pair{"alpha", &o.alpha}, {"beta", &o.beta}, {"gamma", &o.gamma}})
    if (j.contains(key) && !j[key].is_null()) *field = j[key].get<double>();
  get("preset", o.preset);
  get("n", o.n);
  get("runs", o.runs);
  get("seed", o.seed);
  get("eps", o.eps);
  get("out", o.out);
  get("format", o.format);
  get("dataset", o.dataset);
  get("target", o.target);
  get("ridge", o.ridge);
  get("labels", o.labels);
  get("noise", o.noise);
  get("burn_in", o.burn_in);
  get("convention", o.convention);
  get("table", o.table);
  get("grid", o.grid);
  if (j.contains("tune")) o.tune = j["tune"];
  if (j.contains("configs"))
    for (const auto& c : j["configs"]) o.configs.push_back({c.at("alpha").get<double>(), c.at("beta").get<double>(), c.at("gamma").get<double>()});
}

json options_json(const Options& o) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json configs = json::array();
  for (const auto& t : o.configs) configs.push_back({{"alpha", t.alpha}, {"beta", t.beta}, {"gamma", t.gamma}});
  return {{"model", o.model},     {"mu", o.mu},         {"kappa", o.kappa},         {"alpha", opt(o.alpha)},
          {"beta", opt(o.beta)},  {"gamma", opt(o.gamma)}, {"preset", o.preset},   {"n", o.n},
          {"runs", o.runs},       {"seed", o.seed},     {"eps", o.eps},             {"out", o.out},
          {"format", o.format},   {"dataset", o.dataset}, {"target", o.target},   {"ridge", o.ridge},
          {"labels", o.labels},   {"noise", o.noise},   {"burn_in", o.burn_in},     {"convention", o.convention},
          {"table", o.table},     {"grid", o.grid},     {"tune", o.tune},           {"configs", configs}};
}

struct Setup {
  std::optional<MomentSpec> model;     // analytic (or empirical-diagnostic) model
  std::optional<EmpiricalModel> data;  // set for --dataset
  std::unique_ptr<DataSource> source;
  bool uniform_rademacher = false;
};

MomentSpec model_from_name(const Options& o, bool& uniform_rademacher) {
  if (o.model == "gaussian") return make_gaussian_model(Eigen::Vector2d(o.mu, 1.0));
  if (o.model == "uniform-rademacher" || o.model == "uniform-rademacher-unit") {
    uniform_rademacher = true;
    return make_uniform_rademacher_model(
        o.kappa, o.model == "uniform-rademacher" ? RademacherScale::half_variance : RademacherScale::unit);
  }
  if (std::filesystem::exists(o.model)) return load_model(o.model);
  throw ValidationError("--model: '" + o.model + "' is neither a preset (gaussian, uniform-rademacher, "
                        "uniform-rademacher-unit) nor an existing model file");
}

LabelModel labels_from(const Options& o, int d) {
  const Eigen::VectorXd wstar = Eigen::VectorXd::Ones(d);
  if (o.labels == "zero") return LabelModel::zero();
  if (o.labels == "realizable") return LabelModel::realizable(wstar);
  if (o.labels == "noisy") return LabelModel::linear_plus_noise(wstar, ScalarSampler::gaussian(o.noise));
  throw ValidationError("--labels must be zero, realizable or noisy");
}

Setup make_setup(const Options& o, bool need_source = true) {
  Setup s;
  if (!o.dataset.empty()) {
    s.data = ingest_dataset(o.dataset, {o.target, o.ridge, true});
    for (const auto& w : s.data->warnings) std::cerr << "warning: " << w << "\n";
    s.model = s.data->effective;
    if (need_source) s.source = std::make_unique<DatasetSource>(*s.data, "dataset:" + o.dataset);
    return s;
  }
  s.model = model_from_name(o, s.uniform_rademacher);
  if (need_source) s.source = std::make_unique<ModelSource>(*s.model, labels_from(o, s.model->dim()));
  return s;
}

Theta resolve_theta(const Options& o, const Setup& s) {
  const MomentSpec& m = *s.model;
  if (o.preset == "example8" || o.preset == "example11") {
    // Dataset runs use mu = ridge, the only certified lower eigenvalue.
    double p = s.data ? s.data->ridge : m.mu() / m.L();
    if (o.preset == "example11" && s.uniform_rademacher) p = o.kappa;
    const Preset pr = preset_theta(o.preset == "example8" ? PresetKind::gaussian : PresetKind::uniform_rademacher, p);
    if (pr.warning) std::cerr << "warning: " << *pr.warning << "\n";
    return pr.theta;
  }
  if (o.preset == "tuned") {
    const TuneConfig cfg = o.tune.empty() ? TuneConfig{} : tune_config_from_json(o.tune.dump());
    const TuneResult r = tune(m, cfg);
    if (!r.feasible) std::cerr << "warning: no feasible point on the tuning grid\n";
    return r.theta;
  }
  if (!o.preset.empty()) throw ValidationError("--preset must be example8, example11 or tuned");
  if (!o.alpha || !o.beta || !o.gamma) throw ValidationError("give --alpha, --beta and --gamma, or --preset");
  Theta th{*o.alpha, *o.beta, *o.gamma};
  th.validate();
  return th;
}

double default_eps(const Options& o, const MomentSpec& m) { return o.eps > 0.0 ? o.eps : 0.05 * std::sqrt(m.mu()); }

void print_theta(const Theta& t) {
  std::printf("theta: alpha=%.6g beta=%.6g gamma=%.6g\n", t.alpha, t.beta, t.gamma);
}

void sidecar(const Options& o, const std::string& path, json extra = json::object()) {
  json cfg = options_json(o);
  for (auto& [k, v] : extra.items()) cfg[k] = v;
  write_sidecar(path, o.seed, cfg.dump());
}

json theta_json(const Theta& t) { return {{"alpha", t.alpha}, {"beta", t.beta}, {"gamma", t.gamma}}; }

int cmd_simulate(const Options& o) {
  Setup s = make_setup(o, false);
  const Theta th = resolve_theta(o, s);
  print_theta(th);
  const OutputFormat fmt = output_format_from_string(o.format);
  if (s.data) {
    // Distance of w_k to the ridge solution on the standardized data.
    const auto& x = s.data->features;
    const double rows = static_cast<double>(x.rows());
    const Eigen::MatrixXd h = x.transpose() * x / rows + s.data->ridge * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    const Eigen::VectorXd wopt = h.ldlt().solve(x.transpose() * s.data->targets / rows);
    const DatasetSource src(*s.data);
    std::vector<double> mean(o.n + 1, 0.0);
    for (std::size_t r = 0; r < o.runs; ++r) {
      const ChainRun run = run_chain(src, th, ChainState::zero(static_cast<int>(x.cols())), o.n, run_seed(o.seed, r), 1);
      for (std::size_t k = 0; k <= o.n; ++k) mean[k] += (run.states[k].w_curr - wopt).squaredNorm() / static_cast<double>(o.runs);
    }
    std::printf("final mean ||w_n - w_ridge||^2 = %.6g\n", mean.back());
    if (!o.out.empty()) {
      emit_series(o.out, mean, fmt);
      sidecar(o, o.out, {{"theta", theta_json(th)}, {"model_id", src.id()}});
    }
    return kExitOk;
  }
  const MomentSpec& m = *s.model;
  const Eigen::VectorXd wstar = Eigen::VectorXd::Ones(m.dim());
  const RealizableResult r =
      run_realizable(m, wstar, th, o.n, o.runs, o.seed, ChainState::zero(m.dim()), default_eps(o, m));
  std::printf("runs: %zu, diverged: %zu\n", o.runs, r.diverged_runs);
  if (r.diverged) {
    std::fprintf(stderr, "divergence-dominated experiment\n");
    return kExitDiverged;
  }
  std::printf("E||u_n - (w*, w*)||^2 = %.6g (envelope %.6g, rho_eps = %.6g)\n", r.mean_sq.back(), r.envelope.back(),
              r.rho_eps);
  try {
    std::printf("fitted rate: %.6g\n", fit_exponential_rate(r.mean_sq, o.burn_in).rate);
  } catch (const FitError& e) {
    std::printf("fitted rate: n/a (%s)\n", e.what());
  }
  if (!o.out.empty()) {
    emit_series(o.out, r.mean_sq, fmt);
    emit_series(o.out + ".envelope.csv", r.envelope, OutputFormat::csv);
    sidecar(o, o.out, {{"theta", theta_json(th)}, {"model_id", m.id()}});
  }
  return kExitOk;
}

int cmd_couple(const Options& o) {
  Setup s = make_setup(o);
  const Theta th = resolve_theta(o, s);
  print_theta(th);
  const int d = s.source->dim();
  std::vector<CoupledTrajectory> batch;
  try {
    batch = run_coupled_batch(*s.source, th, ChainState::at(Eigen::VectorXd::Ones(d)), ChainState::zero(d), o.n, o.runs,
                              o.seed);
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDiverged;
  }
  std::vector<double> mean(o.n + 1, 0.0);
  for (const auto& t : batch)
    for (std::size_t k = 0; k <= o.n; ++k) mean[k] += t.sq_dist[k] / static_cast<double>(batch.size());
  try {
    const RateFit f = fit_exponential_rate(mean, o.burn_in);
    std::printf("empirical rate: %.6g (r^2 %.4f)\n", f.rate, f.r_squared);
  } catch (const FitError& e) {
    std::printf("empirical rate: n/a (%s)\n", e.what());
  }
  if (s.model) {
    std::printf("theoretical rate: %.6g (jblock), %.6g (rho_c)%s\n",
                theoretical_rate(*s.model, th, TheoryConvention::jblock),
                theoretical_rate(*s.model, th, TheoryConvention::rho_c), s.data ? ", empirical moments" : "");
  }
  if (!o.out.empty()) {
    emit_series(o.out, mean, output_format_from_string(o.format), "sq_dist");
    sidecar(o, o.out, {{"theta", theta_json(th)}, {"model_id", s.source->id()}, {"n", o.n}});
  }
  return kExitOk;
}

int cmd_analyze(const Options& o) {
  Setup s = make_setup(o, false);
  const MomentSpec& m = *s.model;
  const Theta th = resolve_theta(o, s);
  print_theta(th);
  const double eps = default_eps(o, m);
  const ContractionMatrix c = build_contraction_matrix(m, th);
  const SpectralReport full = analyze_matrix(c.mat, eps);
  const SpectralReport blk = jblock_mixing_bound(m, th, eps);
  json report{{"theta", theta_json(th)},
              {"model_id", m.id()},
              {"eps", eps},
              {"rho_c", full.rho},
              {"rho_eps_c", full.rho_eps},
              {"j_radii", blk.j_radii},
              {"jblock_bound", blk.rho_eps},
              {"perturbation_term", blk.perturbation_term},
              {"theoretical_rate_jblock", -std::log(*std::max_element(blk.j_radii.begin(), blk.j_radii.end()))},
              {"theoretical_rate_rho_c", -std::log(full.rho)}};
  if (s.data) report["diagnostic_only"] = "real data: moments are empirical; orthogonal mixing does not hold";
  std::cout << report.dump(2) << "\n";
  if (!o.out.empty()) {
    if (o.format == "json") {
      write_text_file(o.out, report.dump(2) + "\n");
    } else {
      const int g = o.grid > 0 ? o.grid : 101;
      const double r = std::max(1.0, full.rho_eps) * 1.1;
      emit_pseudospectrum(o.out, pseudospectrum_grid(c.mat, -r, r, -r, r, g, g));
    }
    sidecar(o, o.out, {{"theta", theta_json(th)}, {"model_id", m.id()}});
  }
  return kExitOk;
}

int cmd_tune(const Options& o) {
  Setup s = make_setup(o, false);
  const TuneConfig cfg = o.tune.empty() ? TuneConfig{} : tune_config_from_json(o.tune.dump());
  const TuneResult r = tune(*s.model, cfg);
  const std::string text = to_json(r);
  std::cout << text << "\n";
  if (!r.feasible) std::cerr << "warning: no feasible point; least-violating theta reported\n";
  if (!o.out.empty()) {
    write_text_file(o.out, text + "\n");
    sidecar(o, o.out, {{"tune_config", json::parse(to_json(cfg))}});
  }
  return kExitOk;
}

int cmd_table(Options o) {
  std::optional<MomentSpec> model;
  if (o.table == "gaussian") {
    model = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
    o.configs = {{2, 0.95, 0.1}, {2, 0.99, 0.1}, {3, 0.95, 0.1}, {2, 0.95, 0.01}};
  } else if (o.table == "uniform-rademacher") {
    model = make_uniform_rademacher_model(0.05);
    o.configs = {{2, 0.95, 2e-3}, {2, 0.99, 2e-3}, {3, 0.95, 2e-3}, {2, 0.95, 4e-4}};
  } else if (!o.table.empty()) {
    throw ValidationError("--table must be gaussian or uniform-rademacher");
  }
  Setup s;
  if (model) {
    s.model = model;
  } else {
    s = make_setup(o, false);
  }
  if (o.configs.empty()) o.configs.push_back(resolve_theta(o, s));

  TableOptions opt;
  opt.n = o.n;
  opt.runs = o.runs;
  opt.seed = o.seed;
  opt.burn_in = o.burn_in;
  opt.convention = theory_convention_from_string(o.convention);
  std::vector<RateRow> rows;
  if (s.data) {
    const DatasetSource src(*s.data, "dataset:" + o.dataset);
    for (const Theta& t : o.configs) rows.push_back(run_rate_row(src, t, opt));
  } else {
    rows = run_table(*s.model, o.configs, opt);
  }

  std::printf("%-10s %-8s %-10s %-14s %-12s %-14s %-10s %s\n", "alpha", "beta", "gamma", "empirical", "stderr",
              "theoretical", "rho(C)", "notes");
  for (const auto& r : rows)
    std::printf("%-10.4g %-8.4g %-10.4g %-14.6g %-12.3g %-14.6g %-10.6g %s\n", r.theta.alpha, r.theta.beta,
                r.theta.gamma, r.empirical_rate, r.empirical_stderr, r.theoretical_rate, r.rho_c, r.notes.c_str());
  if (!o.out.empty()) {
    emit_table(o.out, rows, output_format_from_string(o.format));
    sidecar(o, o.out, {{"model_id", s.model->id()}});
  }
  return divergence_dominated(rows) ? kExitDiverged : kExitOk;
}

int cmd_verify(const Options& o) {
  bool all = true;
  for (const auto& c : run_verification(o.seed)) {
    std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    all = all && c.passed;
  }
  return all ? kExitOk : kExitUsage;
}

int cmd_ingest(const Options& o) {
  if (o.dataset.empty()) throw ValidationError("ingest needs --dataset");
  const EmpiricalModel e = ingest_dataset(o.dataset, {o.target, o.ridge, true});
  for (const auto& w : e.warnings) std::cerr << "warning: " << w << "\n";
  std::printf("rows: %td, features: %td, global scale: %.6g, ridge: %.3g\n", e.features.rows(), e.features.cols(),
              e.global_scale, e.ridge);
  std::printf("%-4s %-14s %-14s %-14s\n", "i", "sigma", "k", "sigma+ridge");
  for (int i = 0; i < e.moments.dim(); ++i)
    std::printf("%-4d %-14.6g %-14.6g %-14.6g\n", i, e.moments.sigma()(i), e.moments.kurt()(i), e.effective.sigma()(i));
  if (!o.out.empty()) {
    save_model(o.out, e.effective);
    sidecar(o, o.out);
  }
  return kExitOk;
}

// --config is applied before the flags so that flags win.
std::optional<std::string> find_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  try {
    if (auto path = find_config(argc, argv)) apply_config_file(*path, o);
  } catch (const std::exception& e) {
    std::cerr << "error: --config: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"SAGD mixing-rate experiments"};
  app.require_subcommand(1);
  std::string config_path;

  auto common = [&](CLI::App* c) {
    c->add_option("--config", config_path, "JSON config; flags override it");
    c->add_option("--model", o.model, "gaussian | uniform-rademacher | uniform-rademacher-unit | model JSON path");
    c->add_option("--mu", o.mu, "smallest eigenvalue of the Gaussian preset (L = 1)");
    c->add_option("--kappa", o.kappa, "kappa of the uniform/Rademacher preset");
    c->add_option("--alpha", o.alpha, "extrapolation");
    c->add_option("--beta", o.beta, "momentum");
    c->add_option("--gamma", o.gamma, "stepsize");
    c->add_option("--preset", o.preset, "example8 | example11 | tuned");
    c->add_option("--n", o.n, "steps");
    c->add_option("--runs", o.runs, "independent runs");
    c->add_option("--seed", o.seed, "base seed");
    c->add_option("--eps", o.eps, "pseudospectral eps (0: 0.05 sqrt(mu))");
    c->add_option("--out", o.out, "output path");
    c->add_option("--format", o.format, "csv | json");
    c->add_option("--dataset", o.dataset, "numeric CSV with a header row");
    c->add_option("--target", o.target, "target column name (default: last column)");
    c->add_option("--ridge", o.ridge, "l2 penalty for dataset runs");
    c->add_option("--labels", o.labels, "zero | realizable | noisy");
    c->add_option("--noise", o.noise, "label noise variance for --labels noisy");
    c->add_option("--burn-in", o.burn_in, "fraction of steps skipped by rate fits");
    c->add_option("--convention", o.convention, "theoretical rate: jblock | rho_c");
  };

  auto* simulate = app.add_subcommand("simulate", "realizable-case convergence to (w*, w*)");
  auto* couple = app.add_subcommand("couple", "coupled chains, mean squared distance");
  auto* analyze = app.add_subcommand("analyze", "C matrix spectra and pseudospectrum");
  auto* tune_cmd = app.add_subcommand("tune", "grid search for Theta");
  auto* table = app.add_subcommand("table", "empirical vs theoretical rate table");
  auto* verify = app.add_subcommand("verify", "oracle and bound self-checks");
  auto* ingest = app.add_subcommand("ingest", "empirical moments of a CSV dataset");
  for (auto* c : {simulate, couple, analyze, tune_cmd, table, verify, ingest}) common(c);
  analyze->add_option("--grid", o.grid, "pseudospectrum grid points per axis");
  table->add_option("--table", o.table, "reference configs: gaussian | uniform-rademacher");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (o.runs < 1) throw ValidationError("--runs must be >= 1");
    if (*simulate) return cmd_simulate(o);
    if (*couple) return cmd_couple(o);
    if (*analyze) return cmd_analyze(o);
    if (*tune_cmd) return cmd_tune(o);
    if (*table) return cmd_table(o);
    if (*verify) return cmd_verify(o);
    if (*ingest) return cmd_ingest(o);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
