#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/harness.hpp"
#include "sagdmix/io.hpp"
#include "sagdmix/spectral.hpp"
#include "sagdmix/tuner.hpp"

using namespace sagdmix;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("sagdmix_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST(RateFit, ExactExponential) {
  std::vector<double> v(200);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = 3.0 * std::exp(-0.05 * static_cast<double>(k));
  auto f = fit_exponential_rate(v);
  EXPECT_NEAR(f.rate, 0.05, 1e-10);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_EQ(f.points, 180u);
}

TEST(RateFit, Constant) {
  auto f = fit_exponential_rate(std::vector<double>(50, 2.5));
  EXPECT_EQ(f.rate, 0.0);
  EXPECT_EQ(f.stderr_rate, 0.0);
  EXPECT_EQ(f.r_squared, 1.0);
}

TEST(RateFit, TrimsUnderflowTail) {
  std::vector<double> v;
  for (int k = 0; k < 40; ++k) v.push_back(std::exp(-0.5 * k));
  v.insert(v.end(), 30, 0.0);
  v.push_back(1e-300);
  EXPECT_NEAR(fit_exponential_rate(v).rate, 0.5, 1e-10);
}

TEST(RateFit, Errors) {
  EXPECT_THROW(fit_exponential_rate(std::vector<double>(9, 1.0), 0.0), FitError);
  EXPECT_THROW(fit_exponential_rate(std::vector<double>(100, 0.0)), FitError);
  EXPECT_THROW(fit_exponential_rate(std::vector<double>(100, 1.0), 1.0), ValidationError);
}

TEST(Table, TheoreticalColumnIsPure) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
  Theta th{2, 0.95, 0.1};
  EXPECT_EQ(theoretical_rate(m, th, TheoryConvention::jblock), theoretical_rate(m, th, TheoryConvention::jblock));
  EXPECT_EQ(theoretical_rate(m, th, TheoryConvention::rho_c),
            -std::log(spectral_radius(build_contraction_matrix(m, th).mat)));
  TableOptions opt;
  opt.n = 200;
  opt.runs = 3;
  auto a = run_table(m, {th}, opt), b = run_table(m, {th}, opt);
  EXPECT_EQ(a[0].theoretical_rate, b[0].theoretical_rate);
  EXPECT_EQ(a[0].empirical_rate, b[0].empirical_rate);
  EXPECT_EQ(a[0].empirical_stderr, b[0].empirical_stderr);
  EXPECT_GT(a[0].empirical_stderr, 0.0);
}

TEST(Table, SgdBaselineMatchesClosedForm) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
  const double g = 0.3;
  TableOptions opt;
  opt.n = 1000;
  opt.runs = 10;
  opt.seed = 11;
  auto rows = run_table(m, {Theta{0, 0, g}}, opt);
  const double expected = -std::log(spectral_radius(sgd_contraction_matrix(m, g)));
  EXPECT_NEAR(rows[0].empirical_rate, expected, 0.2 * expected);
  EXPECT_NEAR(rows[0].rho_c, spectral_radius(sgd_contraction_matrix(m, g)), 1e-12);
}

TEST(Table, DivergenceIsPerRow) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
  TableOptions opt;
  opt.n = 3000;
  opt.runs = 2;
  auto rows = run_table(m, {Theta{2, 0.95, 0.1}, Theta{0, 0.9, 5.0}}, opt);
  EXPECT_FALSE(rows[0].diverged);
  EXPECT_TRUE(rows[1].diverged);
  EXPECT_EQ(rows[1].diverged_runs, 2u);
  EXPECT_TRUE(std::isnan(rows[1].empirical_rate));
  EXPECT_TRUE(divergence_dominated(rows));
  EXPECT_FALSE(divergence_dominated({rows[0]}));
}

TEST(Realizable, DiracStartStaysZero) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.1, 1.0));
  Eigen::Vector2d ws(0.5, -2.0);
  auto r = run_realizable(m, ws, Theta{2, 0.9, 0.1}, 10000, 2, 3, ChainState::at(ws));
  for (double v : r.mean_sq) ASSERT_EQ(v, 0.0);
}

TEST(Realizable, PresetBeatsGuaranteeAndSgd) {
  const double mu = 0.01;
  auto m = make_gaussian_model(Eigen::Vector2d(mu, 1.0));
  Eigen::Vector2d ws(1.0, -1.0);
  const ChainState init = ChainState::zero(2);
  auto sagd = run_realizable(m, ws, preset_theta(PresetKind::gaussian, mu).theta, 3000, 5, 7, init,
                             0.05 * std::sqrt(mu));
  const double r_sagd = fit_exponential_rate(sagd.mean_sq).rate;
  EXPECT_GE(r_sagd, -std::log(1.0 - std::sqrt(mu) / 5.0));
  for (std::size_t k = 0; k < sagd.mean_sq.size(); ++k) ASSERT_LE(sagd.mean_sq[k], sagd.envelope[k]) << k;

  const auto best = tune_sgd(m);
  EXPECT_LT(best.rho, spectral_radius(build_contraction_matrix(m, Theta{0, 0, best.gamma}).mat) + 1e-12);
  auto sgd = run_realizable(m, ws, Theta{0, 0, best.gamma}, 3000, 5, 7, init);
  EXPECT_LT(fit_exponential_rate(sgd.mean_sq).rate, r_sagd);
}

TEST(Ingest, RademacherColumn) {
  TempDir dir;
  std::string csv = "x,y\n";
  for (int i = 0; i < 50; ++i) csv += (i % 2 ? "1," : "-1,") + std::to_string(i) + "\n";
  write(dir.file("r.csv"), csv);
  auto e = ingest_dataset(dir.file("r.csv"), {"y", 0.0, true});
  EXPECT_NEAR(e.moments.sigma()(0), 1.0, 1e-14);
  EXPECT_NEAR(e.moments.kurt()(0), 1.0, 1e-14);
  EXPECT_EQ(e.global_scale, 1.0);
}

TEST(Ingest, GaussianRoundTrip) {
  TempDir dir;
  auto m = rotate_model(make_gaussian_model(Eigen::Vector2d(0.2, 0.8)), rotation2d(0.4));
  Rng rng(5);
  std::string csv = "a,b,target\n";
  for (int i = 0; i < 40000; ++i) {
    auto x = sample_input(m, rng);
    csv += format_double(x(0)) + "," + format_double(x(1)) + ",0\n";
  }
  write(dir.file("g.csv"), csv);
  auto e = ingest_dataset(dir.file("g.csv"), {"target", 0.0, false});
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(e.moments.sigma()(i), m.sigma()(i), 0.03 * m.sigma()(i));
    EXPECT_NEAR(e.moments.kurt()(i), m.kurt()(i), 0.08 * m.kurt()(i));
  }
  EXPECT_NEAR(std::abs(e.moments.basis().col(1).dot(m.basis().col(1))), 1.0, 1e-3);
}

TEST(Ingest, StandardizesDropsAndAddsRidge) {
  TempDir dir;
  std::string csv = "a,const,b,c,y\n";
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const double a = 10.0 + 3.0 * rng.normal(), b = rng.normal();
    csv += format_double(a) + ",4," + format_double(b) + "," + format_double(0.9 * b + 0.1 * rng.normal()) + "," +
           format_double(a - b) + "\n";
  }
  write(dir.file("d.csv"), csv);
  auto e = ingest_dataset(dir.file("d.csv"), {"y", 1e-3, true});
  ASSERT_EQ(e.warnings.size(), 1u);
  EXPECT_NE(e.warnings[0].find("const"), std::string::npos);
  EXPECT_EQ(e.feature_names, (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_LE(e.moments.L(), 1.0 + 1e-12);
  EXPECT_LT(e.global_scale, 1.0);
  EXPECT_NEAR(e.features.colwise().mean().cwiseAbs().maxCoeff(), 0.0, 1e-12);
  EXPECT_GE(e.effective.mu(), 1e-3);
  EXPECT_NEAR(e.effective.mu() - e.moments.mu(), 1e-3, 1e-15);

  DatasetSource src(e);
  EXPECT_EQ(src.ridge(), 1e-3);
  TableOptions opt;
  opt.n = 300;
  opt.runs = 2;
  auto row = run_rate_row(src, preset_theta(PresetKind::gaussian, 0.02).theta, opt);
  EXPECT_FALSE(row.diverged);
  EXPECT_TRUE(std::isfinite(row.empirical_rate));
}

TEST(Ingest, Errors) {
  TempDir dir;
  write(dir.file("bad.csv"), "a,y\n1,2\nfoo,3\n");
  try {
    ingest_dataset(dir.file("bad.csv"), {"y", 0.0, true});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  write(dir.file("col.csv"), "a,b,y\n1,2,0\n2,4,1\n3,6,0\n");
  EXPECT_THROW(ingest_dataset(dir.file("col.csv"), {"y", 0.0, true}), ValidationError);
  EXPECT_THROW(ingest_dataset(dir.file("col.csv"), {"nope", 0.0, true}), ValidationError);
  EXPECT_THROW(ingest_dataset(dir.file("missing.csv"), {"y", 0.0, true}), IoError);
}

TEST(StrongGrowth, MonteCarloAgrees) {
  auto m = rotate_model(make_gaussian_model(Eigen::Vector2d(0.05, 1.0)), rotation2d(0.3));
  auto s = estimate_strong_growth(m, 400000, 21);
  EXPECT_NEAR(s.analytic, 2.0 + 1.05 / 0.05, 1e-12);
  EXPECT_LE(std::abs(s.mc_mean - s.analytic), 3.0 * s.mc_stderr);
}

TEST(Emit, TableRoundTrip) {
  TempDir dir;
  RateRow r;
  r.theta = {2, 0.95, 0.1};
  r.empirical_rate = 0.06051234567890123;
  r.empirical_stderr = 1.0 / 3.0;
  r.theoretical_rate = std::exp(-3.0);
  emit_table(dir.file("t.csv"), {r, r});
  auto back = read_table_csv(dir.file("t.csv"));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].theta, r.theta);
  EXPECT_EQ(back[1].empirical_rate, r.empirical_rate);
  EXPECT_EQ(back[1].empirical_stderr, r.empirical_stderr);
  EXPECT_EQ(back[1].theoretical_rate, r.theoretical_rate);

  emit_table(dir.file("e.csv"), {});
  EXPECT_EQ(read_text_file(dir.file("e.csv")), "alpha,beta,gamma,empirical_rate,empirical_stderr,theoretical_rate\n");
  emit_table(dir.file("t.json"), {r}, OutputFormat::json);
  EXPECT_NE(read_text_file(dir.file("t.json")).find("\"theoretical_rate\""), std::string::npos);
}

TEST(Emit, SeriesRoundTripAndSidecar) {
  TempDir dir;
  std::vector<double> v{1.0, 0.1, 1e-17, 3.141592653589793, 2.5e-300};
  emit_series(dir.file("s.csv"), v, OutputFormat::csv, "sq_dist");
  EXPECT_EQ(read_text_file(dir.file("s.csv")).substr(0, 13), "step,sq_dist\n");
  EXPECT_EQ(read_series_csv(dir.file("s.csv")), v);
  write_sidecar(dir.file("s.csv"), 987654321, "{\"n\": 4}");
  const auto side = read_text_file(dir.file("s.csv") + ".json");
  EXPECT_NE(side.find("987654321"), std::string::npos);
  EXPECT_NE(side.find(std::string(library_version())), std::string::npos);
  EXPECT_THROW(emit_series("/nonexistent_dir/x.csv", v), IoError);
}

TEST(Emit, Pseudospectrum) {
  TempDir dir;
  Eigen::Matrix2d m;
  m << 0.5, 1.0, 0.0, 0.5;
  auto grid = pseudospectrum_grid(m, -1, 1, -1, 1, 5, 5);
  emit_pseudospectrum(dir.file("p.csv"), grid);
  auto t = read_csv(dir.file("p.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"re", "im", "sigma_min"}));
  EXPECT_EQ(t.rows.size(), grid.size());
}

TEST(ModelFile, RoundTrip) {
  auto m = rotate_model(make_custom_model(Eigen::MatrixXd::Identity(2, 2),
                                          {ScalarSampler::three_point(1.5, 0.3), ScalarSampler::uniform(2.0)}),
                        rotation2d(0.8));
  auto back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.samplers(), m.samplers());
  EXPECT_TRUE(back.basis().isApprox(m.basis(), 1e-15));
  EXPECT_EQ(back.sigma(), m.sigma());

  auto moments_only = MomentSpec::from_moments(m.basis(), m.sigma(), m.kurt(), "plain");
  auto b2 = model_from_json(model_to_json(moments_only));
  EXPECT_FALSE(b2.can_sample());
  EXPECT_EQ(b2.kurt(), m.kurt());

  EXPECT_THROW(model_from_json(R"({"dim": 1, "basis": [1], "sigma": [2], "kurt": [12],
                                   "samplers": [{"kind": "gaussian", "params": {"variance": 1}}]})"),
               ValidationError);
  EXPECT_THROW(model_from_json(R"({"dim": 2, "basis": [1, 0, 0], "sigma": [1, 2], "kurt": [3, 12]})"),
               ValidationError);
  EXPECT_THROW(model_from_json("{"), ValidationError);
}

TEST(Verify, AllChecksPass) {
  for (const auto& c : run_verification(4)) EXPECT_TRUE(c.passed) << c.name << ": " << c.detail;
}
