#include <cmath>

#include <gtest/gtest.h>

#include "sagdmix/contraction.hpp"
#include "sagdmix/errors.hpp"
#include "sagdmix/spectral.hpp"
#include "sagdmix/tuner.hpp"

using namespace sagdmix;

TEST(GridAxis, Values) {
  auto a = GridAxis::linear(0.0, 4.0, 0.25).values();
  ASSERT_EQ(a.size(), 17u);
  EXPECT_DOUBLE_EQ(a.back(), 4.0);
  auto b = GridAxis::linear(0.0, 0.999, 0.005).values();
  EXPECT_DOUBLE_EQ(b.back(), 0.999);
  EXPECT_NEAR(b[b.size() - 2], 0.995, 1e-12);
  auto g = GridAxis::logspace(1e-4, 1.0, 33).values();
  ASSERT_EQ(g.size(), 33u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-4);
  EXPECT_DOUBLE_EQ(g.back(), 1.0);
  EXPECT_NEAR(g[8], 1e-3, 1e-15);
  GridAxis e = GridAxis::linear(0, 1, 0.5);
  e.extra = {0.25, 0.5};
  EXPECT_EQ(e.values(), (std::vector<double>{0, 0.25, 0.5, 1.0}));
}

TEST(Presets, ReferenceValues) {
  auto g = preset_theta(PresetKind::gaussian, 0.01);
  EXPECT_EQ(g.theta.alpha, 2.0);
  EXPECT_NEAR(g.theta.beta, 1.0 - std::sqrt(0.1) * 0.1, 1e-15);
  EXPECT_EQ(g.theta.gamma, 0.1);
  EXPECT_FALSE(g.warning);
  auto u = preset_theta(PresetKind::uniform_rademacher, 0.02);
  EXPECT_NEAR(u.theta.beta, 1.0 - std::sqrt(0.02 / 10.0), 1e-15);
  EXPECT_NEAR(u.theta.gamma, 0.002, 1e-18);
  auto w = preset_theta(PresetKind::gaussian, 0.5);
  EXPECT_TRUE(w.warning);
  EXPECT_NEAR(w.theta.beta, 1.0 - std::sqrt(0.05), 1e-15);
}

TEST(Presets, FeasibleForSmallParameters) {
  TuneConfig cfg;
  for (double p : {0.005, 0.01, 0.02}) {
    auto g = make_gaussian_model(Eigen::Vector2d(p, 1.0));
    EXPECT_TRUE(evaluate_theta(g, cfg, preset_theta(PresetKind::gaussian, p).theta).feasible) << p;
    auto u = make_uniform_rademacher_model(p);
    EXPECT_TRUE(evaluate_theta(u, cfg, preset_theta(PresetKind::uniform_rademacher, p).theta).feasible) << p;
  }
}

TEST(Tune, GaussianBeatsPreset) {
  const double mu = 0.01;
  auto m = make_gaussian_model(Eigen::Vector2d(mu, 1.0));
  TuneConfig cfg;
  auto r = tune(m, cfg);
  EXPECT_TRUE(r.feasible);
  EXPECT_LE(r.constraint_value, r.constraint_bound + 1e-12);
  auto preset = evaluate_theta(m, cfg, preset_theta(PresetKind::gaussian, mu).theta);
  EXPECT_LE(r.objective_value, preset.objective_value);
  EXPECT_LE(r.objective_value, 1.0 - std::sqrt(mu) / 5.0);
  EXPECT_NEAR(r.objective_value, jblock_radius(make_gaussian_model(Eigen::VectorXd::Constant(1, mu)), r.theta), 1e-12);
}

TEST(Tune, ExhaustiveOnFinalGrid) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
  TuneConfig cfg;
  cfg.alpha = GridAxis::linear(0, 3, 0.5);
  cfg.beta = GridAxis::linear(0, 0.95, 0.05);
  cfg.gamma = GridAxis::logspace(1e-2, 1, 9);
  cfg.refine_rounds = 0;
  cfg.include_preset_beta = false;
  auto r = tune(m, cfg);
  EXPECT_EQ(r.evaluations, 7u * 20u * 9u);
  for (double g : cfg.gamma.values())
    for (double b : cfg.beta.values())
      for (double a : cfg.alpha.values()) {
        auto e = evaluate_theta(m, cfg, Theta{a, b, g});
        if (e.feasible) EXPECT_LE(r.objective_value, e.objective_value);
      }
}

TEST(Tune, SupersetNeverWorse) {
  auto m = make_uniform_rademacher_model(0.05);
  TuneConfig small;
  small.alpha = GridAxis::linear(0, 2, 1);
  small.beta = GridAxis::linear(0, 0.9, 0.1);
  small.gamma = GridAxis::logspace(1e-3, 1e-1, 5);
  small.refine_rounds = 0;
  TuneConfig big = small;
  big.alpha = GridAxis::linear(0, 2, 0.5);
  big.beta = GridAxis::linear(0, 0.95, 0.05);
  big.gamma = GridAxis::logspace(1e-3, 1e-1, 9);
  auto rs = tune(m, small), rb = tune(m, big);
  ASSERT_TRUE(rs.feasible);
  EXPECT_LE(rb.objective_value, rs.objective_value);
}

TEST(Tune, IsotropicBlocksCoincide) {
  auto m = make_gaussian_model(Eigen::Vector2d(1.0, 1.0));
  TuneConfig cfg;
  cfg.refine_rounds = 0;
  cfg.alpha = GridAxis::linear(0, 2, 0.5);
  cfg.beta = GridAxis::linear(0, 0.9, 0.1);
  cfg.gamma = GridAxis::logspace(1e-2, 1, 5);
  auto r = tune(m, cfg);
  EXPECT_TRUE(r.feasible);
  EXPECT_DOUBLE_EQ(r.objective_value, r.constraint_value);
}

TEST(Tune, InfeasibleReportsLeastViolating) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.01, 1.0));
  TuneConfig cfg;
  cfg.constraint_c = 1e6;
  cfg.refine_rounds = 0;
  cfg.alpha = GridAxis::linear(0, 2, 1);
  cfg.beta = GridAxis::linear(0, 0.9, 0.3);
  cfg.gamma = GridAxis::logspace(1e-2, 1, 5);
  auto r = tune(m, cfg);
  EXPECT_FALSE(r.feasible);
  for (double g : cfg.gamma.values())
    for (double b : cfg.beta.values())
      for (double a : cfg.alpha.values())
        EXPECT_LE(r.constraint_value, evaluate_theta(m, cfg, Theta{a, b, g}).constraint_value);
}

TEST(Tune, SinglePointGrid) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.1, 1.0));
  TuneConfig cfg;
  cfg.refine_rounds = 0;
  cfg.alpha = GridAxis::linear(1, 1, 0);
  cfg.beta = GridAxis::linear(0.5, 0.5, 0);
  cfg.gamma = GridAxis::linear(0.1, 0.1, 0);
  cfg.include_preset_beta = false;
  auto r = tune(m, cfg);
  EXPECT_EQ(r.evaluations, 1u);
  EXPECT_EQ(r.theta, (Theta{1, 0.5, 0.1}));
}

TEST(Tune, SwapIndicesExchangesBlocks) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.05, 1.0));
  TuneConfig cfg;
  cfg.swap_indices = true;
  Theta th{2, 0.9, 0.1};
  auto e = evaluate_theta(m, cfg, th);
  auto blocks = build_J_blocks(m, th);
  EXPECT_NEAR(e.objective_value, spectral_radius(blocks[1]), 1e-12);
  EXPECT_NEAR(e.constraint_value, spectral_radius(blocks[0]), 1e-12);
}

TEST(Tune, Validation) {
  TuneConfig cfg;
  cfg.beta = GridAxis::linear(0, 1.0, 0.1);
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.constraint_c = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  EXPECT_THROW(tune_objective_from_string("fastest"), ValidationError);
}

TEST(Tune, JsonRoundTrip) {
  TuneConfig cfg;
  cfg.objective = TuneObjective::rho_c;
  cfg.refine_rounds = 1;
  cfg.gamma = GridAxis::logspace(1e-3, 0.5, 7);
  auto back = tune_config_from_json(to_json(cfg));
  EXPECT_EQ(back.objective, cfg.objective);
  EXPECT_EQ(back.refine_rounds, 1);
  EXPECT_EQ(back.gamma.values(), cfg.gamma.values());
  EXPECT_THROW(tune_config_from_json("{\"objective\": 3"), ValidationError);
}

TEST(TuneSgd, BestStepsize) {
  auto m = make_gaussian_model(Eigen::Vector2d(0.01, 1.0));
  auto r = tune_sgd(m);
  EXPECT_GT(r.gamma, 0.0);
  EXPECT_LT(r.rho, 1.0);
  for (double g : GridAxis::logspace(1e-4, 1.0, 33).values())
    EXPECT_LE(r.rho, spectral_radius(sgd_contraction_matrix(m, g)));
}
