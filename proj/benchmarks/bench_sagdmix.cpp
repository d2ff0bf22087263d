#include <benchmark/benchmark.h>

#include "sagdmix/chains.hpp"
#include "sagdmix/contraction.hpp"
#include "sagdmix/moments.hpp"
#include "sagdmix/spectral.hpp"
#include "sagdmix/tuner.hpp"

using namespace sagdmix;

namespace {

MomentSpec model_of(int d) {
  Eigen::VectorXd sigma = Eigen::VectorXd::LinSpaced(d, 0.05, 1.0);
  return make_gaussian_model(sigma);
}

const Theta kTheta{2.0, 0.95, 0.1};

}  // namespace

static void BM_SagdStep(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const auto m = model_of(d);
  Rng rng(1);
  ChainState s = ChainState::at(Eigen::VectorXd::Ones(d));
  Eigen::VectorXd x = sample_input(m, rng);
  for (auto _ : state) {
    sagd_step_inplace(s, x, 0.0, kTheta);
    if (!s.finite()) s = ChainState::at(Eigen::VectorXd::Ones(d));
    benchmark::DoNotOptimize(s.w_curr.data());
  }
}
BENCHMARK(BM_SagdStep)->Arg(2)->Arg(16)->Arg(128);

static void BM_CoupledChains(benchmark::State& state) {
  const auto m = model_of(2);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto t = run_coupled_chains(m, LabelModel::zero(), kTheta, ChainState::at(Eigen::Vector2d::Ones()),
                                ChainState::zero(2), static_cast<std::size_t>(state.range(0)), ++seed);
    benchmark::DoNotOptimize(t.sq_dist.back());
  }
}
BENCHMARK(BM_CoupledChains)->Arg(1000)->Unit(benchmark::kMicrosecond);

static void BM_BuildContraction(benchmark::State& state) {
  const auto m = model_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(build_contraction_matrix(m, kTheta).mat.data());
}
BENCHMARK(BM_BuildContraction)->Arg(2)->Arg(10)->Arg(50);

static void BM_EvolveSecondMoment(benchmark::State& state) {
  const auto c = build_contraction_matrix(model_of(static_cast<int>(state.range(0))), kTheta);
  for (auto _ : state) benchmark::DoNotOptimize(evolve_second_moment(c, 1000).a.data());
}
BENCHMARK(BM_EvolveSecondMoment)->Arg(2)->Arg(10)->Unit(benchmark::kMicrosecond);

static void BM_PseudospectralRadius(benchmark::State& state) {
  const auto c = build_contraction_matrix(model_of(static_cast<int>(state.range(0))), kTheta);
  for (auto _ : state) benchmark::DoNotOptimize(pseudospectral_radius(c.mat, 0.01));
}
BENCHMARK(BM_PseudospectralRadius)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_JblockBound(benchmark::State& state) {
  const auto m = model_of(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(jblock_mixing_bound(m, kTheta, 0.01).rho_eps);
}
BENCHMARK(BM_JblockBound)->Arg(2)->Arg(10)->Unit(benchmark::kMicrosecond);

static void BM_TuneDefaultGrid(benchmark::State& state) {
  const auto m = model_of(2);
  TuneConfig cfg;
  cfg.refine_rounds = 0;
  for (auto _ : state) benchmark::DoNotOptimize(tune(m, cfg).objective_value);
}
BENCHMARK(BM_TuneDefaultGrid)->Unit(benchmark::kMillisecond)->Iterations(3);
BENCHMARK_MAIN();
