#include <benchmark/benchmark.h>

#include <array>
#include <random>

#include "lgpc/citest.hpp"
#include "lgpc/conddens.hpp"
#include "lgpc/locallik.hpp"
#include "lgpc/partial.hpp"
#include "lgpc/transform.hpp"

namespace {

using namespace lgpc;

Eigen::MatrixXd normal_sample(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double common = g(rng);
        for (Eigen::Index j = 0; j < p; ++j) x(i, j) = 0.5 * common + g(rng);
    }
    return x;
}

constexpr std::array<Eigen::Index, 3> kCols{0, 1, 2};

void BM_LocalMoments(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const PseudoSample s = to_pseudo_normal(normal_sample(n, 3, 1));
    const Bandwidth b = plugin_bandwidth(static_cast<std::size_t>(n), 1.75, FitMode::trivariate, 3);
    const Eigen::VectorXd bw = Eigen::VectorXd::Constant(3, b.scalar());
    const Eigen::Vector3d point(0.3, -0.2, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(local_moments(s.z, kCols, point, bw));
    state.SetComplexityN(n);
}
BENCHMARK(BM_LocalMoments)->RangeMultiplier(4)->Range(256, 16384)->Complexity();

void BM_FitLocalTrivariate(benchmark::State& state) {
    const auto n = static_cast<Eigen::Index>(state.range(0));
    const PseudoSample s = to_pseudo_normal(normal_sample(n, 3, 2));
    const Bandwidth b = plugin_bandwidth(static_cast<std::size_t>(n), 1.75, FitMode::trivariate, 3);
    const Eigen::VectorXd bw = Eigen::VectorXd::Constant(3, b.scalar());
    FitOptions opts;
    opts.global = global_mle_correlation(s.z, kCols);
    const Eigen::Vector3d point(0.3, -0.2, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(fit_local(s.z, kCols, point, bw, opts));
}
BENCHMARK(BM_FitLocalTrivariate)->Arg(100)->Arg(500)->Arg(2000);

void BM_LgpcWithVariance(benchmark::State& state) {
    const PseudoSample s = to_pseudo_normal(normal_sample(500, 3, 3));
    const LocalCorrelationEstimator est(s.z, plugin_bandwidth(500, 1.75, FitMode::trivariate, 3));
    const Eigen::Vector3d point(0.0, 0.5, -0.5);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_lgpc(est, point, Method::trivariate, true));
}
BENCHMARK(BM_LgpcWithVariance);

void BM_TestStatistic(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const PseudoSample s = to_pseudo_normal(normal_sample(static_cast<Eigen::Index>(n), 3, 4));
    const TestConfig cfg;
    const Bandwidth b = statistic_bandwidth(n, 3, cfg.c, Method::trivariate);
    for (auto _ : state) benchmark::DoNotOptimize(test_statistic(s.z, cfg, b, Method::trivariate));
}
BENCHMARK(BM_TestStatistic)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ConditionalDensity(benchmark::State& state) {
    const PseudoSample s = to_pseudo_normal(normal_sample(200, 3, 5));
    const Bandwidth b = plugin_bandwidth(200, 1.0, FitMode::pairwise, 3);
    const LocalCorrelationEstimator est(s.z, b);
    const std::array<Eigen::Index, 1> cond{2};
    const Eigen::VectorXd value = Eigen::VectorXd::Constant(1, 0.4);
    for (auto _ : state) benchmark::DoNotOptimize(estimate_conditional_density(est, 0, cond, value));
}
BENCHMARK(BM_ConditionalDensity)->Unit(benchmark::kMicrosecond);

void BM_AcceptReject(benchmark::State& state) {
    const PseudoSample s = to_pseudo_normal(normal_sample(200, 3, 6));
    const std::array<Eigen::Index, 1> cond{2};
    const ConditionalDensity d = estimate_conditional_density(s, 0, cond, Eigen::VectorXd::Constant(1, 0.4),
                                                              plugin_bandwidth(200, 1.0, FitMode::pairwise, 3));
    Rng rng = make_stream(7, 0);
    for (auto _ : state) benchmark::DoNotOptimize(sample_accept_reject(d, 200, rng));
}
BENCHMARK(BM_AcceptReject);

void BM_CiTest(benchmark::State& state) {
    const Eigen::MatrixXd x = normal_sample(100, 3, 8);
    TestConfig cfg;
    cfg.B = 20;
    for (auto _ : state) benchmark::DoNotOptimize(ci_test(x, cfg));
}
BENCHMARK(BM_CiTest)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
