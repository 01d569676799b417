#include <benchmark/benchmark.h>

#include <dgp/distributed.hpp>
#include <dgp/gp.hpp>
#include <dgp/kernels.hpp>
#include <dgp/synth.hpp>

namespace {

dgp::SyntheticDataset make_data(long N, std::uint64_t seed = 42) {
    return dgp::generate(N, dgp::TruthSpec::paper_f0(), 1.0, seed);
}

void BM_GramMatern(benchmark::State& state) {
    const long n = state.range(0);
    auto ds = make_data(n);
    auto spec = dgp::KernelSpec::matern12(1.0);
    for (auto _ : state) benchmark::DoNotOptimize(dgp::gram(spec, ds.X, ds.X));
    state.SetComplexityN(n);
}
BENCHMARK(BM_GramMatern)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_GramSqExp(benchmark::State& state) {
    const long n = state.range(0);
    auto ds = make_data(n);
    auto spec = dgp::KernelSpec::squared_exp(10.0);
    for (auto _ : state) benchmark::DoNotOptimize(dgp::gram(spec, ds.X, ds.X));
    state.SetComplexityN(n);
}
BENCHMARK(BM_GramSqExp)->Range(64, 1024)->Complexity(benchmark::oNSquared);

void BM_ExactPosterior(benchmark::State& state) {
    const long n = state.range(0);
    auto ds = make_data(n);
    auto spec = dgp::KernelSpec::matern12(1.0);
    auto grid = dgp::GridSpec::uniform(200);
    for (auto _ : state)
        benchmark::DoNotOptimize(dgp::exact_posterior(spec, ds.X, ds.Y, 1.0, grid));
    state.SetComplexityN(n);
}
BENCHMARK(BM_ExactPosterior)->Range(64, 1024)->Complexity(benchmark::oNCubed);

void BM_Barycenter(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));
    const long n = 50;
    auto ds = make_data(n * m);
    auto spec = dgp::KernelSpec::matern12(1.0);
    auto grid = dgp::GridSpec::uniform(100);
    dgp::Rng rng = dgp::make_rng(7);
    auto shards = dgp::shard(ds.X, ds.Y, m, rng);
    std::vector<Eigen::MatrixXd> covs;
    for (const auto& sh : shards) {
        auto post = dgp::local_posterior(dgp::SchemeId::MethodII, spec, sh, 1.0, m, grid);
        post.cov.diagonal().array() += 1e-10 * post.cov.trace() / grid.size();
        covs.push_back(post.cov);
    }
    dgp::BarycenterOptions opts;
    for (auto _ : state)
        benchmark::DoNotOptimize(dgp::gaussian_barycenter(covs, opts));
}
BENCHMARK(BM_Barycenter)->Arg(2)->Arg(5)->Arg(10);

void BM_RunScheme(benchmark::State& state) {
    const long N = state.range(0);
    auto ds = make_data(N);
    auto spec = dgp::KernelSpec::matern12(1.0);
    auto grid = dgp::GridSpec::uniform(200);
    for (auto _ : state) {
        dgp::Rng rng = dgp::make_rng(7);
        benchmark::DoNotOptimize(
            dgp::run_scheme(dgp::SchemeId::MethodI, spec, ds.X, ds.Y, 1.0, 10, grid, rng));
    }
}
BENCHMARK(BM_RunScheme)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
