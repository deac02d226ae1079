// Serial reference kernels against their OpenMP versions on the tKdV likelihood,
// which dominates a filter step (one RK4 step per particle).
#include "tkdv/kernels.hpp"
#include "tkdv/scenarios.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace tkdv;

struct Fixture {
    TkdvParameterModel model = tkdv_parameter_model(LinearObservation::identity(32), 0.01, 1e-3, 1e-4);
    ObservationSeries obs;
    std::vector<double> proxy;
    ParticleEnsemble ensemble;

    explicit Fixture(std::size_t particles) {
        const auto truth = generate_tkdv_truth(DepthSchedule{{{0.001, 0.24}}, {}}, 1e-4, 1, 1e-3);
        obs = observe(truth, LinearObservation::identity(32), 0.01, 1);
        proxy = model.proxy_state(obs.observations[0]);
        ensemble = init_ensemble(std::vector<double>{0.0236, 0.1965}, std::vector<double>{0.1, 0.5}, particles, 1);
    }
};

void likelihoods(benchmark::State& state, bool parallel) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    std::vector<double> out(f.ensemble.size());
    for (auto _ : state) {
        if (parallel)
            kernels::log_likelihoods_parallel(f.model, f.proxy, f.obs.observations[1], f.ensemble.particles, 2, out);
        else
            kernels::log_likelihoods_serial(f.model, f.proxy, f.obs.observations[1], f.ensemble.particles, 2, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
    state.counters["threads"] = parallel ? kernels::max_threads() : 1;
}

void jitter(benchmark::State& state, bool parallel) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const std::vector<double> variances{0.09, 0.017 * 0.017};
    std::uint64_t step = 0;
    for (auto _ : state) {
        if (parallel)
            kernels::jitter_parallel(f.ensemble.particles, 2, variances, {}, 1, step++);
        else
            kernels::jitter_serial(f.ensemble.particles, 2, variances, {}, 1, step++);
        benchmark::DoNotOptimize(f.ensemble.particles.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void full_step(benchmark::State& state, Execution exec) {
    Fixture f(static_cast<std::size_t>(state.range(0)));
    const auto js = JitterSpec::from_std(std::vector<double>{0.3, 0.017});
    for (auto _ : state) {
        auto step = assimilation_step(f.ensemble, f.model, js, f.obs.observations[0], f.obs.observations[1],
                                      {PositivityRule::none, exec});
        benchmark::DoNotOptimize(step.posterior_mean.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(likelihoods, serial, false)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(likelihoods, parallel, true)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(jitter, serial, false)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(jitter, parallel, true)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(full_step, serial, Execution::serial)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(full_step, parallel, Execution::parallel)->Arg(2000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
