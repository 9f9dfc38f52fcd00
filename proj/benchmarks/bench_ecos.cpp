#include <benchmark/benchmark.h>

#include "idealtsf/ecos.hpp"
#include "idealtsf/rng.hpp"

using namespace idealtsf;

namespace {

Tensor3 random_tensor(RngStream& rng, std::size_t a, std::size_t b, std::size_t c) {
    Tensor3 t(a, b, c);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_EcosStep(benchmark::State& state) {
    const ModelConfig config{96, 24, 16, 3};
    RngStream rng(4);
    const AttentionBatchProblem problem(random_tensor(rng, 32, 3, 96),
                                        random_tensor(rng, 32, 3, 96),
                                        random_tensor(rng, 32, 3, 24));
    EcosConfig cfg;
    EcosState ecos_state;
    ParamSet params = init_params(config, 5);

    for (auto _ : state) {
        auto [updated, diag] = ecos_step(params, problem, cfg, ecos_state);
        params = std::move(updated);
        benchmark::DoNotOptimize(diag.loss_clean);
    }
}

}  // namespace

BENCHMARK(BM_EcosStep)->Unit(benchmark::kMillisecond);
