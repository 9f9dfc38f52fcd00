#include <benchmark/benchmark.h>

#include "idealtsf/augment.hpp"
#include "idealtsf/rng.hpp"

using namespace idealtsf;

namespace {

void BM_MakeNegativeBatch(benchmark::State& state) {
    WindowBatch batch;
    batch.inputs = Tensor3(static_cast<std::size_t>(state.range(0)), 3, 96);
    batch.targets = Tensor3(static_cast<std::size_t>(state.range(0)), 3, 24);
    batch.origin_indices.assign(batch.size(), 0);
    RngStream rng(3);
    for (double& v : batch.inputs.data) v = rng.uniform(-1.0, 1.0);

    AugConfig cfg;
    for (auto _ : state) {
        WindowBatch negative = make_negative_batch(batch, cfg);
        benchmark::DoNotOptimize(negative.inputs.data.data());
    }
}

}  // namespace

BENCHMARK(BM_MakeNegativeBatch)->Arg(32)->Arg(256)->Unit(benchmark::kMillisecond);
