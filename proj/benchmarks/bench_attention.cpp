#include <benchmark/benchmark.h>

#include "idealtsf/attention.hpp"
#include "idealtsf/rng.hpp"

using namespace idealtsf;

namespace {

Tensor3 random_tensor(RngStream& rng, std::size_t a, std::size_t b, std::size_t c) {
    Tensor3 t(a, b, c);
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_AttentionForward(benchmark::State& state) {
    const auto d_model = static_cast<std::size_t>(state.range(0));
    const ModelConfig config{96, 24, d_model, 3};
    const ParamSet params = init_params(config, 1);
    RngStream rng(2);
    const Tensor3 z_orig = random_tensor(rng, 32, 3, 96);
    const Tensor3 z_aug = random_tensor(rng, 32, 3, 96);

    for (auto _ : state) {
        auto [pred, trace] = forward(params, z_orig, z_aug);
        benchmark::DoNotOptimize(pred.data.data());
    }
}

void BM_AttentionForwardBackward(benchmark::State& state) {
    const auto d_model = static_cast<std::size_t>(state.range(0));
    const ModelConfig config{96, 24, d_model, 3};
    const ParamSet params = init_params(config, 1);
    RngStream rng(2);
    const Tensor3 z_orig = random_tensor(rng, 32, 3, 96);
    const Tensor3 z_aug = random_tensor(rng, 32, 3, 96);
    const Tensor3 target = random_tensor(rng, 32, 3, 24);

    for (auto _ : state) {
        auto [pred, trace] = forward(params, z_orig, z_aug);
        auto [loss, grads] = backward(params, trace, pred, target);
        benchmark::DoNotOptimize(loss);
    }
}

}  // namespace

BENCHMARK(BM_AttentionForward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AttentionForwardBackward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);
