#include <benchmark/benchmark.h>

#include "vstar/analysis.hpp"
#include "vstar/denoiser.hpp"
#include "vstar/linalg.hpp"
#include "vstar/noise_opt.hpp"
#include "vstar/regularizer.hpp"
#include "vstar/rng.hpp"

namespace {

using namespace vstar;

void bm_softmax_rows(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(1);
    Matrix m(n, n);
    rng.fill_normal(m);
    for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(m));
}
BENCHMARK(bm_softmax_rows)->Arg(16)->Arg(48)->Arg(128);

void bm_gaussian_toeplitz(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(build_gaussian_toeplitz(n, 1.0));
}
BENCHMARK(bm_gaussian_toeplitz)->Arg(16)->Arg(64);

void bm_regularize_logits(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(2);
    Matrix logits(n, n);
    rng.fill_normal(logits);
    auto delta = build_gaussian_toeplitz(n, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(regularize_logits(logits, delta));
}
BENCHMARK(bm_regularize_logits)->Arg(16)->Arg(48);

void bm_temporal_attention(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    SeededRng rng(3);
    Tensor q({64, n, 16}), k({64, n, 16}), v({64, n, 16});
    rng.fill_normal(q);
    rng.fill_normal(k);
    rng.fill_normal(v);
    for (auto _ : state)
        benchmark::DoNotOptimize(temporal_self_attention(q, k, v, AttentionHook::none(),
                                                         PositionalEncodingVariant::none, 2));
}
BENCHMARK(bm_temporal_attention)->Arg(16)->Arg(48);

void bm_cholesky(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Matrix sigma = build_covariance(1.0, 0.6, n);
    for (auto _ : state) benchmark::DoNotOptimize(cholesky_factor(sigma));
}
BENCHMARK(bm_cholesky)->Arg(16)->Arg(64);

void bm_kl_to_standard(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    Matrix sigma = build_covariance(1.3, 0.4, n);
    std::vector<double> mu(n, 0.1);
    for (auto _ : state) benchmark::DoNotOptimize(kl_to_standard(mu, sigma));
}
BENCHMARK(bm_kl_to_standard)->Arg(16)->Arg(64);

void bm_denoiser_forward(benchmark::State& state) {
    ModelConfig cfg;
    cfg.height = cfg.width = 16;
    cfg.channels = {16, 32, 32};
    ToyDenoiser model(cfg, 1);
    const std::size_t frames = static_cast<std::size_t>(state.range(0));
    Tensor x({frames, cfg.in_channels, cfg.height, cfg.width});
    SeededRng rng(4);
    rng.fill_normal(x);
    Matrix cond = model.caption_schedule("red fades into blue", frames);
    for (auto _ : state) benchmark::DoNotOptimize(model.predict_x0(x, 500, cond));
}
BENCHMARK(bm_denoiser_forward)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond);

void bm_dynamics_score(benchmark::State& state) {
    auto items = generate_dataset(default_dataset_specs(), 16, 0);
    for (auto _ : state)
        for (const auto& item : items) benchmark::DoNotOptimize(dynamics_score(item.video));
}
BENCHMARK(bm_dynamics_score);

}  // namespace

BENCHMARK_MAIN();
