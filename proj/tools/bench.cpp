// Parallel kernels against their serial reference implementations.

#include <benchmark/benchmark.h>

#include <random>

#include "reasonbreak/core/image.hpp"
#include "reasonbreak/decoder/kernels.hpp"
#include "reasonbreak/embedding/bank.hpp"

using namespace reasonbreak;
namespace k = reasonbreak::kernels;

namespace {

Tensor random_tensor(int n, int c, int h, int w, uint64_t seed) {
    Tensor t(n, c, h, w);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : t.v) x = u(rng);
    return t;
}

ImageBuffer random_image(int h, int w, uint64_t seed) {
    ImageBuffer img(h, w);
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : img.data) v = u(rng);
    return img;
}

void conv_args(benchmark::internal::Benchmark* b) {
    b->Args({64, 28})->Args({128, 14})->Unit(benchmark::kMillisecond);
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
    Tensor x = random_tensor(2, ch, side, side, 1);
    Rng rng(2);
    auto w = random_uniform(rng, static_cast<size_t>(ch) * ch * 9, -0.1, 0.1);
    auto b = random_uniform(rng, ch, -0.1, 0.1);
    Tensor y;
    for (auto _ : state) {
        k::conv2d_forward(x, w, b, ch, 3, 1, y);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_Conv2dForward)->Apply(conv_args);

static void BM_Conv2dForwardSerial(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
    Tensor x = random_tensor(2, ch, side, side, 1);
    Rng rng(2);
    auto w = random_uniform(rng, static_cast<size_t>(ch) * ch * 9, -0.1, 0.1);
    auto b = random_uniform(rng, ch, -0.1, 0.1);
    Tensor y;
    for (auto _ : state) {
        k::serial::conv2d_forward(x, w, b, ch, 3, 1, y);
        benchmark::DoNotOptimize(y.v.data());
    }
}
BENCHMARK(BM_Conv2dForwardSerial)->Apply(conv_args);

static void BM_Conv2dBackwardInput(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
    Tensor gy = random_tensor(2, ch, side, side, 3);
    Rng rng(4);
    auto w = random_uniform(rng, static_cast<size_t>(ch) * ch * 9, -0.1, 0.1);
    Tensor gx;
    for (auto _ : state) {
        k::conv2d_backward_input(gy, w, ch, 3, 1, gx);
        benchmark::DoNotOptimize(gx.v.data());
    }
}
BENCHMARK(BM_Conv2dBackwardInput)->Apply(conv_args);

static void BM_Conv2dBackwardInputSerial(benchmark::State& state) {
    const int ch = static_cast<int>(state.range(0)), side = static_cast<int>(state.range(1));
    Tensor gy = random_tensor(2, ch, side, side, 3);
    Rng rng(4);
    auto w = random_uniform(rng, static_cast<size_t>(ch) * ch * 9, -0.1, 0.1);
    Tensor gx;
    for (auto _ : state) {
        k::serial::conv2d_backward_input(gy, w, ch, 3, 1, gx);
        benchmark::DoNotOptimize(gx.v.data());
    }
}
BENCHMARK(BM_Conv2dBackwardInputSerial)->Apply(conv_args);

static void BM_ResampleBilinear(benchmark::State& state) {
    ImageBuffer img = random_image(1080, 1920, 5);
    for (auto _ : state) {
        ImageBuffer out = resample_bilinear(img, 896, 896);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_ResampleBilinear)->Unit(benchmark::kMillisecond);

static void BM_ResampleBilinearSerial(benchmark::State& state) {
    ImageBuffer img = random_image(1080, 1920, 5);
    for (auto _ : state) {
        ImageBuffer out = serial::resample_bilinear(img, 896, 896);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_ResampleBilinearSerial)->Unit(benchmark::kMillisecond);

static void BM_PriorSearch(benchmark::State& state) {
    Rng rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    EmbeddingBank bank;
    bank.dim = 512;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> v(512);
        for (auto& x : v) x = g(rng);
        normalize(v);
        bank.vectors.push_back(std::move(v));
        bank.provenance.push_back("");
    }
    std::vector<std::vector<double>> concepts(8, std::vector<double>(512));
    for (auto& c : concepts) {
        for (auto& x : c) x = g(rng);
        normalize(c);
    }
    for (auto _ : state) {
        PriorSelection sel = select_prior_embedded(concepts, bank);
        benchmark::DoNotOptimize(sel.index);
    }
}
BENCHMARK(BM_PriorSearch)->Unit(benchmark::kMillisecond);

static void BM_PriorSearchSerial(benchmark::State& state) {
    Rng rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    EmbeddingBank bank;
    bank.dim = 512;
    for (int i = 0; i < 2000; ++i) {
        std::vector<double> v(512);
        for (auto& x : v) x = g(rng);
        normalize(v);
        bank.vectors.push_back(std::move(v));
        bank.provenance.push_back("");
    }
    std::vector<std::vector<double>> concepts(8, std::vector<double>(512));
    for (auto& c : concepts) {
        for (auto& x : c) x = g(rng);
        normalize(c);
    }
    for (auto _ : state) {
        PriorSelection sel = serial::select_prior_embedded(concepts, bank);
        benchmark::DoNotOptimize(sel.index);
    }
}
BENCHMARK(BM_PriorSearchSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
