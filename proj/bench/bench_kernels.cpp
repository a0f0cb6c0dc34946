// Serial reference vs im2col/OpenMP conv kernels on generator-like shapes.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "uwgan/kernels/conv.hpp"

namespace k = uwgan::kernels;

namespace {

struct Buffers {
    std::vector<double> x, w, b, y;
};

Buffers make(const k::ConvGeometry& g, int batch)
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Buffers buf{std::vector<double>(g.in_size() * batch), std::vector<double>(g.weight_size()),
                std::vector<double>(g.out_channels), std::vector<double>(g.out_size() * batch)};
    for (auto* v : {&buf.x, &buf.w, &buf.b}) {
        for (double& d : *v) {
            d = u(rng);
        }
    }
    return buf;
}

// indexes: 0 = 3->16 7x7 at 64 px, 1 = 32->32 3x3 at 32 px, 2 = 16->32 4x4 stride 2
k::ConvGeometry geometry(int which)
{
    switch (which) {
    case 0:
        return {3, 70, 70, 16, 7, 1, 0};
    case 1:
        return {32, 34, 34, 32, 3, 1, 0};
    default:
        return {16, 64, 64, 32, 4, 2, 1};
    }
}

template <bool Parallel>
void conv_forward(benchmark::State& state)
{
    const auto g = geometry(static_cast<int>(state.range(0)));
    const int batch = static_cast<int>(state.range(1));
    auto buf = make(g, batch);
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::parallel::conv2d_forward(g, batch, buf.x, buf.w, buf.b, buf.y);
        } else {
            k::reference::conv2d_forward(g, batch, buf.x, buf.w, buf.b, buf.y);
        }
        benchmark::DoNotOptimize(buf.y.data());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}

template <bool Parallel>
void conv_backward(benchmark::State& state)
{
    const auto g = geometry(static_cast<int>(state.range(0)));
    const int batch = static_cast<int>(state.range(1));
    auto buf = make(g, batch);
    std::vector<double> gx(buf.x.size()), gw(buf.w.size()), gb(buf.b.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            k::parallel::conv2d_backward_data(g, batch, buf.y, buf.w, gx);
            k::parallel::conv2d_backward_filter(g, batch, buf.x, buf.y, gw, gb);
        } else {
            k::reference::conv2d_backward_data(g, batch, buf.y, buf.w, gx);
            k::reference::conv2d_backward_filter(g, batch, buf.x, buf.y, gw, gb);
        }
        benchmark::DoNotOptimize(gw.data());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}

void shapes(benchmark::internal::Benchmark* b)
{
    for (int which : {0, 1, 2}) {
        for (int batch : {1, 4}) {
            b->Args({which, batch});
        }
    }
    b->ArgNames({"shape", "batch"})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(conv_forward<false>)->Name("conv_forward/reference")->Apply(shapes);
BENCHMARK(conv_forward<true>)->Name("conv_forward/parallel")->Apply(shapes);
BENCHMARK(conv_backward<false>)->Name("conv_backward/reference")->Apply(shapes);
BENCHMARK(conv_backward<true>)->Name("conv_backward/parallel")->Apply(shapes);

BENCHMARK_MAIN();
