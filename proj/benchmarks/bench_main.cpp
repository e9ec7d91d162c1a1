#include <benchmark/benchmark.h>

#include <vector>

#include "fixtures.hpp"
#include "switchlab/fds.hpp"
#include "switchlab/metrics.hpp"
#include "switchlab/mss.hpp"
#include "switchlab/network.hpp"
#include "switchlab/pseudo.hpp"

using namespace switchlab;

namespace {

NetConfig desk_net(int side, Precision prec) {
    NetConfig c;
    c.height = c.width = side;
    c.precision = prec;
    return c;
}

std::vector<Image> batch_images(int n, int side, Rng& rng) {
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) out.push_back(fixtures::random_image(side, side, rng));
    return out;
}

void BM_Forward(benchmark::State& st) {
    const int side = static_cast<int>(st.range(0));
    const SegNet net(desk_net(side, st.range(1) ? Precision::float32 : Precision::float64));
    const SegNetParams p = net.init_params(1);
    Rng rng(2);
    const FeatureMap x = stack_images(batch_images(8, side, rng));
    for (auto _ : st) benchmark::DoNotOptimize(net.forward(p, x));
    st.SetItemsProcessed(st.iterations() * 8);
}
BENCHMARK(BM_Forward)->ArgsProduct({{64, 128}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_ForwardBackward(benchmark::State& st) {
    const int side = static_cast<int>(st.range(0));
    const SegNet net(desk_net(side, st.range(1) ? Precision::float32 : Precision::float64));
    const SegNetParams p = net.init_params(1);
    Rng rng(3);
    const FeatureMap x = stack_images(batch_images(8, side, rng));
    Logits dl(8, 2, side, side);
    for (double& v : dl.values()) v = uniform_real(rng, -1e-3, 1e-3);
    std::vector<double> grad(net.param_count());
    for (auto _ : st) {
        const NetTrace tr = net.forward_trace(p, x);
        net.backward(p, tr, dl, nullptr, grad);
        benchmark::ClobberMemory();
    }
    st.SetItemsProcessed(st.iterations() * 8);
}
BENCHMARK(BM_ForwardBackward)->ArgsProduct({{64}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_FdsPair(benchmark::State& st) {
    const int side = static_cast<int>(st.range(0));
    Rng rng(4);
    const Image x = fixtures::random_image(side, side, rng), u = fixtures::random_image(side, side, rng);
    const FdsConfig cfg;
    for (auto _ : st) benchmark::DoNotOptimize(fds_pair(x, u, cfg));
}
BENCHMARK(BM_FdsPair)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_MultiscaleMask(benchmark::State& st) {
    Rng rng(5);
    const MssConfig cfg;
    for (auto _ : st) benchmark::DoNotOptimize(generate_multiscale_mask(256, 256, cfg, rng));
}
BENCHMARK(BM_MultiscaleMask)->Unit(benchmark::kMicrosecond);

void BM_LargestComponent(benchmark::State& st) {
    const int side = static_cast<int>(st.range(0));
    Rng rng(6);
    const LabelMask m = fixtures::random_labels(side, side, rng, 0.55);
    for (auto _ : st) benchmark::DoNotOptimize(largest_connected_component(m));
}
BENCHMARK(BM_LargestComponent)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Hd95(benchmark::State& st) {
    const int side = static_cast<int>(st.range(0));
    const LabelMask a = fixtures::rect_labels(side, side, side / 8, side / 8, side / 2, side / 2);
    const LabelMask b = fixtures::rect_labels(side, side, side / 6, side / 5, side * 3 / 5, side / 2 + 3);
    for (auto _ : st) benchmark::DoNotOptimize(evaluate_pair(a, b));
}
BENCHMARK(BM_Hd95)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
