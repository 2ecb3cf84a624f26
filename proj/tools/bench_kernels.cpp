// Timing harness for the dense kernels (serial reference vs OpenMP) and the
// end-to-end pair matcher. Prints a small table; no correctness checks here,
// the test suite covers those.

#include <chrono>
#include <cstdio>
#include <vector>

#include "lsim/graph.hpp"
#include "lsim/kernels.hpp"
#include "lsim/model.hpp"
#include "lsim/rng.hpp"
#include "lsim/synth.hpp"
#include "lsim/tensor.hpp"

using namespace lsim;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<double> random_block(int64_t n, Rng& rng) {
    std::vector<double> v(static_cast<size_t>(n));
    for (double& x : v) x = rng.uniform(-1, 1);
    return v;
}

template <class Fn>
double bench(Fn&& fn, int reps) {
    fn();  // warm up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    return ms_since(t0) / reps;
}

void bench_matmul(int64_t m, int64_t k, int64_t n, Rng& rng) {
    const auto a = random_block(m * k, rng);
    const auto b = random_block(k * n, rng);
    const auto bt = random_block(n * k, rng);
    std::vector<double> c(size_t(m * n));
    const int reps = m * k * n > (1 << 24) ? 5 : 50;
    const double flop = 2.0 * double(m) * double(k) * double(n);

    const double t_nn_s = bench([&] { kern::matmul_nn_serial(a.data(), b.data(), c.data(), m, k, n); }, reps);
    const double t_nn_p = bench([&] { kern::matmul_nn_omp(a.data(), b.data(), c.data(), m, k, n); }, reps);
    const double t_nt_s = bench([&] { kern::matmul_nt_serial(a.data(), bt.data(), c.data(), m, k, n); }, reps);
    const double t_nt_p = bench([&] { kern::matmul_nt_omp(a.data(), bt.data(), c.data(), m, k, n); }, reps);
    std::printf("%4lldx%4lldx%4lld | nn %8.3f ms (%5.1f GF/s) omp %8.3f ms (x%4.2f) | nt %8.3f ms (%5.1f GF/s) omp %8.3f ms (x%4.2f)\n",
                (long long)m, (long long)k, (long long)n, t_nn_s, flop / t_nn_s / 1e6, t_nn_p,
                t_nn_s / t_nn_p, t_nt_s, flop / t_nt_s / 1e6, t_nt_p, t_nt_s / t_nt_p);
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 0;
    if (argc > 1) threads = std::atoi(argv[1]);
    kern::set_max_threads(threads);
    std::printf("thread cap: %d (effective %d)\n\n", threads, kern::max_threads());

    Rng rng(42);
    std::printf("dense kernels, serial reference vs OpenMP:\n");
    bench_matmul(128, 128, 128, rng);
    bench_matmul(600, 128, 128, rng);
    bench_matmul(512, 512, 512, rng);
    bench_matmul(200, 128, 1024, rng);
    bench_matmul(1024, 1024, 1024, rng);

    std::printf("\npair matching (25-node fully connected graphs):\n");
    ModelConfig mc;
    mc.categories = 25;
    const ModelParams params = init_params(mc, 7);
    // 5x5 grid of boxes: the worst case the performance target covers.
    auto grid25 = [&rng](const char* id) {
        Layout l;
        l.id = id;
        l.width = l.height = 360;
        l.categories = 25;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c)
                l.elements.push_back({"e" + std::to_string(r * 5 + c), r * 5 + c,
                                      36.0 + c * 72 + rng.uniform(-4, 4),
                                      36.0 + r * 72 + rng.uniform(-4, 4), 60.0, 60.0});
        return l;
    };
    LayoutGraph ga = build_graph(grid25("a"));
    LayoutGraph gb = build_graph(grid25("b"));
    std::printf("  graph sizes: %zu and %zu nodes\n", ga.nodes.size(), gb.nodes.size());
    const double t_pair = bench([&] { match_pair(ga, gb, params); }, 5);
    std::printf("  match_pair: %.1f ms\n", t_pair);

    const auto fps = synth_generate(2, 99, SynthProfile::Floorplan);
    LayoutGraph fa = build_graph(fps[0]);
    LayoutGraph fb = build_graph(fps[1]);
    ModelConfig fc_cfg;
    const ModelParams fp_params = init_params(fc_cfg, 7);
    const double t_fp = bench([&] { match_pair(fa, fb, fp_params); }, 10);
    std::printf("  match_pair (floorplan, %zu/%zu nodes): %.1f ms\n", fa.nodes.size(),
                fb.nodes.size(), t_fp);
    return 0;
}
