// Kernel benchmark: serial reference vs OpenMP implementations.
// Verifies bitwise-identical outputs, then reports timings per kernel.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "idu/graph.hpp"
#include "idu/kernels.hpp"
#include "idu/model.hpp"

using namespace idu;
using core::Tensor;

namespace {

double now_s() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const double t0 = now_s();
        fn();
        best = std::min(best, now_s() - t0);
    }
    return best;
}

std::vector<float> random_buf(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.gauss());
    return v;
}

void report(const char* name, double serial_s, double par_s, bool identical) {
    std::printf("%-28s serial %9.4f ms   omp %9.4f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, par_s * 1e3, serial_s / par_s, identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run the serial path\n\n");
#endif
    Rng rng(42);

    {
        const int m = 512, k = 512, n = 512;
        auto a = random_buf(static_cast<size_t>(m) * k, rng);
        auto b = random_buf(static_cast<size_t>(k) * n, rng);
        std::vector<float> c1(static_cast<size_t>(m) * n), c2(c1.size());
        const double ts = time_best_of(3, [&] { core::serial::matmul(a.data(), b.data(), c1.data(), m, k, n); });
        const double tp = time_best_of(3, [&] { core::par::matmul(a.data(), b.data(), c2.data(), m, k, n); });
        report("matmul 512x512x512", ts, tp, c1 == c2);
    }
    {
        const int m = 2048, k = 256, n = 256;
        auto a = random_buf(static_cast<size_t>(m) * k, rng);
        auto b = random_buf(static_cast<size_t>(n) * k, rng);
        std::vector<float> c1(static_cast<size_t>(m) * n), c2(c1.size());
        const double ts =
            time_best_of(3, [&] { core::serial::matmul_nt(a.data(), b.data(), c1.data(), m, k, n); });
        const double tp = time_best_of(3, [&] { core::par::matmul_nt(a.data(), b.data(), c2.data(), m, k, n); });
        report("linear 2048x256 -> 256", ts, tp, c1 == c2);
    }
    {
        const int rows = 4096, cols = 512;
        auto x = random_buf(static_cast<size_t>(rows) * cols, rng);
        std::vector<float> y1(x.size()), y2(x.size());
        const double ts =
            time_best_of(3, [&] { core::serial::softmax_rows(x.data(), y1.data(), rows, cols); });
        const double tp = time_best_of(3, [&] { core::par::softmax_rows(x.data(), y2.data(), rows, cols); });
        report("softmax_rows 4096x512", ts, tp, y1 == y2);
    }
    {
        const int rows = 8192, cols = 256;
        auto x = random_buf(static_cast<size_t>(rows) * cols, rng);
        std::vector<double> m1(cols), v1(cols), m2(cols), v2(cols);
        const double ts = time_best_of(
            3, [&] { core::serial::col_mean_var(x.data(), rows, cols, m1.data(), v1.data()); });
        const double tp =
            time_best_of(3, [&] { core::par::col_mean_var(x.data(), rows, cols, m2.data(), v2.data()); });
        report("col_mean_var 8192x256", ts, tp, m1 == m2 && v1 == v2);
    }
    {
        // attention block at the scaled acceptance width
        model::ModelConfig cfg;
        cfg.input_dim = 32;
        cfg.widths = {64, 64, 32};
        cfg.attn_dim = 16;
        cfg.n_classes = 5;
        cfg.dropout = 0.0;
        auto params = model::ModelParams::init(cfg);
        Tensor X({256, cfg.input_dim});
        for (auto& v : X.data) v = static_cast<float>(rng.gauss());

        core::set_parallel(false);
        Tensor p1, p2;
        const double ts = time_best_of(3, [&] { p1 = model::forward_infer(params, X); });
        core::set_parallel(true);
        const double tp = time_best_of(3, [&] { p2 = model::forward_infer(params, X); });
        report("forward B=256 w=[64,64,32]", ts, tp, p1.data == p2.data);
    }
    return 0;
}
