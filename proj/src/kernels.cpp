#include "lsim/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <vector>

namespace lsim::kern {

namespace {
std::atomic<int> g_max_threads{0};

int threads_for(int64_t rows) {
    int cap = g_max_threads.load(std::memory_order_relaxed);
    int hw = omp_get_max_threads();
    int t = cap > 0 ? std::min(cap, hw) : hw;
    return static_cast<int>(std::min<int64_t>(t, std::max<int64_t>(rows, 1)));
}

// Below this many multiply-adds the parallel-for overhead dominates.
constexpr int64_t kParallelFlopCutoff = 1 << 18;
}  // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }
int max_threads() {
    int cap = g_max_threads.load(std::memory_order_relaxed);
    return cap > 0 ? std::min(cap, omp_get_max_threads()) : omp_get_max_threads();
}

namespace {

inline void row_nn(const double* a, const double* b, double* c, int64_t i, int64_t k, int64_t n) {
    double* ci = c + i * n;
    for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
        const double av = ai[kk];
        const double* bk = b + kk * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
}

// Eight output columns per pass.  A lone dot product is one serial FMA chain
// and runs latency-bound; eight independent lanes keep the FMA ports busy.
// Every lane still sums k in ascending order in its own single chain, so each
// entry matches the one-column loop bit for bit however the rows are banded.
constexpr int64_t kNtLanes = 8;
// Lane bundle for the accumulators; aligned(8) because it is also used to
// read from plain double storage.
typedef double Lanes __attribute__((vector_size(kNtLanes * 8), aligned(8)));

void nt_band(const double* __restrict a, const double* __restrict b, double* __restrict c,
             int64_t i0, int64_t i1, int64_t k, int64_t n, bool accumulate) {
    std::vector<double> bt(static_cast<size_t>(kNtLanes * k));
    int64_t j0 = 0;
    for (; j0 + kNtLanes <= n; j0 += kNtLanes) {
        // interleave the block's B rows so the lane reads are contiguous
        for (int64_t kk = 0; kk < k; ++kk)
            for (int64_t l = 0; l < kNtLanes; ++l)
                bt[static_cast<size_t>(kk * kNtLanes + l)] = b[(j0 + l) * k + kk];
        const Lanes* btp = reinterpret_cast<const Lanes*>(bt.data());
        int64_t i = i0;
        for (; i + 2 <= i1; i += 2) {  // two rows reuse each packed load
            const double* __restrict a0 = a + i * k;
            const double* __restrict a1 = a0 + k;
            Lanes acc0 = {}, acc1 = {};
            for (int64_t kk = 0; kk < k; ++kk) {
                const Lanes bv = btp[kk];
                acc0 += a0[kk] * bv;
                acc1 += a1[kk] * bv;
            }
            double* c0 = c + i * n + j0;
            double* c1 = c0 + n;
            for (int64_t l = 0; l < kNtLanes; ++l) {
                if (accumulate) {
                    c0[l] += acc0[l];
                    c1[l] += acc1[l];
                } else {
                    c0[l] = acc0[l];
                    c1[l] = acc1[l];
                }
            }
        }
        for (; i < i1; ++i) {
            const double* __restrict ai = a + i * k;
            Lanes acc = {};
            for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * btp[kk];
            double* ci = c + i * n + j0;
            for (int64_t l = 0; l < kNtLanes; ++l)
                if (accumulate)
                    ci[l] += acc[l];
                else
                    ci[l] = acc[l];
        }
    }
    for (; j0 < n; ++j0) {
        const double* bj = b + j0 * k;
        for (int64_t i = i0; i < i1; ++i) {
            const double* ai = a + i * k;
            double acc = 0.0;
            for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
            if (accumulate)
                c[i * n + j0] += acc;
            else
                c[i * n + j0] = acc;
        }
    }
}

// Contiguous i-band per thread, mirroring schedule(static).
template <typename F>
void run_banded(int64_t m, int threads, F&& band) {
#pragma omp parallel num_threads(threads)
    {
        const int nt = omp_get_num_threads();
        const int id = omp_get_thread_num();
        const int64_t chunk = (m + nt - 1) / nt;
        const int64_t i0 = std::min<int64_t>(id * chunk, m);
        const int64_t i1 = std::min<int64_t>(i0 + chunk, m);
        if (i0 < i1) band(i0, i1);
    }
}

}  // namespace

void matmul_nn_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    for (int64_t i = 0; i < m; ++i) row_nn(a, b, c, i, k, n);
}

void matmul_nn_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    const int t = threads_for(m);
#pragma omp parallel for schedule(static) num_threads(t)
    for (int64_t i = 0; i < m; ++i) row_nn(a, b, c, i, k, n);
}

void matmul_nt_serial(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    nt_band(a, b, c, 0, m, k, n, false);
}

void matmul_nt_omp(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    run_banded(m, threads_for(m),
               [&](int64_t i0, int64_t i1) { nt_band(a, b, c, i0, i1, k, n, false); });
}

void matmul_tn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k,
                          int64_t n) {
    // c[kk x n] += sum_i a[i][kk] * b[i][:]
    for (int64_t i = 0; i < m; ++i) {
        const double* ai = a + i * k;
        const double* bi = b + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            double* ck = c + kk * n;
            for (int64_t j = 0; j < n; ++j) ck[j] += av * bi[j];
        }
    }
}

void matmul_tn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k,
                       int64_t n) {
    // Partition by output row kk: each thread owns a contiguous band of c and
    // walks i in order, so the accumulation order per entry matches serial.
    const int t = threads_for(k);
#pragma omp parallel for schedule(static) num_threads(t)
    for (int64_t kk = 0; kk < k; ++kk) {
        double* ck = c + kk * n;
        for (int64_t i = 0; i < m; ++i) {
            const double av = a[i * k + kk];
            const double* bi = b + i * n;
            for (int64_t j = 0; j < n; ++j) ck[j] += av * bi[j];
        }
    }
}

namespace {

inline void row_nn_acc(const double* a, const double* b, double* c, int64_t i, int64_t k,
                       int64_t n) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
        const double av = ai[kk];
        const double* bk = b + kk * n;
        for (int64_t j = 0; j < n; ++j) ci[j] += av * bk[j];
    }
}

}  // namespace

void matmul_nn_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k,
                          int64_t n) {
    for (int64_t i = 0; i < m; ++i) row_nn_acc(a, b, c, i, k, n);
}

void matmul_nn_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k,
                       int64_t n) {
    const int t = threads_for(m);
#pragma omp parallel for schedule(static) num_threads(t)
    for (int64_t i = 0; i < m; ++i) row_nn_acc(a, b, c, i, k, n);
}

void matmul_nt_acc_serial(const double* a, const double* b, double* c, int64_t m, int64_t k,
                          int64_t n) {
    nt_band(a, b, c, 0, m, k, n, true);
}

void matmul_nt_acc_omp(const double* a, const double* b, double* c, int64_t m, int64_t k,
                       int64_t n) {
    run_banded(m, threads_for(m),
               [&](int64_t i0, int64_t i1) { nt_band(a, b, c, i0, i1, k, n, true); });
}

void matmul_nn(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        matmul_nn_omp(a, b, c, m, k, n);
    else
        matmul_nn_serial(a, b, c, m, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        matmul_nt_omp(a, b, c, m, k, n);
    else
        matmul_nt_serial(a, b, c, m, k, n);
}

void matmul_tn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m * k * n >= kParallelFlopCutoff && k > 1)
        matmul_tn_acc_omp(a, b, c, m, k, n);
    else
        matmul_tn_acc_serial(a, b, c, m, k, n);
}

void matmul_nn_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        matmul_nn_acc_omp(a, b, c, m, k, n);
    else
        matmul_nn_acc_serial(a, b, c, m, k, n);
}

void matmul_nt_acc(const double* a, const double* b, double* c, int64_t m, int64_t k, int64_t n) {
    if (m * k * n >= kParallelFlopCutoff && m > 1)
        matmul_nt_acc_omp(a, b, c, m, k, n);
    else
        matmul_nt_acc_serial(a, b, c, m, k, n);
}

}  // namespace lsim::kern
