#pragma once

#include <cmath>
#include <cstddef>

#include "idu/tensor.hpp"

namespace idu::core {

/// Kernel dispatch: OpenMP kernels are the default; the serial reference
/// implementations stay available for tests and the kernel benchmark.
/// Both paths produce bitwise-identical results because parallelism is only
/// ever over independent output elements; every reduction runs in a fixed
/// serial order with a 64-bit accumulator.
bool parallel_enabled();
void set_parallel(bool on);

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * k;
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(ai[p]) * static_cast<double>(b[static_cast<size_t>(p) * n + j]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

// C[m x n] = A[m x k] * B[n x k]^T
template <class T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * k;
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(ai[p]) * static_cast<double>(bj[p]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

// C[m x n] = A[k x m]^T * B[k x n]
template <class T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a[static_cast<size_t>(p) * m + i]) * static_cast<double>(b[static_cast<size_t>(p) * n + j]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

// Row-wise softmax with max subtraction; sums accumulate in double.
template <class T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
    for (int r = 0; r < rows; ++r) {
        const T* xr = x + static_cast<size_t>(r) * cols;
        T* yr = y + static_cast<size_t>(r) * cols;
        double mx = -1e308;
        for (int c = 0; c < cols; ++c) mx = std::max(mx, static_cast<double>(xr[c]));
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            double e = std::exp(static_cast<double>(xr[c]) - mx);
            yr[c] = static_cast<T>(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (int c = 0; c < cols; ++c) yr[c] = static_cast<T>(static_cast<double>(yr[c]) * inv);
    }
}

template <class T>
void relu(const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

// Per-column mean and biased variance over rows, 64-bit accumulation.
template <class T>
void col_mean_var(const T* x, int rows, int cols, double* mean, double* var) {
    for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += static_cast<double>(x[static_cast<size_t>(r) * cols + c]);
        const double mu = s / rows;
        double sq = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double d = static_cast<double>(x[static_cast<size_t>(r) * cols + c]) - mu;
            sq += d * d;
        }
        mean[c] = mu;
        var[c] = sq / rows;
    }
}

}  // namespace serial

namespace par {

template <class T>
void matmul(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * k;
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(ai[p]) * static_cast<double>(b[static_cast<size_t>(p) * n + j]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

template <class T>
void matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        const T* ai = a + static_cast<size_t>(i) * k;
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const T* bj = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(ai[p]) * static_cast<double>(bj[p]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

template <class T>
void matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* ci = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a[static_cast<size_t>(p) * m + i]) * static_cast<double>(b[static_cast<size_t>(p) * n + j]);
            ci[j] = static_cast<T>(acc);
        }
    }
}

template <class T>
void softmax_rows(const T* x, T* y, int rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        serial::softmax_rows(x + static_cast<size_t>(r) * cols, y + static_cast<size_t>(r) * cols, 1, cols);
    }
}

template <class T>
void relu(const T* x, T* y, size_t n) {
    const long long sn = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < sn; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void col_mean_var(const T* x, int rows, int cols, double* mean, double* var) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < cols; ++c) {
        double s = 0.0;
        for (int r = 0; r < rows; ++r) s += static_cast<double>(x[static_cast<size_t>(r) * cols + c]);
        const double mu = s / rows;
        double sq = 0.0;
        for (int r = 0; r < rows; ++r) {
            const double d = static_cast<double>(x[static_cast<size_t>(r) * cols + c]) - mu;
            sq += d * d;
        }
        mean[c] = mu;
        var[c] = sq / rows;
    }
}

}  // namespace par

// ---- dispatchers ----------------------------------------------------------

template <class T>
void k_matmul(const T* a, const T* b, T* c, int m, int k, int n) {
    if (parallel_enabled()) par::matmul(a, b, c, m, k, n);
    else serial::matmul(a, b, c, m, k, n);
}

template <class T>
void k_matmul_nt(const T* a, const T* b, T* c, int m, int k, int n) {
    if (parallel_enabled()) par::matmul_nt(a, b, c, m, k, n);
    else serial::matmul_nt(a, b, c, m, k, n);
}

template <class T>
void k_matmul_tn(const T* a, const T* b, T* c, int m, int k, int n) {
    if (parallel_enabled()) par::matmul_tn(a, b, c, m, k, n);
    else serial::matmul_tn(a, b, c, m, k, n);
}

template <class T>
void k_softmax_rows(const T* x, T* y, int rows, int cols) {
    if (parallel_enabled()) par::softmax_rows(x, y, rows, cols);
    else serial::softmax_rows(x, y, rows, cols);
}

template <class T>
void k_relu(const T* x, T* y, size_t n) {
    if (parallel_enabled()) par::relu(x, y, n);
    else serial::relu(x, y, n);
}

template <class T>
void k_col_mean_var(const T* x, int rows, int cols, double* mean, double* var) {
    if (parallel_enabled()) par::col_mean_var(x, rows, cols, mean, var);
    else serial::col_mean_var(x, rows, cols, mean, var);
}

}  // namespace idu::core
