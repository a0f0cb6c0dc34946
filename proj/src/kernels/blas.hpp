#pragma once

// Small dense helpers for the parallel kernels. The summation order depends
// only on indices, never on pointer alignment, so a buffer that lands at a
// different address gives bit-identical results. (Eigen's peeling for
// unaligned maps does not have that property.)

#include <cstddef>
#include <vector>

namespace uwgan::kernels::detail {

// Four interleaved partial sums, combined pairwise, then the tail.
inline double sum(const double* a, std::size_t n)
{
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i];
        s1 += a[i + 1];
        s2 += a[i + 2];
        s3 += a[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) {
        s += a[i];
    }
    return s;
}

inline double dot(const double* a, const double* b, std::size_t n)
{
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

// C(m x n) (+)= A(m x k) * B(k x n), all row-major. Each C entry sums over
// k in order; the inner loop runs along n and vectorizes lane-wise.
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
                    bool accumulate)
{
    if (!accumulate) {
        for (std::size_t i = 0; i < m * n; ++i) {
            c[i] = 0.0;
        }
    }
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        double* c0 = c + i * n;
        double* c1 = c0 + n;
        double* c2 = c1 + n;
        double* c3 = c2 + n;
        for (std::size_t p = 0; p < k; ++p) {
            const double w0 = a[i * k + p], w1 = a[(i + 1) * k + p], w2 = a[(i + 2) * k + p],
                         w3 = a[(i + 3) * k + p];
            const double* br = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                const double v = br[j];
                c0[j] += w0 * v;
                c1[j] += w1 * v;
                c2[j] += w2 * v;
                c3[j] += w3 * v;
            }
        }
    }
    for (; i < m; ++i) {
        double* ci = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double w = a[i * k + p];
            const double* br = b + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                ci[j] += w * br[j];
            }
        }
    }
}

// C(k x n) (+)= A(m x k)^T * B(m x n).
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
                    bool accumulate)
{
    if (!accumulate) {
        for (std::size_t i = 0; i < k * n; ++i) {
            c[i] = 0.0;
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        const double* br = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double w = a[i * k + p];
            double* cr = c + p * n;
            for (std::size_t j = 0; j < n; ++j) {
                cr[j] += w * br[j];
            }
        }
    }
}

// C(m x n) (+)= A(m x k) * B(n x k)^T. With enough rows, B is transposed once
// so the work runs through gemm_nn; the choice depends on shapes only.
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
                    bool accumulate)
{
    if (m >= 4 && n >= 4) {
        std::vector<double> bt(k * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) {
                bt[p * n + j] = b[j * k + p];
            }
        }
        gemm_nn(m, n, k, a, bt.data(), c, accumulate);
        return;
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = dot(a + i * k, b + j * k, k);
            c[i * n + j] = accumulate ? c[i * n + j] + v : v;
        }
    }
}

}  // namespace uwgan::kernels::detail
