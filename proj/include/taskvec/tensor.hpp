// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Row-major matrix type and the handful of dense kernels the models need.

#pragma once

#include <bit>
#include <cassert>
#include <cstddef>
#include <vector>

#include "taskvec/common.hpp"

namespace taskvec {

template <class S>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<S> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, S(0)) {}

    /// Reshape reusing capacity; contents unspecified.
    void ensure(int r, int c) {
        rows = r;
        cols = c;
        a.resize(static_cast<std::size_t>(r) * c);
    }

    S* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const S* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }

    S& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    const S& at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    std::size_t size() const { return a.size(); }
    void zero() { std::fill(a.begin(), a.end(), S(0)); }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

template <class S>
Mat<S> randn_mat(int r, int c, Rng& rng, double sd) {
    Mat<S> m(r, c);
    for (auto& x : m.a) x = static_cast<S>(rng.normal(0.0, sd));
    return m;
}

// C[i,:] += A[i,:] * B, with A n x k and B k x m, all row-major.
// Four A-rows per pass share each B row load; the j-inner loop keeps the
// stores contiguous and vectorizable.
template <class S>
void matmul_acc(const S* __restrict A, int n, int k, const S* __restrict B, int m,
                S* __restrict C) {
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const S* __restrict a0 = A + static_cast<std::size_t>(i) * k;
        const S* __restrict a1 = a0 + k;
        const S* __restrict a2 = a1 + k;
        const S* __restrict a3 = a2 + k;
        S* __restrict c0 = C + static_cast<std::size_t>(i) * m;
        S* __restrict c1 = c0 + m;
        S* __restrict c2 = c1 + m;
        S* __restrict c3 = c2 + m;
        for (int p = 0; p < k; ++p) {
            const S* __restrict bp = B + static_cast<std::size_t>(p) * m;
            const S v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
            for (int j = 0; j < m; ++j) {
                const S b = bp[j];
                c0[j] += v0 * b;
                c1[j] += v1 * b;
                c2[j] += v2 * b;
                c3[j] += v3 * b;
            }
        }
    }
    for (; i < n; ++i) {
        const S* __restrict ai = A + static_cast<std::size_t>(i) * k;
        S* __restrict ci = C + static_cast<std::size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            const S av = ai[p];
            const S* __restrict bp = B + static_cast<std::size_t>(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

// dA[i,:] += dC[i,:] * B^T  (n x m times m-rows-of-B layout k x m).
// Transposing B once turns every row into the streaming rank-1 kernel,
// which is far faster than a column-strided dot per output element.
template <class S>
void matmul_acc_bt(const S* __restrict dC, int n, int m, const S* __restrict B, int k,
                   S* __restrict dA) {
    static thread_local std::vector<S> bt;
    bt.resize(static_cast<std::size_t>(m) * k);
    for (int p = 0; p < k; ++p) {
        for (int j = 0; j < m; ++j) {
            bt[static_cast<std::size_t>(j) * k + p] = B[static_cast<std::size_t>(p) * m + j];
        }
    }
    matmul_acc(dC, n, m, bt.data(), k, dA);
}

// dB += A^T * dC, with A n x k and dC n x m. The p-outer order keeps one
// output row hot instead of streaming the whole k x m block per input row.
template <class S>
void matmul_acc_at(const S* __restrict A, int n, int k, const S* __restrict dC, int m,
                   S* __restrict dB) {
    for (int p = 0; p < k; ++p) {
        S* __restrict bp = dB + static_cast<std::size_t>(p) * m;
        for (int i = 0; i < n; ++i) {
            const S av = A[static_cast<std::size_t>(i) * k + p];
            const S* __restrict ci = dC + static_cast<std::size_t>(i) * m;
            for (int j = 0; j < m; ++j) bp[j] += av * ci[j];
        }
    }
}

// Four independent accumulators break the FP latency chain; the summation
// order is fixed, so results stay deterministic.
template <class S>
S dot(const S* __restrict x, const S* __restrict y, int n) {
    S a0 = S(0), a1 = S(0), a2 = S(0), a3 = S(0);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        a0 += x[i] * y[i];
        a1 += x[i + 1] * y[i + 1];
        a2 += x[i + 2] * y[i + 2];
        a3 += x[i + 3] * y[i + 3];
    }
    for (; i < n; ++i) a0 += x[i] * y[i];
    return (a0 + a1) + (a2 + a3);
}

template <class S>
void axpy(S alpha, const S* __restrict x, S* __restrict y, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class S>
bool all_finite(const S* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(static_cast<double>(x[i]))) return false;
    }
    return true;
}

// Branch-free Cephes-style expf; ~1e-7 relative error, auto-vectorizes.
// The float model path runs on it; the double path (gradient checks)
// stays on libm so analytic and finite-difference gradients agree tightly.
inline float fast_expf(float x) {
    x = std::min(88.0f, std::max(-87.0f, x));
    // Round-to-nearest via the 1.5*2^23 magic constant; keeps the loop
    // branch-free where std::floor would block auto-vectorization.
    const float zf = x * 1.44269504088896341f + 12582912.0f;
    const float z = zf - 12582912.0f;
    x -= z * 0.693359375f;
    x -= z * -2.12194440e-4f;
    float p = 1.9875691500e-4f;
    p = p * x + 1.3981999507e-3f;
    p = p * x + 8.3334519073e-3f;
    p = p * x + 4.1665795894e-2f;
    p = p * x + 1.6666665459e-1f;
    p = p * x + 5.0000001201e-1f;
    p = p * x * x + x + 1.0f;
    const std::uint32_t bits =
        std::bit_cast<std::uint32_t>(p) +
        (static_cast<std::uint32_t>(static_cast<std::int32_t>(z)) << 23);
    return std::bit_cast<float>(bits);
}

template <class S>
S fast_exp(S x) {
    return std::exp(x);
}
template <>
inline float fast_exp<float>(float x) {
    return fast_expf(x);
}

template <class S>
S fast_tanh(S x) {
    return std::tanh(x);
}
template <>
inline float fast_tanh<float>(float x) {
    return 1.0f - 2.0f / (1.0f + fast_expf(2.0f * x));
}

}  // namespace taskvec
