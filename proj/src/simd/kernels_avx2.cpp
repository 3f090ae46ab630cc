#include "actguard/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>

namespace actguard::simd {
namespace {

inline float hsum(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* x, const float* y, std::size_t n) {
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i + 8), _mm256_loadu_ps(y + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc0);
    }
    float acc = hsum(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_avx2(float a, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_inplace_avx2(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void clamp_avx2(const float* x, const float* low, const float* up, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        // min/max operand order matches std::min/std::max on NaN-free input.
        __m256 v = _mm256_min_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(up + i));
        _mm256_storeu_ps(y + i, _mm256_max_ps(v, _mm256_loadu_ps(low + i)));
    }
    for (; i < n; ++i) y[i] = std::max(std::min(x[i], up[i]), low[i]);
}

float sum_squares_avx2(const float* x, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_fmadd_ps(v, v, acc);
    }
    float s = hsum(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

std::size_t count_within_avx2(const float* x, const float* low, const float* up, std::size_t n) {
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 v = _mm256_loadu_ps(x + i);
        const __m256 ge = _mm256_cmp_ps(v, _mm256_loadu_ps(low + i), _CMP_GE_OQ);
        const __m256 le = _mm256_cmp_ps(v, _mm256_loadu_ps(up + i), _CMP_LE_OQ);
        const int mask = _mm256_movemask_ps(_mm256_and_ps(ge, le));
        count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
    }
    for (; i < n; ++i) count += (x[i] >= low[i] && x[i] <= up[i]) ? 1 : 0;
    return count;
}

float standardized_sq_avx2(const float* x, const float* mu, const float* inv_sigma, std::size_t n) {
    __m256 acc = _mm256_setzero_ps();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 z = _mm256_mul_ps(_mm256_sub_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(mu + i)),
                                       _mm256_loadu_ps(inv_sigma + i));
        acc = _mm256_fmadd_ps(z, z, acc);
    }
    float s = hsum(acc);
    for (; i < n; ++i) {
        const float z = (x[i] - mu[i]) * inv_sigma[i];
        s += z * z;
    }
    return s;
}

}  // namespace

const KernelTable* avx2_kernels() {
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    static const KernelTable table{Isa::Avx2,         dot_avx2,          axpy_avx2,
                                   add_inplace_avx2,  clamp_avx2,        sum_squares_avx2,
                                   count_within_avx2, standardized_sq_avx2};
    return supported ? &table : nullptr;
}

}  // namespace actguard::simd
