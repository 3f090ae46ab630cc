#include "actguard/simd/kernels.hpp"

#include <arm_neon.h>

#include <algorithm>

namespace actguard::simd {
namespace {

float dot_neon(const float* x, const float* y, std::size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = vfmaq_f32(acc, vld1q_f32(x + i), vld1q_f32(y + i));
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

void axpy_neon(float a, const float* x, float* y, std::size_t n) {
    const float32x4_t va = vdupq_n_f32(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vfmaq_f32(vld1q_f32(y + i), va, vld1q_f32(x + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_inplace_neon(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void clamp_neon(const float* x, const float* low, const float* up, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        vst1q_f32(y + i, vmaxq_f32(vminq_f32(vld1q_f32(x + i), vld1q_f32(up + i)), vld1q_f32(low + i)));
    }
    for (; i < n; ++i) y[i] = std::max(std::min(x[i], up[i]), low[i]);
}

float sum_squares_neon(const float* x, std::size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        acc = vfmaq_f32(acc, v, v);
    }
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

std::size_t count_within_neon(const float* x, const float* low, const float* up, std::size_t n) {
    std::size_t count = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t v = vld1q_f32(x + i);
        const uint32x4_t in = vandq_u32(vcgeq_f32(v, vld1q_f32(low + i)), vcleq_f32(v, vld1q_f32(up + i)));
        count += vaddvq_u32(vshrq_n_u32(in, 31));
    }
    for (; i < n; ++i) count += (x[i] >= low[i] && x[i] <= up[i]) ? 1 : 0;
    return count;
}

float standardized_sq_neon(const float* x, const float* mu, const float* inv_sigma, std::size_t n) {
    float32x4_t acc = vdupq_n_f32(0.0f);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t z = vmulq_f32(vsubq_f32(vld1q_f32(x + i), vld1q_f32(mu + i)), vld1q_f32(inv_sigma + i));
        acc = vfmaq_f32(acc, z, z);
    }
    float s = vaddvq_f32(acc);
    for (; i < n; ++i) {
        const float z = (x[i] - mu[i]) * inv_sigma[i];
        s += z * z;
    }
    return s;
}

}  // namespace

const KernelTable* neon_kernels() {
    static const KernelTable table{Isa::Neon,         dot_neon,          axpy_neon,
                                   add_inplace_neon,  clamp_neon,        sum_squares_neon,
                                   count_within_neon, standardized_sq_neon};
    return &table;
}

}  // namespace actguard::simd
