#include "actguard/simd/kernels.hpp"

#include <algorithm>

namespace actguard::simd {
namespace {

float dot_ref(const float* x, const float* y, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_ref(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add_inplace_ref(const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void clamp_ref(const float* x, const float* low, const float* up, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(std::min(x[i], up[i]), low[i]);
}

float sum_squares_ref(const float* x, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

std::size_t count_within_ref(const float* x, const float* low, const float* up, std::size_t n) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) count += (x[i] >= low[i] && x[i] <= up[i]) ? 1 : 0;
    return count;
}

float standardized_sq_ref(const float* x, const float* mu, const float* inv_sigma, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        const float z = (x[i] - mu[i]) * inv_sigma[i];
        acc += z * z;
    }
    return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::Scalar,     dot_ref,          axpy_ref,
                                   add_inplace_ref, clamp_ref,        sum_squares_ref,
                                   count_within_ref, standardized_sq_ref};
    return table;
}

}  // namespace actguard::simd
