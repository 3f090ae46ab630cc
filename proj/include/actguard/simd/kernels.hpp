#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel float kernels behind the tensor engine and the detector.
//
// Every kernel has a portable scalar reference implementation. Vector
// variants (AVX2+FMA on x86-64, NEON on aarch64) are compiled into the
// library when the toolchain targets that architecture and are selected at
// runtime after a CPU feature check. The environment variable ACTGUARD_SIMD
// (scalar | avx2 | neon | auto) overrides the choice; an unavailable request
// falls back to scalar.
//
// Reductions (dot, sum_squares, squared_distance) may round differently
// between variants. Element-wise kernels (clamp, count_within) are exact.

namespace actguard::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;
    // sum_i x[i] * y[i]
    float (*dot)(const float* x, const float* y, std::size_t n);
    // y[i] += a * x[i]
    void (*axpy)(float a, const float* x, float* y, std::size_t n);
    // y[i] += x[i]
    void (*add_inplace)(const float* x, float* y, std::size_t n);
    // y[i] = max(min(x[i], up[i]), low[i])
    void (*clamp)(const float* x, const float* low, const float* up, float* y, std::size_t n);
    // sum_i x[i]^2
    float (*sum_squares)(const float* x, std::size_t n);
    // number of i with low[i] <= x[i] <= up[i]
    std::size_t (*count_within)(const float* x, const float* low, const float* up, std::size_t n);
    // sum_i ((x[i] - mu[i]) * inv_sigma[i])^2
    float (*standardized_sq)(const float* x, const float* mu, const float* inv_sigma, std::size_t n);
};

const KernelTable& scalar_kernels();
// nullptr when the variant is not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table chosen at first use; stable for the life of the process.
const KernelTable& active();

// Span-based wrappers over active().
float dot(std::span<const float> x, std::span<const float> y);
void axpy(float a, std::span<const float> x, std::span<float> y);
void add_inplace(std::span<const float> x, std::span<float> y);
void clamp(std::span<const float> x, std::span<const float> low, std::span<const float> up,
           std::span<float> y);
float sum_squares(std::span<const float> x);
std::size_t count_within(std::span<const float> x, std::span<const float> low,
                         std::span<const float> up);
float standardized_sq(std::span<const float> x, std::span<const float> mu,
                      std::span<const float> inv_sigma);

}  // namespace actguard::simd
