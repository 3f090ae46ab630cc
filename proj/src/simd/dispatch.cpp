#include <cassert>
#include <cstdlib>
#include <string>

#include "actguard/simd/kernels.hpp"

namespace actguard::simd {

#ifndef ACTGUARD_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif
#ifndef ACTGUARD_HAVE_NEON
const KernelTable* neon_kernels() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
        case Isa::Neon: return "neon";
    }
    return "unknown";
}

namespace {

const KernelTable& select() {
    const char* env = std::getenv("ACTGUARD_SIMD");
    const std::string request = env ? env : "auto";
    if (request == "scalar") return scalar_kernels();
    if (request == "avx2") return avx2_kernels() ? *avx2_kernels() : scalar_kernels();
    if (request == "neon") return neon_kernels() ? *neon_kernels() : scalar_kernels();
    if (const auto* t = avx2_kernels()) return *t;
    if (const auto* t = neon_kernels()) return *t;
    return scalar_kernels();
}

}  // namespace

const KernelTable& active() {
    static const KernelTable& table = select();
    return table;
}

float dot(std::span<const float> x, std::span<const float> y) {
    assert(x.size() == y.size());
    return active().dot(x.data(), y.data(), x.size());
}

void axpy(float a, std::span<const float> x, std::span<float> y) {
    assert(x.size() == y.size());
    active().axpy(a, x.data(), y.data(), x.size());
}

void add_inplace(std::span<const float> x, std::span<float> y) {
    assert(x.size() == y.size());
    active().add_inplace(x.data(), y.data(), x.size());
}

void clamp(std::span<const float> x, std::span<const float> low, std::span<const float> up,
           std::span<float> y) {
    assert(x.size() == low.size() && x.size() == up.size() && x.size() == y.size());
    active().clamp(x.data(), low.data(), up.data(), y.data(), x.size());
}

float sum_squares(std::span<const float> x) { return active().sum_squares(x.data(), x.size()); }

std::size_t count_within(std::span<const float> x, std::span<const float> low,
                         std::span<const float> up) {
    assert(x.size() == low.size() && x.size() == up.size());
    return active().count_within(x.data(), low.data(), up.data(), x.size());
}

float standardized_sq(std::span<const float> x, std::span<const float> mu,
                      std::span<const float> inv_sigma) {
    assert(x.size() == mu.size() && x.size() == inv_sigma.size());
    return active().standardized_sq(x.data(), mu.data(), inv_sigma.data(), x.size());
}

}  // namespace actguard::simd
