#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "actguard/tensor.hpp"

// Differentiable tensor operations. Every function returns a new tensor
// whose backward rule is recorded when grad mode is on and at least one
// input requires grad.

namespace actguard {

// Element-wise with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, float factor);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// [m,k] x [n,k]^T -> [m,n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

// Row-wise over the last dimension of a rank-1 or rank-2 tensor.
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps = 1e-5f);

// tanh approximation
Tensor gelu(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor abs(const Tensor& x);

// Gathers rows of table [V,d] -> [ids.size(), d].
Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids);

Tensor slice_rows(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor concat_cols(const std::vector<Tensor>& parts);

// y = max(min(x, up), low), low/up broadcast to x's shape. Gradient goes to
// up where x > up, to low where x < low, and to x otherwise (ties included).
// Throws InvalidArgument on a shape that cannot broadcast or low > up.
Tensor clamp(const Tensor& x, const Tensor& low, const Tensor& up);

// Scalar reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// -log softmax(logits)[target] for a single row of logits.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
// sum (a - b)^2, equal shapes.
Tensor squared_error(const Tensor& a, const Tensor& b);
// sqrt(sum x^2); gradient is zero at the origin.
Tensor l2_norm(const Tensor& x);

// Inverted dropout; identity when rate == 0.
Tensor dropout(const Tensor& x, float rate, std::mt19937_64& rng);

}  // namespace actguard
