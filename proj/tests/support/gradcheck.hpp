#pragma once

// Central finite-difference gradient checks over seeded random graphs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "actguard/model.hpp"
#include "actguard/ops.hpp"
#include "actguard/tensor.hpp"

namespace gradcheck {

using actguard::Tensor;

struct Case {
    std::string name;
    std::vector<Tensor> inputs;  // leaves that receive gradients
    std::function<Tensor(const std::vector<Tensor>&)> build;
};

struct Outcome {
    std::string name;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

inline double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1.0}); }

// Projects a graph output to a scalar: sum(out * R) with R fixed per case.
inline double project(const Tensor& out, const std::vector<float>& r) {
    double total = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) total += static_cast<double>(out.data()[i]) * r[i];
    return total;
}

// At most `per_input` coordinates of every input are perturbed.
inline Outcome check(const Case& c, std::uint64_t seed, double h = 1e-3, std::size_t per_input = 24) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);

    for (auto in : c.inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }
    const Tensor out = c.build(c.inputs);
    std::vector<float> r(out.numel());
    for (auto& v : r) v = u(rng);
    const Tensor loss = actguard::sum(actguard::mul(out, Tensor::from(out.shape(), r)));
    loss.backward();

    Outcome result{c.name, 0.0, 0};
    for (auto in : c.inputs) {
        std::vector<float> analytic(in.numel(), 0.0f);
        if (in.has_grad()) std::copy(in.grad().begin(), in.grad().end(), analytic.begin());

        std::vector<std::size_t> coords(in.numel());
        for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(std::min(per_input, coords.size()));

        for (std::size_t i : coords) {
            auto data = in.mutable_data();
            const float saved = data[i];
            double f_plus, f_minus;
            {
                actguard::NoGradGuard guard;
                data[i] = saved + static_cast<float>(h);
                f_plus = project(c.build(c.inputs), r);
                data[i] = saved - static_cast<float>(h);
                f_minus = project(c.build(c.inputs), r);
            }
            data[i] = saved;
            const double numeric = (f_plus - f_minus) / (2.0 * h);
            result.max_rel_error = std::max(result.max_rel_error, rel_error(analytic[i], numeric));
            ++result.checked;
        }
    }
    return result;
}

inline Tensor random_tensor(actguard::Shape shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f) {
    std::uniform_real_distribution<float> u(lo, hi);
    std::vector<float> v(actguard::shape_numel(shape));
    for (auto& x : v) x = u(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

// Values bounded away from zero by at least `gap`, random sign.
inline Tensor away_from_zero(actguard::Shape shape, std::mt19937_64& rng, float gap = 0.05f) {
    std::uniform_real_distribution<float> mag(gap, 1.0f);
    std::bernoulli_distribution sign(0.5);
    std::vector<float> v(actguard::shape_numel(shape));
    for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
    return Tensor::from(std::move(shape), std::move(v));
}

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline actguard::ModelConfig tiny_model_config(std::uint64_t seed) {
    actguard::ModelConfig cfg;
    cfg.vocab_size = 12;
    cfg.max_sequence_length = 8;
    cfg.hidden_dim = 8;
    cfg.layer_count = 2;
    cfg.head_count = 2;
    cfg.ffn_dim = 16;
    cfg.class_count = 3;
    cfg.dropout = 0.0f;
    cfg.seed = seed;
    return cfg;
}

// One random graph per op kind, shapes and values drawn from `seed`.
inline std::vector<Case> make_cases(std::uint64_t seed) {
    using namespace actguard;
    std::mt19937_64 rng(seed);
    std::vector<Case> cases;
    const std::size_t m = pick(rng, 1, 4), n = pick(rng, 2, 5), k = pick(rng, 1, 4);

    cases.push_back({"add_broadcast", {random_tensor({m, n}, rng), random_tensor({1, n}, rng)},
                     [](const auto& in) { return add(in[0], in[1]); }});
    cases.push_back({"sub_broadcast", {random_tensor({m, n}, rng), random_tensor({m, 1}, rng)},
                     [](const auto& in) { return sub(in[0], in[1]); }});
    cases.push_back({"mul_broadcast", {random_tensor({m, n}, rng), random_tensor({n}, rng)},
                     [](const auto& in) { return mul(in[0], in[1]); }});
    cases.push_back({"scale", {random_tensor({m, n}, rng)}, [](const auto& in) { return scale(in[0], -1.7f); }});
    cases.push_back({"matmul", {random_tensor({m, k}, rng), random_tensor({k, n}, rng)},
                     [](const auto& in) { return matmul(in[0], in[1]); }});
    cases.push_back({"matmul_nt", {random_tensor({m, k}, rng), random_tensor({n, k}, rng)},
                     [](const auto& in) { return matmul_nt(in[0], in[1]); }});
    cases.push_back({"transpose_reshape", {random_tensor({m, n}, rng)},
                     [m, n](const auto& in) { return mul(reshape(transpose(in[0]), {m * n}), reshape(in[0], {m * n})); }});
    cases.push_back({"softmax_rows", {random_tensor({m, n}, rng, -2.0f, 2.0f)},
                     [](const auto& in) { return softmax_rows(in[0]); }});
    cases.push_back({"layer_norm",
                     {random_tensor({m, n}, rng, -2.0f, 2.0f), random_tensor({n}, rng), random_tensor({n}, rng)},
                     [](const auto& in) { return layer_norm(in[0], in[1], in[2]); }});
    cases.push_back({"gelu", {random_tensor({m, n}, rng, -3.0f, 3.0f)}, [](const auto& in) { return gelu(in[0]); }});
    cases.push_back({"relu", {away_from_zero({m, n}, rng)}, [](const auto& in) { return relu(in[0]); }});
    cases.push_back({"abs", {away_from_zero({m, n}, rng)}, [](const auto& in) { return abs(in[0]); }});
    {
        std::vector<std::int32_t> ids(pick(rng, 1, 6));
        for (auto& id : ids) id = static_cast<std::int32_t>(pick(rng, 0, 4));
        cases.push_back({"embedding", {random_tensor({5, n}, rng)},
                         [ids](const auto& in) { return embedding(in[0], ids); }});
    }
    cases.push_back({"slice_concat_rows", {random_tensor({m + 2, n}, rng), random_tensor({1, n}, rng)},
                     [](const auto& in) {
                         return concat_rows({slice_rows(in[0], 1, 2), in[1], slice_rows(in[0], 0, 1)});
                     }});
    cases.push_back({"slice_concat_cols", {random_tensor({m, n + 2}, rng), random_tensor({m, 1}, rng)},
                     [](const auto& in) {
                         return concat_cols({in[1], slice_cols(in[0], 2, 1), slice_cols(in[0], 0, 2)});
                     }});
    {
        // Each x lands inside, above or below its interval by at least 0.05.
        std::vector<float> x(m * n), lo(m * n), up(m * n);
        std::uniform_real_distribution<float> u(-1.0f, 1.0f), gap(0.05f, 0.5f);
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = u(rng);
            switch (pick(rng, 0, 2)) {
                case 0: lo[i] = x[i] - gap(rng); up[i] = x[i] + gap(rng); break;
                case 1: up[i] = x[i] - gap(rng); lo[i] = up[i] - gap(rng); break;
                default: lo[i] = x[i] + gap(rng); up[i] = lo[i] + gap(rng); break;
            }
        }
        cases.push_back({"clamp",
                         {Tensor::from({m, n}, x), Tensor::from({m, n}, lo), Tensor::from({m, n}, up)},
                         [](const auto& in) { return clamp(in[0], in[1], in[2]); }});
    }
    cases.push_back({"sum_mean", {random_tensor({m, n}, rng)},
                     [](const auto& in) { return add(sum(in[0]), scale(mean(mul(in[0], in[0])), 3.0f)); }});
    {
        const std::size_t target = pick(rng, 0, n - 1);
        cases.push_back({"cross_entropy", {random_tensor({1, n}, rng, -2.0f, 2.0f)},
                         [target](const auto& in) { return cross_entropy(in[0], target); }});
    }
    cases.push_back({"squared_error", {random_tensor({m, n}, rng), random_tensor({m, n}, rng)},
                     [](const auto& in) { return squared_error(in[0], in[1]); }});
    cases.push_back({"l2_norm", {away_from_zero({m, n}, rng)}, [](const auto& in) { return l2_norm(in[0]); }});
    {
        const std::uint64_t mask_seed = rng();
        cases.push_back({"dropout", {random_tensor({m, n}, rng)}, [mask_seed](const auto& in) {
                             std::mt19937_64 r(mask_seed);
                             return dropout(in[0], 0.3f, r);
                         }});
    }
    {
        // Single-head self-attention with residual and post-norm.
        const std::size_t t = pick(rng, 2, 4), d = 4;
        cases.push_back({"attention_block",
                         {random_tensor({t, d}, rng), random_tensor({d, d}, rng), random_tensor({d, d}, rng),
                          random_tensor({d, d}, rng), random_tensor({d}, rng), random_tensor({d}, rng)},
                         [d](const auto& in) {
                             const Tensor q = matmul(in[0], in[1]);
                             const Tensor kk = matmul(in[0], in[2]);
                             const Tensor v = matmul(in[0], in[3]);
                             const Tensor att = softmax_rows(scale(matmul_nt(q, kk), 1.0f / std::sqrt(float(d))));
                             return layer_norm(add(in[0], gelu(matmul(att, v))), in[4], in[5]);
                         }});
    }
    return cases;
}

// Full model: gradients with respect to a sample of its parameters.
inline Case model_case(std::uint64_t seed) {
    using namespace actguard;
    auto model = std::make_shared<TransformerClassifier>(tiny_model_config(seed));
    std::mt19937_64 rng(seed);
    std::vector<std::int32_t> ids(pick(rng, 1, 6));
    for (auto& id : ids) id = static_cast<std::int32_t>(pick(rng, 3, 11));
    std::vector<Tensor> params;
    // Initial embeddings are small enough that the embedding layer norm is
    // sharply curved at h = 1e-3; unit-scale tables keep truncation error low.
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (const char* name : {"embed.token", "embed.position"}) {
        for (auto& v : model->parameter(name).mutable_data()) v = u(rng);
    }
    for (const auto& [name, p] : model->named_parameters()) {
        if (name.find("ln") == std::string::npos || pick(rng, 0, 1) == 0) params.push_back(p);
    }
    return {"model_forward", params, [model, ids](const auto&) { return model->forward(ids).logits; }};
}

// Bounded forward with respect to the bounds, every neuron at least 0.05
// away from its clamp boundaries.
inline Case bounded_case(std::uint64_t seed, actguard::ClampScope scope = actguard::ClampScope::ClassToken) {
    using namespace actguard;
    auto model = std::make_shared<TransformerClassifier>(tiny_model_config(seed + 101));
    model->set_requires_grad(false);
    std::mt19937_64 rng(seed);
    std::vector<std::int32_t> ids(pick(rng, 1, 6));
    for (auto& id : ids) id = static_cast<std::int32_t>(pick(rng, 3, 11));
    const ActivationTrace trace = forward_logits(*model, ids).second;
    std::vector<float> lo(trace.values.size()), up(trace.values.size());
    std::uniform_real_distribution<float> gap(0.05f, 0.5f);
    // Only the last layer is clamped tightly, so the earlier layers' traces
    // stay where they were measured.
    for (std::size_t i = 0; i < lo.size(); ++i) {
        const float x = trace.values[i];
        const bool last = i / trace.width + 1 == trace.layers;
        switch (last ? pick(rng, 0, 2) : 0) {
            case 0: lo[i] = x - gap(rng) - (last ? 0.0f : 20.0f); up[i] = x + gap(rng) + (last ? 0.0f : 20.0f); break;
            case 1: up[i] = x - gap(rng); lo[i] = up[i] - gap(rng); break;
            default: lo[i] = x + gap(rng); up[i] = lo[i] + gap(rng); break;
        }
    }
    const Shape shape{trace.layers, trace.width};
    return {"bounded_forward",
            {Tensor::from(shape, lo), Tensor::from(shape, up)},
            [model, ids, scope](const auto& in) {
                ForwardOptions options;
                options.z_low = &in[0];
                options.z_up = &in[1];
                options.scope = scope;
                return model->forward(ids, options).logits;
            }};
}

}  // namespace gradcheck
