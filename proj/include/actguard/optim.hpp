#pragma once

#include <cstdint>
#include <vector>

#include "actguard/tensor.hpp"

namespace actguard {

struct AdamConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
    // Decoupled (AdamW) decay; 0 gives plain Adam.
    float weight_decay = 0.0f;
};

struct OptimizerState {
    AdamConfig config;
    std::vector<std::vector<float>> first_moment;
    std::vector<std::vector<float>> second_moment;
    std::uint64_t step = 0;
};

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, AdamConfig config);

// One bias-corrected Adam step over `params` using their accumulated grads.
// Throws InvalidArgument if a parameter has no grad or the state does not
// match the parameter list.
void adam_update(std::vector<Tensor>& params, OptimizerState& state);

void zero_grads(std::vector<Tensor>& params);

}  // namespace actguard
