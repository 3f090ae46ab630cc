#include "actguard/optim.hpp"

#include <cmath>

#include "actguard/errors.hpp"

namespace actguard {

OptimizerState make_optimizer_state(const std::vector<Tensor>& params, AdamConfig config) {
    OptimizerState state;
    state.config = config;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.numel(), 0.0f);
        state.second_moment.emplace_back(p.numel(), 0.0f);
    }
    return state;
}

void adam_update(std::vector<Tensor>& params, OptimizerState& state) {
    if (params.size() != state.first_moment.size()) {
        throw InvalidArgument("optimizer state tracks " + std::to_string(state.first_moment.size()) +
                              " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) throw InvalidArgument("adam_update: parameter " + std::to_string(i) + " has no grad");
        if (state.first_moment[i].size() != params[i].numel()) {
            throw InvalidArgument("adam_update: moment buffer shape mismatch");
        }
    }
    const auto& cfg = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const float correction1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t));
    const float correction2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto value = params[i].mutable_data();
        const auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < value.size(); ++j) {
            const float g = grad[j];
            m[j] = cfg.beta1 * m[j] + (1.0f - cfg.beta1) * g;
            v[j] = cfg.beta2 * v[j] + (1.0f - cfg.beta2) * g * g;
            const float m_hat = m[j] / correction1;
            const float v_hat = v[j] / correction2;
            if (cfg.weight_decay != 0.0f) value[j] -= cfg.learning_rate * cfg.weight_decay * value[j];
            value[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace actguard
