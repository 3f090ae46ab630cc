#include "actguard/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "actguard/errors.hpp"

namespace actguard {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->data.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw InvalidArgument("tensor shape " + shape_string(shape) + " does not match " +
                              std::to_string(values.size()) + " values");
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return from({}, {value}, requires_grad); }

float Tensor::item() const {
    if (numel() != 1) throw InvalidArgument("item() on tensor of shape " + shape_string(shape()));
    return node_->data[0];
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
    auto node = std::make_shared<TensorNode>();
    node->shape = node_->shape;
    node->data = node_->data;
    return Tensor(std::move(node));
}

void Tensor::backward() const {
    if (numel() != 1) {
        throw InvalidArgument("backward() requires a scalar loss, got shape " + shape_string(shape()));
    }
    if (!node_->requires_grad) return;

    // Iterative post-order DFS in parent order gives a deterministic topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    std::vector<std::pair<TensorNode*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (TensorNode* node : order) {
        if (node->backward_fn) {
            // Interior nodes start from zero on every backward pass.
            node->grad.assign(node->data.size(), 0.0f);
        } else {
            node->ensure_grad();
        }
    }
    node_->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_mode_enabled() { return g_grad_enabled; }

}  // namespace actguard
