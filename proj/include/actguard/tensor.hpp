#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace actguard {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorNode {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until first needed
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Propagates this node's grad into its parents' grads.
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0f);
    }
};

// Shared handle to a node of the autograd graph. Copies alias the same
// storage; use clone() for an independent value.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<const float> data() const { return node_->data; }
    std::span<float> mutable_data() { return node_->data; }
    float item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const float> grad() const { return node_->grad; }
    std::span<float> mutable_grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad();

    // Accumulates d(this)/dp into every requires_grad ancestor p.
    // Throws InvalidArgument unless this tensor holds exactly one element.
    void backward() const;

    // Detached deep copy (no graph history, requires_grad=false).
    Tensor clone() const;

    TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<TensorNode>& shared() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// While alive, newly created op results record no graph history on this
// thread.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_mode_enabled();

}  // namespace actguard
