#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "actguard/tensor.hpp"

namespace actguard {

enum class ActivationKind { Gelu, Relu };

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

struct ModelConfig {
    std::size_t vocab_size = 0;
    // Includes the prepended classification token.
    std::size_t max_sequence_length = 32;
    std::size_t hidden_dim = 64;
    std::size_t layer_count = 2;
    std::size_t head_count = 4;
    // 0 selects 4 * hidden_dim.
    std::size_t ffn_dim = 0;
    std::size_t class_count = 2;
    ActivationKind activation = ActivationKind::Gelu;
    float dropout = 0.1f;
    std::int32_t cls_token_id = 2;
    std::uint64_t seed = 0;

    std::size_t effective_ffn_dim() const { return ffn_dim == 0 ? 4 * hidden_dim : ffn_dim; }
    // Throws InvalidArgument when the configuration is inconsistent.
    void validate() const;
};

// Classification-token activations at the output of every block: `layers`
// rows of `width` values, row-major.
struct ActivationTrace {
    std::size_t layers = 0;
    std::size_t width = 0;
    std::vector<float> values;

    std::span<const float> row(std::size_t layer) const {
        return std::span<const float>(values).subspan(layer * width, width);
    }
    float at(std::size_t layer, std::size_t neuron) const { return values[layer * width + neuron]; }
};

// Which token positions a bounded forward pass clamps at each block output.
enum class ClampScope { ClassToken, AllTokens };

struct ForwardResult {
    Tensor logits;                    // [1, class_count]
    std::vector<Tensor> block_outputs;  // classification-token rows, [1, d] each, graph-connected

    ActivationTrace trace() const;
};

struct ForwardOptions {
    bool training = false;
    std::mt19937_64* rng = nullptr;  // required when training with dropout
    // Optional per-layer bounds, [layer_count, d] each.
    const Tensor* z_low = nullptr;
    const Tensor* z_up = nullptr;
    ClampScope scope = ClampScope::ClassToken;
};

class TransformerClassifier {
public:
    // Seeded initialization: scaled-normal weights, zero biases, unit
    // layer-norm gains. Throws InvalidArgument on an invalid config.
    explicit TransformerClassifier(ModelConfig config);

    // Parameters are shared handles, so copies would alias; use clone().
    TransformerClassifier(const TransformerClassifier&) = delete;
    TransformerClassifier& operator=(const TransformerClassifier&) = delete;
    TransformerClassifier(TransformerClassifier&&) = default;
    TransformerClassifier& operator=(TransformerClassifier&&) = default;

    TransformerClassifier clone() const;

    const ModelConfig& config() const { return config_; }

    // Stable order; names are the checkpoint tensor keys.
    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const { return params_; }
    std::vector<Tensor> parameters() const;
    std::size_t parameter_count() const;
    Tensor parameter(const std::string& name) const;
    void set_requires_grad(bool on);

    // Truncates to max_sequence_length - 1 tokens and prepends the
    // classification token. Throws InvalidArgument on empty input or an
    // out-of-vocabulary id.
    ForwardResult forward(std::span<const std::int32_t> tokens, const ForwardOptions& options = {}) const;

private:
    struct Block {
        Tensor wq, bq, wk, bk, wv, bv, wo, bo;
        Tensor ln1_gamma, ln1_beta;
        Tensor w1, b1, w2, b2;
        Tensor ln2_gamma, ln2_beta;
    };

    Tensor register_param(const std::string& name, Tensor t);
    Tensor attention(const Block& block, const Tensor& x) const;

    ModelConfig config_;
    Tensor token_embedding_, position_embedding_, embed_ln_gamma_, embed_ln_beta_;
    std::vector<Block> blocks_;
    Tensor head_weight_, head_bias_;
    std::vector<std::pair<std::string, Tensor>> params_;
};

TransformerClassifier init_model(const ModelConfig& config);

// Closed-form parameter count for the architecture.
std::size_t expected_parameter_count(const ModelConfig& config);

// Plain logits plus the classification-token trace (evaluation mode).
std::pair<std::vector<float>, ActivationTrace> forward_logits(const TransformerClassifier& model,
                                                              std::span<const std::int32_t> tokens);

// Logits with every block's output clamped into [z_low[l], z_up[l]].
// Throws InvalidArgument on malformed bounds.
std::vector<float> forward_bounded(const TransformerClassifier& model, std::span<const std::int32_t> tokens,
                                   const Tensor& z_low, const Tensor& z_up,
                                   ClampScope scope = ClampScope::ClassToken);

std::size_t argmax(std::span<const float> values);
std::vector<float> softmax(std::span<const float> logits);

}  // namespace actguard
