#include "actguard/model.hpp"

#include <algorithm>
#include <cmath>

#include "actguard/errors.hpp"
#include "actguard/ops.hpp"

namespace actguard {

std::string to_string(ActivationKind kind) { return kind == ActivationKind::Gelu ? "gelu" : "relu"; }

ActivationKind activation_from_string(const std::string& name) {
    if (name == "gelu") return ActivationKind::Gelu;
    if (name == "relu") return ActivationKind::Relu;
    throw InvalidArgument("unknown activation '" + name + "'");
}

void ModelConfig::validate() const {
    if (vocab_size < 4) throw InvalidArgument("vocab_size must be at least 4");
    if (max_sequence_length < 2) throw InvalidArgument("max_sequence_length must be at least 2");
    if (hidden_dim == 0 || head_count == 0 || hidden_dim % head_count != 0) {
        throw InvalidArgument("hidden_dim must be a positive multiple of head_count");
    }
    if (layer_count < 1) throw InvalidArgument("layer_count must be >= 1");
    if (class_count < 2) throw InvalidArgument("class_count must be >= 2");
    if (dropout < 0.0f || dropout >= 1.0f) throw InvalidArgument("dropout must lie in [0, 1)");
    if (cls_token_id < 0 || static_cast<std::size_t>(cls_token_id) >= vocab_size) {
        throw InvalidArgument("cls_token_id outside the vocabulary");
    }
}

ActivationTrace ForwardResult::trace() const {
    ActivationTrace t;
    t.layers = block_outputs.size();
    t.width = block_outputs.empty() ? 0 : block_outputs.front().numel();
    t.values.reserve(t.layers * t.width);
    for (const auto& row : block_outputs) t.values.insert(t.values.end(), row.data().begin(), row.data().end());
    return t;
}

namespace {

Tensor normal_tensor(Shape shape, float stddev, std::mt19937_64& rng) {
    std::normal_distribution<float> dist(0.0f, stddev);
    std::vector<float> values(shape_numel(shape));
    for (float& v : values) v = dist(rng);
    return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace

Tensor TransformerClassifier::register_param(const std::string& name, Tensor t) {
    params_.emplace_back(name, t);
    return t;
}

TransformerClassifier::TransformerClassifier(ModelConfig config) : config_(std::move(config)) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const std::size_t d = config_.hidden_dim;
    const std::size_t f = config_.effective_ffn_dim();
    const float embed_std = 0.02f;
    const float d_std = 1.0f / std::sqrt(static_cast<float>(d));
    const float f_std = 1.0f / std::sqrt(static_cast<float>(f));

    token_embedding_ = register_param("embed.token", normal_tensor({config_.vocab_size, d}, embed_std, rng));
    position_embedding_ =
        register_param("embed.position", normal_tensor({config_.max_sequence_length, d}, embed_std, rng));
    embed_ln_gamma_ = register_param("embed.ln.gamma", Tensor::full({d}, 1.0f, true));
    embed_ln_beta_ = register_param("embed.ln.beta", Tensor::zeros({d}, true));

    for (std::size_t l = 0; l < config_.layer_count; ++l) {
        const std::string p = "blocks." + std::to_string(l) + ".";
        Block b;
        b.wq = register_param(p + "attn.wq", normal_tensor({d, d}, d_std, rng));
        b.bq = register_param(p + "attn.bq", Tensor::zeros({d}, true));
        b.wk = register_param(p + "attn.wk", normal_tensor({d, d}, d_std, rng));
        b.bk = register_param(p + "attn.bk", Tensor::zeros({d}, true));
        b.wv = register_param(p + "attn.wv", normal_tensor({d, d}, d_std, rng));
        b.bv = register_param(p + "attn.bv", Tensor::zeros({d}, true));
        b.wo = register_param(p + "attn.wo", normal_tensor({d, d}, d_std, rng));
        b.bo = register_param(p + "attn.bo", Tensor::zeros({d}, true));
        b.ln1_gamma = register_param(p + "ln1.gamma", Tensor::full({d}, 1.0f, true));
        b.ln1_beta = register_param(p + "ln1.beta", Tensor::zeros({d}, true));
        b.w1 = register_param(p + "ffn.w1", normal_tensor({d, f}, d_std, rng));
        b.b1 = register_param(p + "ffn.b1", Tensor::zeros({f}, true));
        b.w2 = register_param(p + "ffn.w2", normal_tensor({f, d}, f_std, rng));
        b.b2 = register_param(p + "ffn.b2", Tensor::zeros({d}, true));
        b.ln2_gamma = register_param(p + "ln2.gamma", Tensor::full({d}, 1.0f, true));
        b.ln2_beta = register_param(p + "ln2.beta", Tensor::zeros({d}, true));
        blocks_.push_back(std::move(b));
    }
    head_weight_ = register_param("head.weight", normal_tensor({d, config_.class_count}, d_std, rng));
    head_bias_ = register_param("head.bias", Tensor::zeros({config_.class_count}, true));
}

TransformerClassifier TransformerClassifier::clone() const {
    TransformerClassifier copy(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto dst = copy.params_[i].second.mutable_data();
        const auto src = params_[i].second.data();
        std::copy(src.begin(), src.end(), dst.begin());
        copy.params_[i].second.set_requires_grad(params_[i].second.requires_grad());
    }
    return copy;
}

std::vector<Tensor> TransformerClassifier::parameters() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(t);
    return out;
}

std::size_t TransformerClassifier::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

Tensor TransformerClassifier::parameter(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) return t;
    }
    throw InvalidArgument("no parameter named '" + name + "'");
}

void TransformerClassifier::set_requires_grad(bool on) {
    for (auto& [name, t] : params_) t.set_requires_grad(on);
}

Tensor TransformerClassifier::attention(const Block& block, const Tensor& x) const {
    const std::size_t heads = config_.head_count;
    const std::size_t head_dim = config_.hidden_dim / heads;
    const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(head_dim));
    const Tensor q = add(matmul(x, block.wq), block.bq);
    const Tensor k = add(matmul(x, block.wk), block.bk);
    const Tensor v = add(matmul(x, block.wv), block.bv);
    std::vector<Tensor> outputs;
    outputs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t start = h * head_dim;
        const Tensor scores = scale(matmul_nt(slice_cols(q, start, head_dim), slice_cols(k, start, head_dim)), inv_sqrt);
        outputs.push_back(matmul(softmax_rows(scores), slice_cols(v, start, head_dim)));
    }
    const Tensor merged = heads == 1 ? outputs.front() : concat_cols(outputs);
    return add(matmul(merged, block.wo), block.bo);
}

ForwardResult TransformerClassifier::forward(std::span<const std::int32_t> tokens, const ForwardOptions& options) const {
    if (tokens.empty()) throw InvalidArgument("forward: empty token sequence");
    if ((options.z_low == nullptr) != (options.z_up == nullptr)) {
        throw InvalidArgument("forward: both bounds must be supplied together");
    }
    const std::size_t d = config_.hidden_dim;
    const std::size_t L = config_.layer_count;
    if (options.z_low) {
        const Shape expected{L, d};
        if (options.z_low->shape() != expected || options.z_up->shape() != expected) {
            throw InvalidArgument("forward: bounds must have shape " + shape_string(expected));
        }
    }
    const bool drop = options.training && config_.dropout > 0.0f;
    if (drop && options.rng == nullptr) throw InvalidArgument("forward: training with dropout needs an rng");

    const std::size_t keep = std::min(tokens.size(), config_.max_sequence_length - 1);
    std::vector<std::int32_t> ids;
    ids.reserve(keep + 1);
    ids.push_back(config_.cls_token_id);
    ids.insert(ids.end(), tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(keep));
    std::vector<std::int32_t> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<std::int32_t>(i);
    const std::size_t T = ids.size();

    Tensor x = add(embedding(token_embedding_, ids), embedding(position_embedding_, positions));
    x = layer_norm(x, embed_ln_gamma_, embed_ln_beta_);
    if (drop) x = dropout(x, config_.dropout, *options.rng);

    ForwardResult result;
    result.block_outputs.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        const Block& b = blocks_[l];
        Tensor attn = attention(b, x);
        if (drop) attn = dropout(attn, config_.dropout, *options.rng);
        const Tensor h = layer_norm(add(x, attn), b.ln1_gamma, b.ln1_beta);
        Tensor inner = add(matmul(h, b.w1), b.b1);
        inner = config_.activation == ActivationKind::Gelu ? gelu(inner) : relu(inner);
        Tensor ffn = add(matmul(inner, b.w2), b.b2);
        if (drop) ffn = dropout(ffn, config_.dropout, *options.rng);
        x = layer_norm(add(h, ffn), b.ln2_gamma, b.ln2_beta);

        if (options.z_low) {
            const Tensor low = slice_rows(*options.z_low, l, 1);
            const Tensor up = slice_rows(*options.z_up, l, 1);
            if (options.scope == ClampScope::AllTokens) {
                x = clamp(x, low, up);
            } else {
                const Tensor cls = clamp(slice_rows(x, 0, 1), low, up);
                x = T == 1 ? cls : concat_rows({cls, slice_rows(x, 1, T - 1)});
            }
        }
        result.block_outputs.push_back(slice_rows(x, 0, 1));
    }
    result.logits = add(matmul(result.block_outputs.back(), head_weight_), head_bias_);
    return result;
}

TransformerClassifier init_model(const ModelConfig& config) { return TransformerClassifier(config); }

std::size_t expected_parameter_count(const ModelConfig& c) {
    const std::size_t d = c.hidden_dim;
    const std::size_t f = c.effective_ffn_dim();
    const std::size_t embed = c.vocab_size * d + c.max_sequence_length * d + 2 * d;
    const std::size_t attn = 4 * (d * d + d);
    const std::size_t ffn = d * f + f + f * d + d;
    const std::size_t norms = 2 * 2 * d;
    const std::size_t head = d * c.class_count + c.class_count;
    return embed + c.layer_count * (attn + ffn + norms) + head;
}

std::pair<std::vector<float>, ActivationTrace> forward_logits(const TransformerClassifier& model,
                                                              std::span<const std::int32_t> tokens) {
    NoGradGuard guard;
    const ForwardResult r = model.forward(tokens);
    return {std::vector<float>(r.logits.data().begin(), r.logits.data().end()), r.trace()};
}

std::vector<float> forward_bounded(const TransformerClassifier& model, std::span<const std::int32_t> tokens,
                                   const Tensor& z_low, const Tensor& z_up, ClampScope scope) {
    NoGradGuard guard;
    ForwardOptions options;
    options.z_low = &z_low;
    options.z_up = &z_up;
    options.scope = scope;
    const ForwardResult r = model.forward(tokens, options);
    return {r.logits.data().begin(), r.logits.data().end()};
}

std::size_t argmax(std::span<const float> values) {
    return static_cast<std::size_t>(std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

std::vector<float> softmax(std::span<const float> logits) {
    std::vector<float> out(logits.size());
    if (logits.empty()) return out;
    const float peak = *std::max_element(logits.begin(), logits.end());
    float total = 0.0f;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - peak);
        total += out[i];
    }
    for (float& v : out) v /= total;
    return out;
}

}  // namespace actguard
