#include "actguard/purifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "actguard/errors.hpp"
#include "actguard/ops.hpp"
#include "actguard/optim.hpp"

namespace actguard {

void BoundingIntervals::validate() const {
    const std::size_t n = layers * width;
    if (n == 0 || z_low.size() != n || z_up.size() != n) throw InvalidArgument("bounding intervals: bad shape");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(z_low[i] <= z_up[i])) throw InvalidArgument("bounding intervals: z_low > z_up");
    }
}

Tensor BoundingIntervals::low_tensor(bool requires_grad) const { return Tensor::from({layers, width}, z_low, requires_grad); }
Tensor BoundingIntervals::up_tensor(bool requires_grad) const { return Tensor::from({layers, width}, z_up, requires_grad); }

double BoundingIntervals::width_norm_sum() const {
    double total = 0.0;
    for (std::size_t l = 0; l < layers; ++l) {
        double sq = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
            const double w = static_cast<double>(z_up[l * width + i]) - z_low[l * width + i];
            sq += w * w;
        }
        total += std::sqrt(sq);
    }
    return total;
}

void PurifierConfig::validate(double detector_k) const {
    if (!(accuracy_drop >= 0.0 && accuracy_drop <= 1.0)) throw InvalidArgument("accuracy_drop must lie in [0, 1]");
    if (pi && !(*pi >= 0.0 && *pi <= 1.0)) throw InvalidArgument("pi must lie in [0, 1]");
    if (!(lagrange_lambda >= 0.0)) throw InvalidArgument("lagrange_lambda must be >= 0");
    if (!(init_margin >= detector_k)) throw InvalidArgument("init_margin must be >= the detector's k");
    if (!(learning_rate > 0.0f)) throw InvalidArgument("purifier learning_rate must be positive");
}

BoundingIntervals init_bounds(const GaussianStats& stats, double init_margin) {
    BoundingIntervals b;
    b.layers = stats.layers;
    b.width = stats.width;
    const std::size_t n = stats.neuron_count();
    b.z_low.resize(n);
    b.z_up.resize(n);
    const auto m = static_cast<float>(init_margin);
    for (std::size_t i = 0; i < n; ++i) {
        b.z_low[i] = stats.mu[i] - m * stats.sigma[i];
        b.z_up[i] = stats.mu[i] + m * stats.sigma[i];
    }
    return b;
}

namespace {

// Freezes model parameters while bounds are optimized.
class FrozenParameters {
public:
    explicit FrozenParameters(const TransformerClassifier& model) : params_(model.parameters()) {
        for (auto& p : params_) {
            previous_.push_back(p.requires_grad());
            p.set_requires_grad(false);
        }
    }
    ~FrozenParameters() {
        for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(previous_[i]);
    }
    FrozenParameters(const FrozenParameters&) = delete;
    FrozenParameters& operator=(const FrozenParameters&) = delete;

private:
    std::vector<Tensor> params_;
    std::vector<bool> previous_;
};

std::vector<std::vector<float>> plain_logits(const TransformerClassifier& model, const std::vector<EncodedSample>& data) {
    std::vector<std::vector<float>> out;
    out.reserve(data.size());
    for (const auto& s : data) out.push_back(forward_logits(model, s.ids).first);
    return out;
}

// Graph for the Lagrangian over `indices`; targets are constants.
Tensor lagrangian_graph(const TransformerClassifier& model, const Tensor& z_low, const Tensor& z_up,
                        const std::vector<EncodedSample>& data, const std::vector<std::vector<float>>& targets,
                        std::span<const std::size_t> indices, double lagrange_lambda, ClampScope scope) {
    ForwardOptions options;
    options.z_low = &z_low;
    options.z_up = &z_up;
    options.scope = scope;
    const std::size_t classes = model.config().class_count;
    Tensor fit;
    for (std::size_t idx : indices) {
        const ForwardResult r = model.forward(data[idx].ids, options);
        const Tensor target = Tensor::from({1, classes}, targets[idx]);
        const Tensor term = squared_error(r.logits, target);
        fit = fit.defined() ? add(fit, term) : term;
    }
    Tensor loss = scale(fit, 1.0f / static_cast<float>(indices.size() * classes));
    if (lagrange_lambda != 0.0) {
        Tensor widths;
        for (std::size_t l = 0; l < z_low.dim(0); ++l) {
            const Tensor w = l2_norm(sub(slice_rows(z_up, l, 1), slice_rows(z_low, l, 1)));
            widths = widths.defined() ? add(widths, w) : w;
        }
        loss = add(loss, scale(widths, static_cast<float>(lagrange_lambda)));
    }
    return loss;
}

double full_loss(const TransformerClassifier& model, const BoundingIntervals& bounds,
                 const std::vector<EncodedSample>& data, const std::vector<std::vector<float>>& targets,
                 double lagrange_lambda, ClampScope scope) {
    NoGradGuard guard;
    const Tensor low = bounds.low_tensor();
    const Tensor up = bounds.up_tensor();
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    const Tensor fit = lagrangian_graph(model, low, up, data, targets, all, 0.0, scope);
    return static_cast<double>(fit.item()) + lagrange_lambda * bounds.width_norm_sum();
}

BoundingIntervals descend(const TransformerClassifier& model, const GaussianStats& stats,
                          const std::vector<EncodedSample>& data, const std::vector<std::vector<float>>& targets,
                          const PurifierConfig& config, double lagrange_lambda) {
    BoundingIntervals start = init_bounds(stats, config.init_margin);
    std::vector<Tensor> z{start.low_tensor(true), start.up_tensor(true)};
    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    OptimizerState state = make_optimizer_state(z, adam);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batch = config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
    std::size_t cursor = order.size();
    for (std::size_t step = 0; step < config.steps; ++step) {
        if (cursor + batch > order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        const std::span<const std::size_t> indices(order.data() + cursor, batch);
        cursor += batch;

        zero_grads(z);
        const Tensor loss = lagrangian_graph(model, z[0], z[1], data, targets, indices, lagrange_lambda, config.scope);
        loss.backward();
        adam_update(z, state);

        auto low = z[0].mutable_data();
        const auto up = z[1].data();
        for (std::size_t i = 0; i < low.size(); ++i) low[i] = std::min(low[i], up[i]);
    }
    BoundingIntervals out;
    out.layers = start.layers;
    out.width = start.width;
    out.z_low.assign(z[0].data().begin(), z[0].data().end());
    out.z_up.assign(z[1].data().begin(), z[1].data().end());
    return out;
}

}  // namespace

double lagrangian_loss(const TransformerClassifier& model, const BoundingIntervals& bounds,
                       const std::vector<EncodedSample>& batch, double lagrange_lambda, ClampScope scope) {
    if (batch.empty()) throw InvalidArgument("lagrangian_loss: empty batch");
    bounds.validate();
    return full_loss(model, bounds, batch, plain_logits(model, batch), lagrange_lambda, scope);
}

double bounded_accuracy(const TransformerClassifier& model, const BoundingIntervals& bounds,
                        const std::vector<EncodedSample>& data, ClampScope scope) {
    if (data.empty()) throw InvalidArgument("bounded_accuracy: empty dataset");
    bounds.validate();
    const Tensor low = bounds.low_tensor();
    const Tensor up = bounds.up_tensor();
    std::size_t correct = 0;
    for (const auto& s : data) {
        if (argmax(forward_bounded(model, s.ids, low, up, scope)) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

OptimizeResult optimize_bounds(const TransformerClassifier& model, const GaussianStats& stats,
                               const std::vector<EncodedSample>& clean_validation, const PurifierConfig& config) {
    if (clean_validation.empty()) throw InvalidArgument("optimize_bounds: empty validation set");
    if (stats.layers != model.config().layer_count || stats.width != model.config().hidden_dim) {
        throw InvalidArgument("optimize_bounds: statistics do not match the model");
    }
    const auto targets = plain_logits(model, clean_validation);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < clean_validation.size(); ++i) {
        if (argmax(targets[i]) == clean_validation[i].label) ++correct;
    }
    OptimizeResult result;
    result.unbounded_accuracy = static_cast<double>(correct) / static_cast<double>(clean_validation.size());
    result.pi = config.pi ? *config.pi : std::max(0.0, result.unbounded_accuracy - config.accuracy_drop);

    const BoundingIntervals initial = init_bounds(stats, config.init_margin);
    const FrozenParameters frozen(model);
    double lambda = config.lagrange_lambda;
    double best_accuracy = 0.0;
    for (std::size_t attempt = 0; attempt <= config.max_restarts; ++attempt) {
        BoundingIntervals bounds = descend(model, stats, clean_validation, targets, config, lambda);
        const double acc = bounded_accuracy(model, bounds, clean_validation, config.scope);
        best_accuracy = std::max(best_accuracy, acc);
        if (acc >= result.pi) {
            result.initial_loss = full_loss(model, initial, clean_validation, targets, lambda, config.scope);
            result.final_loss = full_loss(model, bounds, clean_validation, targets, lambda, config.scope);
            result.bounds = std::move(bounds);
            result.validation_accuracy = acc;
            result.lagrange_lambda = lambda;
            result.restarts = attempt;
            return result;
        }
        lambda *= 0.5;
    }
    throw ConstraintFailure("bounded validation accuracy stays below pi = " + std::to_string(result.pi), best_accuracy);
}

std::vector<float> purified_predict(const TransformerClassifier& model, const BoundingIntervals& bounds,
                                    std::span<const std::int32_t> tokens, ClampScope scope) {
    return softmax(forward_bounded(model, tokens, bounds.low_tensor(), bounds.up_tensor(), scope));
}

void DefenseBundle::validate() const {
    detector.validate();
    if (!detector.threshold_lambda) throw InvalidArgument("defense bundle: detector threshold not calibrated");
    bounds.validate();
    if (bounds.layers != stats.layers || bounds.width != stats.width) {
        throw InvalidArgument("defense bundle: bounds and statistics disagree in shape");
    }
}

PipelinePrediction pipeline_predict(const TransformerClassifier& model, const DefenseBundle& bundle,
                                    std::span<const std::int32_t> tokens, PipelineMode mode) {
    const auto [logits, trace] = forward_logits(model, tokens);
    PipelinePrediction out;
    out.nas_score = nas_score(trace, bundle.stats, bundle.detector.k);
    out.flagged = mode == PipelineMode::PurifyAll ||
                  decide(out.nas_score, bundle.detector.threshold_lambda.value_or(0.0)) == Decision::Poisoned;
    if (out.flagged && mode != PipelineMode::DetectOnly) {
        out.label = argmax(purified_predict(model, bundle.bounds, tokens, bundle.scope));
        out.was_purified = true;
    } else {
        out.label = argmax(logits);
    }
    return out;
}

}  // namespace actguard
