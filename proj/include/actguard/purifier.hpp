#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "actguard/corpus.hpp"
#include "actguard/detector.hpp"
#include "actguard/model.hpp"

namespace actguard {

// Per-layer activation intervals, layers * width each, row-major.
struct BoundingIntervals {
    std::size_t layers = 0;
    std::size_t width = 0;
    std::vector<float> z_low;
    std::vector<float> z_up;

    // Throws InvalidArgument on inconsistent sizes or z_low > z_up.
    void validate() const;
    Tensor low_tensor(bool requires_grad = false) const;
    Tensor up_tensor(bool requires_grad = false) const;
    // sum over layers of ||z_up - z_low||_2
    double width_norm_sum() const;
};

struct PurifierConfig {
    // Allowed drop from the unbounded validation accuracy; pi = acc - drop.
    double accuracy_drop = 0.03;
    // Absolute accuracy floor; overrides accuracy_drop when set.
    std::optional<double> pi;
    double lagrange_lambda = 1e-3;
    double init_margin = 10.0;
    float learning_rate = 1e-2f;
    std::size_t steps = 500;
    // 0 means full-batch descent.
    std::size_t batch_size = 32;
    std::size_t max_restarts = 5;
    std::uint64_t seed = 0;
    ClampScope scope = ClampScope::ClassToken;

    void validate(double detector_k) const;
};

// z_low = mu - m sigma, z_up = mu + m sigma.
BoundingIntervals init_bounds(const GaussianStats& stats, double init_margin);

// Mean squared deviation of bounded from unbounded logits over samples and
// classes, plus lambda times the summed per-layer interval widths.
// Throws InvalidArgument on an empty batch.
double lagrangian_loss(const TransformerClassifier& model, const BoundingIntervals& bounds,
                       const std::vector<EncodedSample>& batch, double lagrange_lambda,
                       ClampScope scope = ClampScope::ClassToken);

// Fraction of samples whose bounded-logit argmax equals the label.
double bounded_accuracy(const TransformerClassifier& model, const BoundingIntervals& bounds,
                        const std::vector<EncodedSample>& data, ClampScope scope = ClampScope::ClassToken);

struct OptimizeResult {
    BoundingIntervals bounds;
    double pi = 0.0;
    double unbounded_accuracy = 0.0;
    double validation_accuracy = 0.0;
    // Multiplier in force for the accepted run (after any halving).
    double lagrange_lambda = 0.0;
    std::size_t restarts = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

// Adam on (z_low, z_up) against lagrangian_loss over shuffled mini-batches
// of the validation set, projecting z_low <= z_up after every step. If the
// bounded validation accuracy ends below pi, lambda is halved and the run
// restarts from init_bounds, up to max_restarts times. Throws
// ConstraintFailure carrying the best accuracy when no run satisfies pi.
OptimizeResult optimize_bounds(const TransformerClassifier& model, const GaussianStats& stats,
                               const std::vector<EncodedSample>& clean_validation, const PurifierConfig& config);

// softmax of the bounded logits
std::vector<float> purified_predict(const TransformerClassifier& model, const BoundingIntervals& bounds,
                                    std::span<const std::int32_t> tokens, ClampScope scope = ClampScope::ClassToken);

struct DefenseBundle {
    GaussianStats stats;
    DetectorConfig detector;  // threshold calibrated
    BoundingIntervals bounds;
    ClampScope scope = ClampScope::ClassToken;
    std::map<std::string, std::string> provenance;

    void validate() const;
};

enum class PipelineMode {
    DetectThenPurify,
    PurifyAll,   // no detection: every input is bounded
    DetectOnly,  // flagged inputs keep the plain prediction
};

struct PipelinePrediction {
    std::size_t label = 0;
    double nas_score = 0.0;
    bool flagged = false;
    bool was_purified = false;
};

PipelinePrediction pipeline_predict(const TransformerClassifier& model, const DefenseBundle& bundle,
                                    std::span<const std::int32_t> tokens,
                                    PipelineMode mode = PipelineMode::DetectThenPurify);

}  // namespace actguard
