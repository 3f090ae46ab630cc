#pragma once

#include <optional>
#include <span>
#include <vector>

#include "actguard/corpus.hpp"
#include "actguard/model.hpp"

namespace actguard {

// Per-neuron Gaussian fit of clean block-output activations.
struct GaussianStats {
    std::size_t layers = 0;
    std::size_t width = 0;
    std::vector<float> mu;     // layers * width
    std::vector<float> sigma;  // layers * width, floored
    std::size_t sample_count = 0;

    std::size_t neuron_count() const { return layers * width; }
};

struct DetectorConfig {
    double k = 3.0;
    double frr_percent = 20.0;
    // Decision threshold on NAS; unset until calibrated.
    std::optional<double> threshold_lambda;
    float sigma_floor = 1e-6f;

    void validate() const;
};

enum class Decision { Clean, Poisoned };

// Sample mean and unbiased standard deviation per neuron, sigma floored.
// Throws InvalidArgument with fewer than two traces or mismatched shapes.
GaussianStats fit_gaussian_stats(const std::vector<ActivationTrace>& traces, float sigma_floor = 1e-6f);
GaussianStats fit_gaussian_stats(const TransformerClassifier& model, const std::vector<EncodedSample>& clean_validation,
                                 float sigma_floor = 1e-6f);

// 1 iff r lies in the closed interval [mu - k sigma, mu + k sigma].
int phi(float r, float mu, float sigma, double k);

// Precomputed in-distribution intervals for repeated scoring at one k.
class NasScorer {
public:
    NasScorer(const GaussianStats& stats, double k);
    // Fraction of neurons inside their interval. Throws InvalidArgument on
    // a shape mismatch.
    double score(const ActivationTrace& trace) const;

private:
    std::size_t layers_, width_;
    std::vector<float> low_, up_;
};

double nas_score(const ActivationTrace& trace, const GaussianStats& stats, double k);

// Nearest-rank percentile: sorted[ceil(a n / 100)], rank 1 for a = 0.
// Throws InvalidArgument on empty input or a outside [0, 100].
double calibrate_threshold(std::span<const double> validation_scores, double frr_percent);

Decision decide(double score, double threshold_lambda);

// P(poison score < clean score) + 0.5 P(tie), by mid-rank statistics.
// Throws InvalidArgument if either list is empty.
double auroc(std::span<const double> clean_scores, std::span<const double> poison_scores);

// Mean over layers of the mean standardized squared deviation; higher is
// more anomalous.
double baseline_mahalanobis_score(const ActivationTrace& trace, const GaussianStats& stats);

// Unbounded traces for every sample (evaluation mode).
std::vector<ActivationTrace> collect_traces(const TransformerClassifier& model, const std::vector<EncodedSample>& data);

}  // namespace actguard
