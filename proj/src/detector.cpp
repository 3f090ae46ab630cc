#include "actguard/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "actguard/errors.hpp"
#include "actguard/simd/kernels.hpp"

namespace actguard {

void DetectorConfig::validate() const {
    if (!(k > 0.0)) throw InvalidArgument("k must be positive");
    if (!(frr_percent >= 0.0 && frr_percent <= 100.0)) throw InvalidArgument("frr_percent must lie in [0, 100]");
    if (threshold_lambda && !(*threshold_lambda >= 0.0 && *threshold_lambda <= 1.0)) {
        throw InvalidArgument("threshold_lambda must lie in [0, 1]");
    }
    if (!(sigma_floor > 0.0f)) throw InvalidArgument("sigma_floor must be positive");
}

GaussianStats fit_gaussian_stats(const std::vector<ActivationTrace>& traces, float sigma_floor) {
    if (traces.size() < 2) throw InvalidArgument("fit_gaussian_stats needs at least two samples");
    const std::size_t layers = traces.front().layers;
    const std::size_t width = traces.front().width;
    const std::size_t n = layers * width;
    // Welford accumulation in double.
    std::vector<double> mean(n, 0.0), m2(n, 0.0);
    std::size_t count = 0;
    for (const auto& t : traces) {
        if (t.layers != layers || t.width != width || t.values.size() != n) {
            throw InvalidArgument("fit_gaussian_stats: inconsistent trace shapes");
        }
        ++count;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = t.values[i];
            const double delta = x - mean[i];
            mean[i] += delta / static_cast<double>(count);
            m2[i] += delta * (x - mean[i]);
        }
    }
    GaussianStats stats;
    stats.layers = layers;
    stats.width = width;
    stats.sample_count = count;
    stats.mu.resize(n);
    stats.sigma.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        stats.mu[i] = static_cast<float>(mean[i]);
        const double sd = std::sqrt(std::max(0.0, m2[i]) / static_cast<double>(count - 1));
        stats.sigma[i] = std::max(static_cast<float>(sd), sigma_floor);
    }
    return stats;
}

std::vector<ActivationTrace> collect_traces(const TransformerClassifier& model, const std::vector<EncodedSample>& data) {
    std::vector<ActivationTrace> traces;
    traces.reserve(data.size());
    for (const auto& s : data) traces.push_back(forward_logits(model, s.ids).second);
    return traces;
}

GaussianStats fit_gaussian_stats(const TransformerClassifier& model, const std::vector<EncodedSample>& clean_validation,
                                 float sigma_floor) {
    return fit_gaussian_stats(collect_traces(model, clean_validation), sigma_floor);
}

namespace {

float interval_low(float mu, float sigma, double k) { return mu - static_cast<float>(k) * sigma; }
float interval_up(float mu, float sigma, double k) { return mu + static_cast<float>(k) * sigma; }

void check_shape(const ActivationTrace& trace, const GaussianStats& stats) {
    if (trace.layers != stats.layers || trace.width != stats.width || trace.values.size() != stats.neuron_count()) {
        throw InvalidArgument("trace shape does not match the fitted statistics");
    }
}

}  // namespace

int phi(float r, float mu, float sigma, double k) {
    return (r >= interval_low(mu, sigma, k) && r <= interval_up(mu, sigma, k)) ? 1 : 0;
}

NasScorer::NasScorer(const GaussianStats& stats, double k) : layers_(stats.layers), width_(stats.width) {
    const std::size_t n = stats.neuron_count();
    low_.resize(n);
    up_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        low_[i] = interval_low(stats.mu[i], stats.sigma[i], k);
        up_[i] = interval_up(stats.mu[i], stats.sigma[i], k);
    }
}

double NasScorer::score(const ActivationTrace& trace) const {
    if (trace.layers != layers_ || trace.width != width_ || trace.values.size() != low_.size()) {
        throw InvalidArgument("trace shape does not match the fitted statistics");
    }
    const std::size_t inside = simd::count_within(trace.values, low_, up_);
    return static_cast<double>(inside) / static_cast<double>(low_.size());
}

double nas_score(const ActivationTrace& trace, const GaussianStats& stats, double k) {
    check_shape(trace, stats);
    return NasScorer(stats, k).score(trace);
}

double calibrate_threshold(std::span<const double> validation_scores, double frr_percent) {
    if (validation_scores.empty()) throw InvalidArgument("calibrate_threshold: no scores");
    if (!(frr_percent >= 0.0 && frr_percent <= 100.0)) throw InvalidArgument("frr_percent must lie in [0, 100]");
    std::vector<double> sorted(validation_scores.begin(), validation_scores.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // Small slack so that exact products such as 20 * 10 / 100 are not
    // pushed up a rank by rounding.
    auto rank = static_cast<std::size_t>(std::ceil(frr_percent * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

Decision decide(double score, double threshold_lambda) {
    return score >= threshold_lambda ? Decision::Clean : Decision::Poisoned;
}

double auroc(std::span<const double> clean_scores, std::span<const double> poison_scores) {
    if (clean_scores.empty() || poison_scores.empty()) throw InvalidArgument("auroc: empty score list");
    struct Entry {
        double score;
        bool clean;
    };
    std::vector<Entry> all;
    all.reserve(clean_scores.size() + poison_scores.size());
    for (double s : clean_scores) all.push_back({s, true});
    for (double s : poison_scores) all.push_back({s, false});
    std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.score < b.score; });

    // Twice the mid-rank of a tie group spanning 1-based positions
    // [first, last] is first + last, which keeps the statistic integral.
    std::uint64_t clean_rank_sum2 = 0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].score == all[i].score) ++j;
        const std::uint64_t twice_mid = (i + 1) + (j + 1);
        for (std::size_t t = i; t <= j; ++t) {
            if (all[t].clean) clean_rank_sum2 += twice_mid;
        }
        i = j + 1;
    }
    const std::uint64_t nc = clean_scores.size();
    const std::uint64_t np = poison_scores.size();
    const std::uint64_t u2 = clean_rank_sum2 - nc * (nc + 1);
    return static_cast<double>(u2) / static_cast<double>(2 * nc * np);
}

double baseline_mahalanobis_score(const ActivationTrace& trace, const GaussianStats& stats) {
    check_shape(trace, stats);
    std::vector<float> inv_sigma(stats.sigma.size());
    for (std::size_t i = 0; i < inv_sigma.size(); ++i) inv_sigma[i] = 1.0f / stats.sigma[i];
    double total = 0.0;
    const std::span<const float> mu(stats.mu);
    const std::span<const float> inv(inv_sigma);
    for (std::size_t l = 0; l < stats.layers; ++l) {
        const std::size_t off = l * stats.width;
        total += static_cast<double>(simd::standardized_sq(trace.row(l), mu.subspan(off, stats.width),
                                                           inv.subspan(off, stats.width))) /
                 static_cast<double>(stats.width);
    }
    return total / static_cast<double>(stats.layers);
}

}  // namespace actguard
