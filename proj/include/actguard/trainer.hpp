#pragma once

#include <cstdint>
#include <vector>

#include "actguard/corpus.hpp"
#include "actguard/model.hpp"

namespace actguard {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    float learning_rate = 3e-4f;
    float weight_decay = 0.01f;
    bool linear_decay = true;
    std::uint64_t seed = 0;
    bool adaptive = false;
    // Weight of the activation-level regularizer in adaptive training.
    float adapt_reg_lambda = 0.0f;

    void validate() const;
};

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;  // cross-entropy only
    double mean_reg = 0.0;   // activation regularizer, 0 outside adaptive training
    double train_acc = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> history;
};

// Mean cross-entropy with Adam(W), seeded shuffling. Throws InvalidArgument
// on an empty dataset.
TrainResult train(TransformerClassifier& model, const std::vector<EncodedSample>& data, const TrainConfig& config);

// Cross-entropy over each mixed batch plus adapt_reg_lambda times the mean,
// over the batch's poisoned samples, of sum_i |r_i - r_i^clean| across all
// L*d traced neurons, where r^clean is the batch's mean clean trace. Batches
// without clean or without poisoned samples skip the regularizer. With
// lambda 0 this is exactly train().
TrainResult adaptive_train(TransformerClassifier& model, const std::vector<EncodedSample>& poisoned_train,
                           const TrainConfig& config);

// Value of the regularizer for one group of traces (no gradient).
double activation_regularizer(const std::vector<ActivationTrace>& poisoned, const ActivationTrace& clean_reference);

// Fraction of samples whose plain-logit argmax equals `label`.
double accuracy(const TransformerClassifier& model, const std::vector<EncodedSample>& data);

}  // namespace actguard
