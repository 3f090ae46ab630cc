#include "actguard/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "actguard/errors.hpp"
#include "actguard/ops.hpp"
#include "actguard/optim.hpp"

namespace actguard {

void TrainConfig::validate() const {
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (!(learning_rate > 0.0f)) throw InvalidArgument("learning_rate must be positive");
    if (adapt_reg_lambda < 0.0f) throw InvalidArgument("adapt_reg_lambda must be >= 0");
}

namespace {

TrainResult run_training(TransformerClassifier& model, const std::vector<EncodedSample>& data,
                         const TrainConfig& config, float reg_lambda) {
    config.validate();
    if (data.empty()) throw InvalidArgument("train: empty dataset");
    for (const auto& s : data) {
        if (s.label >= model.config().class_count) throw InvalidArgument("train: label out of range");
    }

    model.set_requires_grad(true);
    std::vector<Tensor> params = model.parameters();
    AdamConfig adam;
    adam.learning_rate = config.learning_rate;
    adam.weight_decay = config.weight_decay;
    OptimizerState state = make_optimizer_state(params, adam);

    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t batches_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = batches_per_epoch * config.epochs;

    ForwardOptions options;
    options.training = true;
    options.rng = &rng;

    TrainResult result;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_total = 0.0, reg_total = 0.0;
        std::size_t correct = 0, reg_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const float inv_batch = 1.0f / static_cast<float>(end - start);

            zero_grads(params);
            Tensor ce;
            std::vector<Tensor> clean_traces, poison_traces;
            for (std::size_t i = start; i < end; ++i) {
                const EncodedSample& s = data[order[i]];
                ForwardResult r = model.forward(s.ids, options);
                if (argmax(r.logits.data()) == s.label) ++correct;
                const Tensor term = cross_entropy(r.logits, s.label);
                loss_total += term.item();
                ce = ce.defined() ? add(ce, term) : term;
                if (reg_lambda > 0.0f) {
                    Tensor trace = concat_rows(r.block_outputs);
                    (s.is_poisoned ? poison_traces : clean_traces).push_back(std::move(trace));
                }
            }
            Tensor loss = scale(ce, inv_batch);
            if (reg_lambda > 0.0f && !clean_traces.empty() && !poison_traces.empty()) {
                Tensor reference = clean_traces.front();
                for (std::size_t i = 1; i < clean_traces.size(); ++i) reference = add(reference, clean_traces[i]);
                reference = scale(reference, 1.0f / static_cast<float>(clean_traces.size()));
                Tensor reg;
                for (const auto& t : poison_traces) {
                    const Tensor term = sum(abs(sub(t, reference)));
                    reg = reg.defined() ? add(reg, term) : term;
                }
                reg = scale(reg, 1.0f / static_cast<float>(poison_traces.size()));
                reg_total += reg.item();
                ++reg_batches;
                loss = add(loss, scale(reg, reg_lambda));
            }
            loss.backward();

            if (config.linear_decay) {
                state.config.learning_rate =
                    config.learning_rate * (1.0f - static_cast<float>(step) / static_cast<float>(total_steps));
            }
            adam_update(params, state);
            ++step;
        }
        EpochLog log;
        log.epoch = epoch + 1;
        log.mean_loss = loss_total / static_cast<double>(data.size());
        log.mean_reg = reg_batches ? reg_total / static_cast<double>(reg_batches) : 0.0;
        log.train_acc = static_cast<double>(correct) / static_cast<double>(data.size());
        result.history.push_back(log);
    }
    return result;
}

}  // namespace

TrainResult train(TransformerClassifier& model, const std::vector<EncodedSample>& data, const TrainConfig& config) {
    return run_training(model, data, config, 0.0f);
}

TrainResult adaptive_train(TransformerClassifier& model, const std::vector<EncodedSample>& poisoned_train,
                           const TrainConfig& config) {
    if (!config.adaptive) throw InvalidArgument("adaptive_train requires the adaptive flag");
    return run_training(model, poisoned_train, config, config.adapt_reg_lambda);
}

double activation_regularizer(const std::vector<ActivationTrace>& poisoned, const ActivationTrace& clean_reference) {
    if (poisoned.empty()) return 0.0;
    double total = 0.0;
    for (const auto& t : poisoned) {
        if (t.values.size() != clean_reference.values.size()) {
            throw InvalidArgument("activation_regularizer: trace shape mismatch");
        }
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            total += std::fabs(static_cast<double>(t.values[i]) - clean_reference.values[i]);
        }
    }
    return total / static_cast<double>(poisoned.size());
}

double accuracy(const TransformerClassifier& model, const std::vector<EncodedSample>& data) {
    if (data.empty()) throw InvalidArgument("accuracy: empty dataset");
    std::size_t correct = 0;
    for (const auto& s : data) {
        const auto [logits, trace] = forward_logits(model, s.ids);
        if (argmax(logits) == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace actguard
