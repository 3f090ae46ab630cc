#include <doctest.h>

#include <cmath>
#include <random>

#include "actguard/detector.hpp"
#include "actguard/errors.hpp"
#include "actguard/model.hpp"
#include "actguard/purifier.hpp"

using namespace actguard;

namespace {

ModelConfig small_config(std::uint64_t seed = 0) {
    ModelConfig c;
    c.vocab_size = 40;
    c.max_sequence_length = 16;
    c.hidden_dim = 16;
    c.layer_count = 2;
    c.head_count = 4;
    c.class_count = 3;
    c.seed = seed;
    return c;
}

std::vector<std::vector<std::int32_t>> random_inputs(std::size_t count, std::size_t vocab, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::int32_t> tok(3, static_cast<std::int32_t>(vocab) - 1);
    std::uniform_int_distribution<std::size_t> len(1, 12);
    std::vector<std::vector<std::int32_t>> out(count);
    for (auto& s : out) {
        s.resize(len(rng));
        for (auto& t : s) t = tok(rng);
    }
    return out;
}

std::vector<float> flat_params(const TransformerClassifier& m) {
    std::vector<float> all;
    for (const auto& [name, t] : m.named_parameters()) all.insert(all.end(), t.data().begin(), t.data().end());
    return all;
}

}  // namespace

TEST_CASE("parameter count of the toy architecture") {
    ModelConfig c;
    c.vocab_size = 100;
    c.hidden_dim = 64;
    c.layer_count = 2;
    c.head_count = 4;
    // embeddings 100*64 + 32*64 + norm 128; each block: four 64x64 projections
    // with biases 16640, two norms 256, ffn 64x256+256 and 256x64+64 = 33088;
    // head 64*2+2.
    const std::size_t hand = 6400 + 2048 + 128 + 2 * (16640 + 256 + 33088) + 130;
    CHECK(hand == 108674);
    const TransformerClassifier m(c);
    CHECK(m.parameter_count() == hand);
    CHECK(expected_parameter_count(c) == hand);
}

TEST_CASE("seeded initialization") {
    const auto a = flat_params(init_model(small_config(1)));
    const auto b = flat_params(init_model(small_config(1)));
    const auto c = flat_params(init_model(small_config(2)));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("biases start at zero and norm gains at one") {
    const TransformerClassifier m(small_config());
    for (float v : m.parameter("head.bias").data()) CHECK(v == 0.0f);
    for (float v : m.parameter("blocks.1.ln2.gamma").data()) CHECK(v == 1.0f);
}

TEST_CASE("invalid configurations are rejected") {
    auto c = small_config();
    c.head_count = 3;
    CHECK_THROWS_AS(TransformerClassifier{c}, InvalidArgument);
    c = small_config();
    c.layer_count = 0;
    CHECK_THROWS_AS(TransformerClassifier{c}, InvalidArgument);
    c = small_config();
    c.class_count = 1;
    CHECK_THROWS_AS(TransformerClassifier{c}, InvalidArgument);
}

TEST_CASE("zeroed head gives the bias as logits") {
    TransformerClassifier m(small_config());
    for (auto& v : m.parameter("head.weight").mutable_data()) v = 0.0f;
    auto bias = m.parameter("head.bias").mutable_data();
    bias[0] = 0.5f;
    bias[1] = -1.25f;
    bias[2] = 3.0f;
    for (const auto& ids : random_inputs(10, 40, 3)) {
        const auto logits = forward_logits(m, ids).first;
        CHECK(logits == std::vector<float>{0.5f, -1.25f, 3.0f});
    }
}

TEST_CASE("trace shape, finiteness and determinism") {
    const TransformerClassifier m(small_config());
    for (const auto& ids : random_inputs(10, 40, 4)) {
        const auto [logits, trace] = forward_logits(m, ids);
        CHECK(trace.layers == 2);
        CHECK(trace.width == 16);
        CHECK(trace.values.size() == 32);
        for (float v : trace.values) CHECK(std::isfinite(v));
        const auto again = forward_logits(m, ids);
        CHECK(again.first == logits);
        CHECK(again.second.values == trace.values);
    }
}

TEST_CASE("outputs do not depend on evaluation order") {
    const TransformerClassifier m(small_config());
    const auto inputs = random_inputs(6, 40, 5);
    std::vector<std::vector<float>> forward_order, reverse_order(inputs.size());
    for (const auto& ids : inputs) forward_order.push_back(forward_logits(m, ids).first);
    for (std::size_t i = inputs.size(); i-- > 0;) reverse_order[i] = forward_logits(m, inputs[i]).first;
    CHECK(forward_order == reverse_order);
}

TEST_CASE("long input is truncated and empty or unknown input rejected") {
    const TransformerClassifier m(small_config());
    std::vector<std::int32_t> long_ids(100, 7);
    std::vector<std::int32_t> cut(long_ids.begin(), long_ids.begin() + 15);
    CHECK(forward_logits(m, long_ids).first == forward_logits(m, cut).first);
    CHECK_THROWS_AS(forward_logits(m, std::vector<std::int32_t>{}), InvalidArgument);
    CHECK_THROWS_AS(forward_logits(m, std::vector<std::int32_t>{40}), InvalidArgument);
}

TEST_CASE("wide bounds reproduce plain logits") {
    const TransformerClassifier m(small_config());
    const auto inputs = random_inputs(50, 40, 6);
    std::vector<ActivationTrace> traces;
    for (const auto& ids : inputs) traces.push_back(forward_logits(m, ids).second);
    const BoundingIntervals wide = init_bounds(fit_gaussian_stats(traces), 10.0);
    for (auto scope : {ClampScope::ClassToken, ClampScope::AllTokens}) {
        for (const auto& ids : inputs) {
            const auto plain = forward_logits(m, ids).first;
            const auto bounded = forward_bounded(m, ids, wide.low_tensor(), wide.up_tensor(), scope);
            for (std::size_t c = 0; c < plain.size(); ++c) CHECK(std::abs(plain[c] - bounded[c]) <= 1e-6);
        }
    }
    const Tensor inf_low = Tensor::full({2, 16}, -INFINITY), inf_up = Tensor::full({2, 16}, INFINITY);
    for (const auto& ids : inputs) CHECK(forward_bounded(m, ids, inf_low, inf_up) == forward_logits(m, ids).first);
}

TEST_CASE("collapsed bounds force the head input") {
    const TransformerClassifier m(small_config());
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    std::vector<float> c(32);
    for (auto& v : c) v = u(rng);
    const Tensor z = Tensor::from({2, 16}, c);

    const auto w = m.parameter("head.weight").data();
    const auto b = m.parameter("head.bias").data();
    std::vector<double> expected(3);
    for (std::size_t k = 0; k < 3; ++k) {
        expected[k] = b[k];
        for (std::size_t i = 0; i < 16; ++i) expected[k] += double(c[16 + i]) * w[i * 3 + k];
    }
    for (const auto& ids : random_inputs(5, 40, 9)) {
        const auto logits = forward_bounded(m, ids, z, z);
        for (std::size_t k = 0; k < 3; ++k) CHECK(logits[k] == doctest::Approx(expected[k]).epsilon(1e-5));
    }
}

TEST_CASE("tightening one upper bound pins that activation") {
    const TransformerClassifier m(small_config());
    const std::vector<std::int32_t> ids{5, 9, 11};
    const auto trace = forward_logits(m, ids).second;
    std::vector<float> lo(32, -1e6f), up(32, 1e6f);
    const std::size_t neuron = 16 + 4;  // layer 1
    const float bound = trace.values[neuron] - 0.25f;
    up[neuron] = bound;
    ForwardOptions opt;
    const Tensor tl = Tensor::from({2, 16}, lo), tu = Tensor::from({2, 16}, up);
    opt.z_low = &tl;
    opt.z_up = &tu;
    NoGradGuard guard;
    const auto bounded = m.forward(ids, opt).trace();
    CHECK(bounded.values[neuron] == bound);
    for (std::size_t i = 0; i < 32; ++i) {
        if (i != neuron) CHECK(bounded.values[i] == trace.values[i]);
    }
}

TEST_CASE("malformed bounds are rejected") {
    const TransformerClassifier m(small_config());
    const std::vector<std::int32_t> ids{5};
    CHECK_THROWS_AS(forward_bounded(m, ids, Tensor::zeros({1, 16}), Tensor::zeros({1, 16})), InvalidArgument);
    CHECK_THROWS_AS(forward_bounded(m, ids, Tensor::full({2, 16}, 1.0f), Tensor::zeros({2, 16})), InvalidArgument);
}

TEST_CASE("clone is independent") {
    const TransformerClassifier m(small_config());
    TransformerClassifier c = m.clone();
    CHECK(flat_params(c) == flat_params(m));
    c.parameter("head.bias").mutable_data()[0] = 9.0f;
    CHECK(m.parameter("head.bias").data()[0] == 0.0f);
}

TEST_CASE("argmax and softmax helpers") {
    const std::vector<float> v{0.1f, 2.0f, 2.0f, -1.0f};
    CHECK(argmax(v) == 1);
    const auto p = softmax(v);
    double total = 0.0;
    for (float x : p) total += x;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p[1] == p[2]);
}

TEST_CASE("activation names round-trip") {
    CHECK(activation_from_string(to_string(ActivationKind::Relu)) == ActivationKind::Relu);
    CHECK(activation_from_string(to_string(ActivationKind::Gelu)) == ActivationKind::Gelu);
    CHECK_THROWS_AS(activation_from_string("swish"), InvalidArgument);
}
