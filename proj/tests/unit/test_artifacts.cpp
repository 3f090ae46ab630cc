#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <random>

#include "actguard/artifacts.hpp"
#include "actguard/errors.hpp"

using namespace actguard;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ModelConfig tiny() {
    ModelConfig c;
    c.vocab_size = 20;
    c.hidden_dim = 8;
    c.head_count = 2;
    c.max_sequence_length = 10;
    c.activation = ActivationKind::Relu;
    c.seed = 77;
    return c;
}

bool bit_equal(std::span<const float> a, std::span<const float> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

GaussianStats odd_stats() {
    std::mt19937_64 rng(3);
    std::normal_distribution<float> g(0.0f, 3.0f);
    GaussianStats s{2, 8, std::vector<float>(16), std::vector<float>(16), 123};
    for (auto& v : s.mu) v = g(rng);
    for (auto& v : s.sigma) v = std::abs(g(rng)) + 1e-6f;
    return s;
}

}  // namespace

TEST_CASE("content hash") {
    CHECK(content_hash("") == "cbf29ce484222325");
    CHECK(content_hash("a") == "af63dc4c8601ec8c");
    CHECK(content_hash("abc") != content_hash("acb"));
}

TEST_CASE("checkpoint round trip is bit exact") {
    TempDir dir("actguard_ckpt");
    TransformerClassifier m(tiny());
    // Values that do not survive a short decimal rendering.
    m.parameter("head.bias").mutable_data()[0] = 1.0f / 3.0f;
    m.parameter("head.bias").mutable_data()[1] = -1.17549435e-38f;
    save_checkpoint(m, dir.path / "c.json");
    const TransformerClassifier back = load_checkpoint(dir.path / "c.json");
    CHECK(back.config().activation == ActivationKind::Relu);
    CHECK(back.config().seed == 77);
    REQUIRE(back.named_parameters().size() == m.named_parameters().size());
    for (std::size_t i = 0; i < m.named_parameters().size(); ++i) {
        CHECK(back.named_parameters()[i].first == m.named_parameters()[i].first);
        CHECK(bit_equal(back.named_parameters()[i].second.data(), m.named_parameters()[i].second.data()));
    }
    save_checkpoint(back, dir.path / "c2.json");
    CHECK(read_file(dir.path / "c.json") == read_file(dir.path / "c2.json"));
}

TEST_CASE("checkpoint shape errors") {
    Json j = checkpoint_to_json(TransformerClassifier(tiny()));
    j["tensors"]["head.bias"]["shape"] = Json::array({3});
    CHECK_THROWS_AS(checkpoint_from_json(j), InvalidArgument);
    j = checkpoint_to_json(TransformerClassifier(tiny()));
    j["tensors"].erase("head.bias");
    CHECK_THROWS_AS(checkpoint_from_json(j), InvalidArgument);
}

TEST_CASE("stats and bounds round trips") {
    const GaussianStats s = odd_stats();
    DetectorConfig d;
    d.k = 2.5;
    d.frr_percent = 10.0;
    d.threshold_lambda = 0.984375;
    const StatsFile back = stats_from_json(parse_json(dump_json(stats_to_json(s, d))));
    CHECK(bit_equal(back.stats.mu, s.mu));
    CHECK(bit_equal(back.stats.sigma, s.sigma));
    CHECK(back.stats.sample_count == 123);
    CHECK(back.detector.k == 2.5);
    CHECK(back.detector.threshold_lambda == 0.984375);
    DetectorConfig unset;
    CHECK_FALSE(stats_from_json(stats_to_json(s, unset)).detector.threshold_lambda.has_value());

    BoundingIntervals b{2, 8, s.mu, s.mu};
    for (std::size_t i = 0; i < 16; ++i) b.z_up[i] += s.sigma[i];
    const BoundsFile bb = bounds_from_json(parse_json(dump_json(bounds_to_json(b, 0.91, 1e-3))));
    CHECK(bit_equal(bb.bounds.z_low, b.z_low));
    CHECK(bit_equal(bb.bounds.z_up, b.z_up));
    CHECK(bb.pi == 0.91);
    CHECK(bb.lagrange_lambda == 1e-3);
    CHECK(dump_json(bounds_to_json(bb.bounds, bb.pi, bb.lagrange_lambda)) == dump_json(bounds_to_json(b, 0.91, 1e-3)));
}

TEST_CASE("vocabulary and poison spec round trips") {
    const Vocabulary v = build_vocab({"b a a", "c"});
    const Vocabulary back = vocab_from_json(vocab_to_json(v));
    CHECK(back.tokens() == v.tokens());

    PoisonSpec p;
    p.kind = TriggerKind::CharsubProxy;
    p.substitutions = {{'o', '0'}, {'s', '$'}};
    p.rate = 0.15;
    p.seed = 41;
    const PoisonSpec q = poison_spec_from_json(poison_spec_to_json(p));
    CHECK(q.kind == p.kind);
    CHECK(q.substitutions == p.substitutions);
    CHECK(q.rate == p.rate);
    CHECK(q.seed == 41);
    CHECK(q.words == p.words);
    CHECK(q.sentence == p.sentence);
}

TEST_CASE("poison manifest restores side fields") {
    TempDir dir("actguard_manifest");
    const auto c = generate_synthetic_corpus(2, SplitSizes{100, 10, 40}, 5);
    PoisonSpec spec;
    const Dataset p = build_poisoned_split(c.test, spec, PoisonMode::Test);
    save_tsv(p, dir.path / "p.tsv");
    Dataset loaded = load_tsv(dir.path / "p.tsv", SplitTag::Test, 2);
    apply_poison_manifest(loaded, parse_json(dump_json(poison_manifest(p, spec, PoisonMode::Test))));
    REQUIRE(loaded.size() == p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(loaded.samples[i].true_label == p.samples[i].true_label);
        CHECK(loaded.samples[i].is_poisoned);
        CHECK(loaded.samples[i].sample_id == p.samples[i].sample_id);
    }
    Dataset shorter = loaded;
    shorter.samples.pop_back();
    CHECK_THROWS_AS(apply_poison_manifest(shorter, poison_manifest(p, spec, PoisonMode::Test)), InvalidArgument);
}

TEST_CASE("format version, truncation and missing files") {
    TempDir dir("actguard_errors");
    Json j = stats_to_json(odd_stats(), DetectorConfig{});
    j["format_version"] = 999;
    CHECK_THROWS_AS(stats_from_json(j), UnsupportedFormat);
    j.erase("format_version");
    CHECK_THROWS_AS(stats_from_json(j), UnsupportedFormat);

    const std::string text = dump_json(checkpoint_to_json(TransformerClassifier(tiny())));
    write_file(dir.path / "cut.json", text.substr(0, text.size() / 2));
    try {
        load_checkpoint(dir.path / "cut.json");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.byte_offset() > 0);
        CHECK(e.byte_offset() <= text.size() / 2 + 1);
    }
    CHECK_THROWS_AS(load_checkpoint(dir.path / "absent.json"), IoError);
    write_file(dir.path / "plain", "x");
    CHECK_THROWS_AS(write_file(dir.path / "plain" / "below.json", "x"), IoError);
    CHECK_THROWS_AS(stats_from_json(Json{{"format_version", 1}, {"L", "two"}}), InvalidArgument);
}

TEST_CASE("bundle manifest verifies hashes") {
    TempDir dir("actguard_bundle");
    const TransformerClassifier m(tiny());
    const GaussianStats s = fit_gaussian_stats(std::vector<ActivationTrace>{
        forward_logits(m, std::vector<std::int32_t>{3, 4}).second, forward_logits(m, std::vector<std::int32_t>{5}).second});
    DefenseBundle b;
    b.stats = s;
    b.detector.threshold_lambda = 0.75;
    b.bounds = init_bounds(s, 10.0);
    b.scope = ClampScope::AllTokens;
    b.provenance["seed"] = "0";
    const BundlePaths paths{dir.path / "c.json", dir.path / "v.json", dir.path / "s.json", dir.path / "b.json"};
    save_checkpoint(m, paths.checkpoint);
    save_json(vocab_to_json(build_vocab({"x y"})), paths.vocab);
    save_json(stats_to_json(b.stats, b.detector), paths.stats);
    save_json(bounds_to_json(b.bounds, 0.9, 1e-3), paths.bounds);
    save_bundle_manifest(paths, b, dir.path / "bundle.json");
    CHECK(load_json(dir.path / "bundle.json")["checkpoint"]["path"] == "c.json");

    const LoadedBundle loaded = load_bundle(dir.path / "bundle.json");
    CHECK(loaded.bundle.scope == ClampScope::AllTokens);
    CHECK(loaded.bundle.detector.threshold_lambda == 0.75);
    CHECK(loaded.bundle.provenance.at("seed") == "0");
    CHECK(bit_equal(loaded.bundle.bounds.z_up, b.bounds.z_up));
    CHECK(loaded.vocab.contains("y"));

    save_json(bounds_to_json(b.bounds, 0.8, 1e-3), paths.bounds);
    CHECK_THROWS_AS(load_bundle(dir.path / "bundle.json"), InvalidArgument);
}

TEST_CASE("clamp scope names") {
    CHECK(clamp_scope_from_string(to_string(ClampScope::ClassToken)) == ClampScope::ClassToken);
    CHECK(clamp_scope_from_string(to_string(ClampScope::AllTokens)) == ClampScope::AllTokens);
    CHECK_THROWS_AS(clamp_scope_from_string("middle"), InvalidArgument);
}
