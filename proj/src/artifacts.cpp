#include "actguard/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "actguard/errors.hpp"

namespace actguard {

std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path.string());
    return ss.str();
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(read_file(path)); }

void write_file(const std::filesystem::path& path, std::string_view bytes) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::string dump_json(const Json& doc) { return doc.dump(2) + "\n"; }

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.what(), e.byte);
    }
}

Json load_json(const std::filesystem::path& path) { return parse_json(read_file(path)); }

void save_json(const Json& doc, const std::filesystem::path& path) { write_file(path, dump_json(doc)); }

namespace {

void check_version(const Json& j, const char* what) {
    if (!j.is_object() || !j.contains("format_version")) {
        throw UnsupportedFormat(std::string(what) + ": missing format_version");
    }
    const auto& v = j.at("format_version");
    if (!v.is_number_integer() || v.get<int>() != kFormatVersion) {
        throw UnsupportedFormat(std::string(what) + ": unsupported format_version " + v.dump());
    }
}

// Schema errors surface as InvalidArgument rather than library exceptions.
template <typename F>
auto guarded(const char* what, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string(what) + ": " + e.what());
    }
}

Json matrix_to_json(const std::vector<float>& values, std::size_t rows, std::size_t cols) {
    Json out = Json::array();
    for (std::size_t r = 0; r < rows; ++r) {
        out.push_back(std::vector<float>(values.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                         values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
    }
    return out;
}

std::vector<float> matrix_from_json(const Json& j, std::size_t rows, std::size_t cols, const char* name) {
    if (!j.is_array() || j.size() != rows) throw InvalidArgument(std::string(name) + ": wrong row count");
    std::vector<float> out;
    out.reserve(rows * cols);
    for (const auto& row : j) {
        auto values = row.get<std::vector<float>>();
        if (values.size() != cols) throw InvalidArgument(std::string(name) + ": wrong row width");
        out.insert(out.end(), values.begin(), values.end());
    }
    return out;
}

}  // namespace

std::string to_string(ClampScope scope) { return scope == ClampScope::ClassToken ? "class-token" : "all-tokens"; }

ClampScope clamp_scope_from_string(const std::string& name) {
    if (name == "class-token") return ClampScope::ClassToken;
    if (name == "all-tokens") return ClampScope::AllTokens;
    throw InvalidArgument("unknown clamp scope '" + name + "'");
}

Json model_config_to_json(const ModelConfig& c) {
    return Json{{"vocab_size", c.vocab_size},
                {"max_sequence_length", c.max_sequence_length},
                {"hidden_dim", c.hidden_dim},
                {"layer_count", c.layer_count},
                {"head_count", c.head_count},
                {"ffn_dim", c.effective_ffn_dim()},
                {"class_count", c.class_count},
                {"activation", to_string(c.activation)},
                {"dropout", c.dropout},
                {"cls_token_id", c.cls_token_id},
                {"seed", c.seed}};
}

ModelConfig model_config_from_json(const Json& j) {
    return guarded("model config", [&] {
        ModelConfig c;
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.layer_count = j.value("layer_count", c.layer_count);
        c.head_count = j.value("head_count", c.head_count);
        c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
        c.class_count = j.value("class_count", c.class_count);
        c.activation = activation_from_string(j.value("activation", std::string("gelu")));
        c.dropout = j.value("dropout", c.dropout);
        c.cls_token_id = j.value("cls_token_id", c.cls_token_id);
        c.seed = j.value("seed", c.seed);
        return c;
    });
}

Json checkpoint_to_json(const TransformerClassifier& model) {
    Json tensors = Json::object();
    for (const auto& [name, t] : model.named_parameters()) {
        tensors[name] = Json{{"shape", t.shape()}, {"data", std::vector<float>(t.data().begin(), t.data().end())}};
    }
    return Json{{"format_version", kFormatVersion}, {"config", model_config_to_json(model.config())}, {"tensors", tensors}};
}

TransformerClassifier checkpoint_from_json(const Json& j) {
    check_version(j, "checkpoint");
    return guarded("checkpoint", [&] {
        TransformerClassifier model(model_config_from_json(j.at("config")));
        const auto& tensors = j.at("tensors");
        if (tensors.size() != model.named_parameters().size()) {
            throw InvalidArgument("checkpoint: tensor count does not match the architecture");
        }
        for (const auto& [name, t] : model.named_parameters()) {
            const auto& entry = tensors.at(name);
            if (entry.at("shape").get<Shape>() != t.shape()) {
                throw InvalidArgument("checkpoint: shape mismatch for " + name);
            }
            const auto data = entry.at("data").get<std::vector<float>>();
            if (data.size() != t.numel()) throw InvalidArgument("checkpoint: size mismatch for " + name);
            Tensor handle = t;
            std::copy(data.begin(), data.end(), handle.mutable_data().begin());
        }
        return model;
    });
}

void save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path) {
    save_json(checkpoint_to_json(model), path);
}

TransformerClassifier load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_json(load_json(path)); }

Json vocab_to_json(const Vocabulary& vocab) {
    return Json{{"format_version", kFormatVersion}, {"tokens", vocab.tokens()}};
}

Vocabulary vocab_from_json(const Json& j) {
    check_version(j, "vocabulary");
    return guarded("vocabulary", [&] {
        auto tokens = j.at("tokens").get<std::vector<std::string>>();
        if (tokens.size() < 3 || tokens[0] != "[PAD]" || tokens[1] != "[UNK]" || tokens[2] != "[CLS]") {
            throw InvalidArgument("vocabulary: reserved tokens missing");
        }
        return Vocabulary(std::vector<std::string>(tokens.begin() + 3, tokens.end()));
    });
}

Json stats_to_json(const GaussianStats& stats, const DetectorConfig& detector) {
    Json j{{"format_version", kFormatVersion},
           {"L", stats.layers},
           {"d", stats.width},
           {"mu", matrix_to_json(stats.mu, stats.layers, stats.width)},
           {"sigma", matrix_to_json(stats.sigma, stats.layers, stats.width)},
           {"sample_count", stats.sample_count},
           {"sigma_floor", detector.sigma_floor},
           {"k", detector.k},
           {"frr_percent", detector.frr_percent}};
    j["threshold_lambda"] = detector.threshold_lambda ? Json(*detector.threshold_lambda) : Json(nullptr);
    return j;
}

StatsFile stats_from_json(const Json& j) {
    check_version(j, "stats");
    return guarded("stats", [&] {
        StatsFile f;
        f.stats.layers = j.at("L").get<std::size_t>();
        f.stats.width = j.at("d").get<std::size_t>();
        f.stats.mu = matrix_from_json(j.at("mu"), f.stats.layers, f.stats.width, "mu");
        f.stats.sigma = matrix_from_json(j.at("sigma"), f.stats.layers, f.stats.width, "sigma");
        f.stats.sample_count = j.value("sample_count", std::size_t{0});
        f.detector.k = j.at("k").get<double>();
        f.detector.frr_percent = j.at("frr_percent").get<double>();
        f.detector.sigma_floor = j.value("sigma_floor", f.detector.sigma_floor);
        if (j.contains("threshold_lambda") && !j.at("threshold_lambda").is_null()) {
            f.detector.threshold_lambda = j.at("threshold_lambda").get<double>();
        }
        f.detector.validate();
        return f;
    });
}

Json bounds_to_json(const BoundingIntervals& bounds, double pi, double lagrange_lambda) {
    return Json{{"format_version", kFormatVersion},
                {"L", bounds.layers},
                {"d", bounds.width},
                {"z_low", matrix_to_json(bounds.z_low, bounds.layers, bounds.width)},
                {"z_up", matrix_to_json(bounds.z_up, bounds.layers, bounds.width)},
                {"pi", pi},
                {"lagrange_lambda", lagrange_lambda}};
}

BoundsFile bounds_from_json(const Json& j) {
    check_version(j, "bounds");
    return guarded("bounds", [&] {
        BoundsFile f;
        f.bounds.layers = j.at("L").get<std::size_t>();
        f.bounds.width = j.at("d").get<std::size_t>();
        f.bounds.z_low = matrix_from_json(j.at("z_low"), f.bounds.layers, f.bounds.width, "z_low");
        f.bounds.z_up = matrix_from_json(j.at("z_up"), f.bounds.layers, f.bounds.width, "z_up");
        f.pi = j.at("pi").get<double>();
        f.lagrange_lambda = j.at("lagrange_lambda").get<double>();
        f.bounds.validate();
        return f;
    });
}

Json poison_spec_to_json(const PoisonSpec& spec) {
    Json subs = Json::object();
    for (const auto& [from, to] : spec.substitutions) subs[std::string(1, from)] = std::string(1, to);
    return Json{{"kind", to_string(spec.kind)},  {"words", spec.words},     {"sentence", spec.sentence},
                {"substitutions", subs},         {"target_label", spec.target_label},
                {"rate", spec.rate},             {"seed", spec.seed}};
}

PoisonSpec poison_spec_from_json(const Json& j) {
    return guarded("poison spec", [&] {
        PoisonSpec spec;
        spec.kind = trigger_from_string(j.value("kind", to_string(spec.kind)));
        spec.words = j.value("words", spec.words);
        spec.sentence = j.value("sentence", spec.sentence);
        if (j.contains("substitutions")) {
            spec.substitutions.clear();
            for (const auto& [from, to] : j.at("substitutions").items()) {
                const auto target = to.get<std::string>();
                if (from.size() != 1 || target.size() != 1) {
                    throw InvalidArgument("substitutions map single characters");
                }
                spec.substitutions[from[0]] = target[0];
            }
        }
        spec.target_label = j.value("target_label", spec.target_label);
        spec.rate = j.value("rate", spec.rate);
        spec.seed = j.value("seed", spec.seed);
        return spec;
    });
}

Json poison_manifest(const Dataset& poisoned, const PoisonSpec& spec, PoisonMode mode) {
    std::vector<std::uint64_t> ids;
    std::vector<std::size_t> truth;
    std::vector<bool> flags;
    for (const auto& s : poisoned.samples) {
        ids.push_back(s.sample_id);
        truth.push_back(s.true_label);
        flags.push_back(s.is_poisoned);
    }
    return Json{{"format_version", kFormatVersion},
                {"spec", poison_spec_to_json(spec)},
                {"seed", spec.seed},
                {"mode", mode == PoisonMode::Train ? "train" : "test"},
                {"split", to_string(poisoned.split)},
                {"sample_ids", ids},
                {"true_labels", truth},
                {"is_poisoned", flags}};
}

void apply_poison_manifest(Dataset& dataset, const Json& manifest) {
    check_version(manifest, "poison manifest");
    guarded("poison manifest", [&] {
        const auto ids = manifest.at("sample_ids").get<std::vector<std::uint64_t>>();
        const auto truth = manifest.at("true_labels").get<std::vector<std::size_t>>();
        const auto flags = manifest.at("is_poisoned").get<std::vector<bool>>();
        if (ids.size() != dataset.size() || truth.size() != dataset.size() || flags.size() != dataset.size()) {
            throw InvalidArgument("poison manifest: sample count does not match the split");
        }
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            dataset.samples[i].sample_id = ids[i];
            dataset.samples[i].true_label = truth[i];
            dataset.samples[i].is_poisoned = flags[i];
        }
        dataset.validate();
        return 0;
    });
}

void save_bundle_manifest(const BundlePaths& paths, const DefenseBundle& bundle, const std::filesystem::path& path) {
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto entry = [&](const std::filesystem::path& p) {
        return Json{{"path", p.lexically_relative(base).generic_string()}, {"hash", file_hash(p)}};
    };
    Json provenance = Json::object();
    for (const auto& [k, v] : bundle.provenance) provenance[k] = v;
    save_json(Json{{"format_version", kFormatVersion},
                   {"checkpoint", entry(paths.checkpoint)},
                   {"vocab", entry(paths.vocab)},
                   {"stats", entry(paths.stats)},
                   {"bounds", entry(paths.bounds)},
                   {"clamp_scope", to_string(bundle.scope)},
                   {"provenance", provenance}},
              path);
}

LoadedBundle load_bundle(const std::filesystem::path& manifest_path) {
    const Json manifest = load_json(manifest_path);
    check_version(manifest, "bundle manifest");
    const auto base = manifest_path.has_parent_path() ? manifest_path.parent_path() : std::filesystem::path(".");
    auto resolve = [&](const char* key) {
        return guarded("bundle manifest", [&] {
            const auto& e = manifest.at(key);
            const auto p = base / e.at("path").get<std::string>();
            const std::string text = read_file(p);
            if (content_hash(text) != e.at("hash").get<std::string>()) {
                throw InvalidArgument(std::string("bundle manifest: hash mismatch for ") + key);
            }
            return parse_json(text);
        });
    };
    auto model = checkpoint_from_json(resolve("checkpoint"));
    auto vocab = vocab_from_json(resolve("vocab"));
    auto stats = stats_from_json(resolve("stats"));
    auto bounds = bounds_from_json(resolve("bounds"));
    DefenseBundle bundle;
    bundle.stats = std::move(stats.stats);
    bundle.detector = stats.detector;
    bundle.bounds = std::move(bounds.bounds);
    bundle.scope = clamp_scope_from_string(manifest.value("clamp_scope", std::string("class-token")));
    if (manifest.contains("provenance")) {
        for (const auto& [k, v] : manifest.at("provenance").items()) bundle.provenance[k] = v.get<std::string>();
    }
    bundle.validate();
    return LoadedBundle{std::move(model), std::move(vocab), std::move(bundle)};
}

}  // namespace actguard
