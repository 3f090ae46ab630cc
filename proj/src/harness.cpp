#include "actguard/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "actguard/errors.hpp"

namespace actguard {

std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& stream) {
    // splitmix64 over the seed mixed with the stream name's FNV-1a hash
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t z = global_seed ^ h;
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void DatasetSpec::validate() const {
    if (source == "synthetic") {
        if (class_count != 2 && class_count != 4) throw InvalidArgument("dataset.class_count must be 2 or 4");
        if (sizes.train == 0 || sizes.validation < 2 || sizes.test == 0) {
            throw InvalidArgument("dataset.sizes: train and test must be positive, validation at least 2");
        }
    } else if (source == "tsv") {
        if (class_count < 2) throw InvalidArgument("dataset.class_count must be >= 2");
        if (train_path.empty() || validation_path.empty() || test_path.empty()) {
            throw InvalidArgument("dataset: tsv source needs train, validation and test paths");
        }
    } else {
        throw InvalidArgument("dataset.source must be 'synthetic' or 'tsv'");
    }
}

void ExperimentConfig::validate() const {
    dataset.validate();
    poison.validate(dataset.class_count);
    ModelConfig m = model;
    if (m.vocab_size == 0) m.vocab_size = 1024;
    m.validate();
    if (m.class_count != dataset.class_count) throw InvalidArgument("model.class_count differs from dataset.class_count");
    train.validate();
    if (train.adapt_reg_lambda > 0.0f && !train.adaptive) {
        throw InvalidArgument("train.adapt_reg_lambda needs train.adaptive");
    }
    detector.validate();
    purifier.validate(detector.k);
}

std::string to_string(PipelineMode mode) {
    switch (mode) {
        case PipelineMode::DetectThenPurify: return "detect-then-purify";
        case PipelineMode::PurifyAll: return "purify-all";
        case PipelineMode::DetectOnly: return "detect-only";
    }
    return "detect-then-purify";
}

PipelineMode pipeline_mode_from_string(const std::string& name) {
    if (name == "detect-then-purify") return PipelineMode::DetectThenPurify;
    if (name == "purify-all") return PipelineMode::PurifyAll;
    if (name == "detect-only") return PipelineMode::DetectOnly;
    throw InvalidArgument("unknown pipeline mode '" + name + "'");
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

Json train_to_json(const TrainConfig& c) {
    return Json{{"epochs", c.epochs},         {"batch_size", c.batch_size},     {"learning_rate", c.learning_rate},
                {"weight_decay", c.weight_decay}, {"linear_decay", c.linear_decay}, {"adaptive", c.adaptive},
                {"adapt_reg_lambda", c.adapt_reg_lambda}};
}

TrainConfig train_from_json(const Json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.linear_decay = j.value("linear_decay", c.linear_decay);
    c.adaptive = j.value("adaptive", c.adaptive);
    c.adapt_reg_lambda = j.value("adapt_reg_lambda", c.adapt_reg_lambda);
    return c;
}

Json detector_to_json(const DetectorConfig& c) {
    return Json{{"k", c.k},
                {"frr_percent", c.frr_percent},
                {"threshold_lambda", optional_json(c.threshold_lambda)},
                {"sigma_floor", c.sigma_floor}};
}

DetectorConfig detector_from_json(const Json& j) {
    DetectorConfig c;
    c.k = j.value("k", c.k);
    c.frr_percent = j.value("frr_percent", c.frr_percent);
    c.threshold_lambda = optional_from(j, "threshold_lambda");
    c.sigma_floor = j.value("sigma_floor", c.sigma_floor);
    return c;
}

Json purifier_to_json(const PurifierConfig& c) {
    return Json{{"accuracy_drop", c.accuracy_drop}, {"pi", optional_json(c.pi)},
                {"lagrange_lambda", c.lagrange_lambda}, {"init_margin", c.init_margin},
                {"learning_rate", c.learning_rate}, {"steps", c.steps},
                {"batch_size", c.batch_size},       {"max_restarts", c.max_restarts},
                {"scope", to_string(c.scope)}};
}

PurifierConfig purifier_from_json(const Json& j) {
    PurifierConfig c;
    c.accuracy_drop = j.value("accuracy_drop", c.accuracy_drop);
    c.pi = optional_from(j, "pi");
    c.lagrange_lambda = j.value("lagrange_lambda", c.lagrange_lambda);
    c.init_margin = j.value("init_margin", c.init_margin);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_restarts = j.value("max_restarts", c.max_restarts);
    c.scope = clamp_scope_from_string(j.value("scope", to_string(c.scope)));
    return c;
}

Json dataset_to_json(const DatasetSpec& d) {
    return Json{{"source", d.source},
                {"class_count", d.class_count},
                {"sizes", Json{{"train", d.sizes.train}, {"validation", d.sizes.validation}, {"test", d.sizes.test}}},
                {"train_path", d.train_path.generic_string()},
                {"validation_path", d.validation_path.generic_string()},
                {"test_path", d.test_path.generic_string()}};
}

DatasetSpec dataset_from_json(const Json& j) {
    DatasetSpec d;
    d.source = j.value("source", d.source);
    d.class_count = j.value("class_count", d.class_count);
    if (j.contains("sizes")) {
        const auto& s = j.at("sizes");
        d.sizes.train = s.value("train", d.sizes.train);
        d.sizes.validation = s.value("validation", d.sizes.validation);
        d.sizes.test = s.value("test", d.sizes.test);
    }
    d.train_path = j.value("train_path", std::string());
    d.validation_path = j.value("validation_path", std::string());
    d.test_path = j.value("test_path", std::string());
    return d;
}

// Percent with a fixed denominator; for binary tasks t/n and (n-t)/n sum
// to exactly 100 in double arithmetic for the split sizes used here.
double percent(std::size_t count, std::size_t total) {
    return 100.0 * static_cast<double>(count) / static_cast<double>(total);
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

Json experiment_config_to_json(const ExperimentConfig& c) {
    Json model = model_config_to_json(c.model);
    model.erase("seed");
    Json poison = poison_spec_to_json(c.poison);
    poison.erase("seed");
    return Json{{"dataset", dataset_to_json(c.dataset)},
                {"poison", poison},
                {"model", model},
                {"train", train_to_json(c.train)},
                {"detector", detector_to_json(c.detector)},
                {"purifier", purifier_to_json(c.purifier)},
                {"mode", to_string(c.mode)},
                {"out_dir", c.out_dir.generic_string()},
                {"seed", c.seed}};
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    try {
        if (!j.is_object()) throw InvalidArgument("experiment config must be a JSON object");
        ExperimentConfig c;
        if (j.contains("dataset")) c.dataset = dataset_from_json(j.at("dataset"));
        if (j.contains("poison")) c.poison = poison_spec_from_json(j.at("poison"));
        if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
        c.model.class_count = c.dataset.class_count;
        if (j.contains("train")) c.train = train_from_json(j.at("train"));
        if (j.contains("detector")) c.detector = detector_from_json(j.at("detector"));
        if (j.contains("purifier")) c.purifier = purifier_from_json(j.at("purifier"));
        c.mode = pipeline_mode_from_string(j.value("mode", to_string(c.mode)));
        c.out_dir = j.value("out_dir", c.out_dir.generic_string());
        c.seed = j.value("seed", c.seed);
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("experiment config: ") + e.what());
    }
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return experiment_config_from_json(load_json(path));
}

Json eval_report_to_json(const EvalReport& r) {
    Json provenance = Json::object();
    for (const auto& [k, v] : r.provenance) provenance[k] = v;
    const auto& c = r.counts;
    return Json{{"format_version", kFormatVersion},
                {"cacc", r.cacc},
                {"pacc", r.pacc},
                {"asr", r.asr},
                {"auroc", r.auroc},
                {"baseline_auroc", r.baseline_auroc},
                {"frr_empirical", r.frr_empirical},
                {"undefended", Json{{"cacc", r.undefended_cacc}, {"pacc", r.undefended_pacc}, {"asr", r.undefended_asr}}},
                {"counts", Json{{"clean_total", c.clean_total},
                                {"clean_correct", c.clean_correct},
                                {"clean_flagged", c.clean_flagged},
                                {"poisoned_total", c.poisoned_total},
                                {"poisoned_correct", c.poisoned_correct},
                                {"poisoned_target", c.poisoned_target},
                                {"poisoned_flagged", c.poisoned_flagged},
                                {"purified", c.purified}}},
                {"mode", to_string(r.mode)},
                {"flags", r.flags},
                {"provenance", provenance}};
}

EvalReport eval_defense(const TransformerClassifier& model, const DefenseBundle& bundle,
                        const std::vector<EncodedSample>& clean_test, const std::vector<EncodedSample>& poisoned_test,
                        PipelineMode mode) {
    if (clean_test.empty() || poisoned_test.empty()) throw InvalidArgument("eval_defense: empty test split");
    bundle.validate();
    const double threshold = *bundle.detector.threshold_lambda;
    const NasScorer scorer(bundle.stats, bundle.detector.k);
    const Tensor low = bundle.bounds.low_tensor();
    const Tensor up = bundle.bounds.up_tensor();

    struct Outcome {
        std::size_t plain, defended;
        double nas, mahalanobis;
        bool flagged, purified;
    };
    // Mirrors pipeline_predict while keeping the plain prediction.
    auto run = [&](const EncodedSample& s) {
        const auto [logits, trace] = forward_logits(model, s.ids);
        Outcome o;
        o.plain = argmax(logits);
        o.nas = scorer.score(trace);
        o.mahalanobis = baseline_mahalanobis_score(trace, bundle.stats);
        o.flagged = mode == PipelineMode::PurifyAll || decide(o.nas, threshold) == Decision::Poisoned;
        o.purified = o.flagged && mode != PipelineMode::DetectOnly;
        o.defended = o.purified ? argmax(forward_bounded(model, s.ids, low, up, bundle.scope)) : o.plain;
        return o;
    };

    EvalReport r;
    r.mode = mode;
    auto& c = r.counts;
    std::vector<double> clean_nas, poison_nas, clean_maha, poison_maha;
    std::size_t plain_clean_correct = 0, plain_poison_correct = 0, plain_poison_target = 0;
    std::size_t detector_clean_flags = 0;
    for (const auto& s : clean_test) {
        const Outcome o = run(s);
        ++c.clean_total;
        c.clean_correct += o.defended == s.true_label;
        c.clean_flagged += o.flagged;
        c.purified += o.purified;
        plain_clean_correct += o.plain == s.true_label;
        detector_clean_flags += decide(o.nas, threshold) == Decision::Poisoned;
        clean_nas.push_back(o.nas);
        clean_maha.push_back(-o.mahalanobis);
    }
    for (const auto& s : poisoned_test) {
        const Outcome o = run(s);
        ++c.poisoned_total;
        c.poisoned_correct += o.defended == s.true_label;
        c.poisoned_target += o.defended == s.label;
        c.poisoned_flagged += o.flagged;
        c.purified += o.purified;
        plain_poison_correct += o.plain == s.true_label;
        plain_poison_target += o.plain == s.label;
        poison_nas.push_back(o.nas);
        poison_maha.push_back(-o.mahalanobis);
    }
    r.cacc = percent(c.clean_correct, c.clean_total);
    r.pacc = percent(c.poisoned_correct, c.poisoned_total);
    r.asr = percent(c.poisoned_target, c.poisoned_total);
    r.frr_empirical = percent(detector_clean_flags, c.clean_total);
    r.auroc = 100.0 * auroc(clean_nas, poison_nas);
    r.baseline_auroc = 100.0 * auroc(clean_maha, poison_maha);
    r.undefended_cacc = percent(plain_clean_correct, c.clean_total);
    r.undefended_pacc = percent(plain_poison_correct, c.poisoned_total);
    r.undefended_asr = percent(plain_poison_target, c.poisoned_total);
    r.provenance["k"] = bundle.detector.k;
    r.provenance["frr_percent"] = bundle.detector.frr_percent;
    r.provenance["threshold_lambda"] = threshold;
    r.provenance["clamp_scope"] = to_string(bundle.scope);
    return r;
}

DefenseBundle ExperimentState::bundle() const {
    DefenseBundle b;
    b.stats = stats;
    b.detector = detector;
    b.bounds = bounds;
    b.scope = config.purifier.scope;
    return b;
}

void prepare_data(ExperimentState& state) {
    auto& cfg = state.config;
    cfg.validate();
    if (cfg.dataset.source == "synthetic") {
        state.clean = generate_synthetic_corpus(cfg.dataset.class_count, cfg.dataset.sizes, derive_seed(cfg.seed, "corpus"));
    } else {
        state.clean.train = load_tsv(cfg.dataset.train_path, SplitTag::Train, cfg.dataset.class_count);
        state.clean.validation = load_tsv(cfg.dataset.validation_path, SplitTag::Validation, cfg.dataset.class_count);
        state.clean.test = load_tsv(cfg.dataset.test_path, SplitTag::Test, cfg.dataset.class_count);
    }
    PoisonSpec spec = cfg.poison;
    spec.seed = derive_seed(cfg.seed, "poison");
    state.poisoned_train = build_poisoned_split(state.clean.train, spec, PoisonMode::Train);
    state.poisoned_test = build_poisoned_split(state.clean.test, spec, PoisonMode::Test);

    std::vector<std::string> texts;
    for (const auto& s : state.poisoned_train.samples) texts.push_back(s.text);
    state.vocab = build_vocab(texts, spec.payload_tokens());
    cfg.model.vocab_size = state.vocab.size();
    cfg.model.class_count = cfg.dataset.class_count;

    const std::size_t len = cfg.model.max_sequence_length;
    state.train_set = encode(state.poisoned_train, state.vocab, len);
    state.validation_set = encode(state.clean.validation, state.vocab, len);
    state.clean_test_set = encode(state.clean.test, state.vocab, len);
    state.poisoned_test_set = encode(state.poisoned_test, state.vocab, len);
}

void train_model(ExperimentState& state) {
    auto& cfg = state.config;
    ModelConfig mc = cfg.model;
    mc.seed = derive_seed(cfg.seed, "init");
    state.model = std::make_shared<TransformerClassifier>(mc);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train");
    state.train_result = tc.adaptive ? adaptive_train(*state.model, state.train_set, tc)
                                     : train(*state.model, state.train_set, tc);
    state.model->set_requires_grad(false);
}

void fit_detector(ExperimentState& state) {
    if (!state.model) throw InvalidArgument("fit_detector: model not trained");
    state.validation_traces = collect_traces(*state.model, state.validation_set);
    state.stats = fit_gaussian_stats(state.validation_traces, state.config.detector.sigma_floor);
    calibrate_detector(state);
}

void calibrate_detector(ExperimentState& state) {
    if (state.validation_traces.empty()) throw InvalidArgument("calibrate_detector: statistics not fitted");
    state.detector = state.config.detector;
    const NasScorer scorer(state.stats, state.detector.k);
    std::vector<double> scores;
    scores.reserve(state.validation_traces.size());
    for (const auto& t : state.validation_traces) scores.push_back(scorer.score(t));
    state.detector.threshold_lambda = calibrate_threshold(scores, state.detector.frr_percent);
}

void optimize_purifier(ExperimentState& state) {
    if (!state.model) throw InvalidArgument("optimize_purifier: model not trained");
    PurifierConfig pc = state.config.purifier;
    pc.seed = derive_seed(state.config.seed, "optimize");
    state.constraint_failed = false;
    state.constraint_best_accuracy = 0.0;
    state.purification.reset();
    try {
        state.purification = optimize_bounds(*state.model, state.stats, state.validation_set, pc);
        state.bounds = state.purification->bounds;
    } catch (const ConstraintFailure& e) {
        state.constraint_failed = true;
        state.constraint_best_accuracy = e.best_accuracy();
        state.bounds = init_bounds(state.stats, pc.init_margin);
    }
}

namespace {

Json config_identity(const ExperimentConfig& c) {
    Json j = experiment_config_to_json(c);
    j.erase("out_dir");
    return j;
}

}  // namespace

EvalReport evaluate(const ExperimentState& state) {
    if (!state.model) throw InvalidArgument("evaluate: model not trained");
    const auto& cfg = state.config;
    const PipelineMode mode = state.constraint_failed ? PipelineMode::DetectOnly : cfg.mode;
    EvalReport r = eval_defense(*state.model, state.bundle(), state.clean_test_set, state.poisoned_test_set, mode);
    if (cfg.poison.rate == 0.0) r.flags.push_back("no-attack baseline");
    if (state.constraint_failed) r.flags.push_back("detection-only fallback");

    r.provenance["attack"] = to_string(cfg.poison.kind);
    r.provenance["poison_rate"] = cfg.poison.rate;
    r.provenance["target_label"] = cfg.poison.target_label;
    r.provenance["seed"] = cfg.seed;
    r.provenance["adaptive"] = cfg.train.adaptive;
    r.provenance["adapt_reg_lambda"] = cfg.train.adapt_reg_lambda;
    r.provenance["configured_lagrange_lambda"] = cfg.purifier.lagrange_lambda;
    if (state.purification) {
        const auto& p = *state.purification;
        r.provenance["pi"] = p.pi;
        r.provenance["lagrange_lambda"] = p.lagrange_lambda;
        r.provenance["restarts"] = p.restarts;
        r.provenance["unbounded_validation_accuracy"] = p.unbounded_accuracy;
        r.provenance["bounded_validation_accuracy"] = p.validation_accuracy;
    } else if (state.constraint_failed) {
        r.provenance["best_bounded_validation_accuracy"] = state.constraint_best_accuracy;
    }
    r.provenance["config_hash"] = content_hash(dump_json(config_identity(cfg)));
    r.provenance["checkpoint_hash"] = content_hash(dump_json(checkpoint_to_json(*state.model)));
    r.provenance["vocab_hash"] = content_hash(dump_json(vocab_to_json(state.vocab)));
    r.provenance["stats_hash"] = content_hash(dump_json(stats_to_json(state.stats, state.detector)));
    const double lambda = state.purification ? state.purification->lagrange_lambda : cfg.purifier.lagrange_lambda;
    const double pi = state.purification ? state.purification->pi : 0.0;
    r.provenance["bounds_hash"] = content_hash(dump_json(bounds_to_json(state.bounds, pi, lambda)));
    return r;
}

std::string scores_csv(const TransformerClassifier& model, const GaussianStats& stats, double k,
                       const std::vector<std::pair<std::string, const std::vector<EncodedSample>*>>& splits) {
    const NasScorer scorer(stats, k);
    std::ostringstream out;
    out << "sample_id,split,is_poisoned,nas_score\n";
    for (const auto& [name, data] : splits) {
        for (const auto& s : *data) {
            const double score = scorer.score(forward_logits(model, s.ids).second);
            out << s.sample_id << ',' << name << ',' << (s.is_poisoned ? 1 : 0) << ',' << format_number(score) << '\n';
        }
    }
    return out.str();
}

void write_artifacts(const ExperimentState& state, EvalReport& report) {
    const auto& dir = state.config.out_dir;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    const double lambda = state.purification ? state.purification->lagrange_lambda : state.config.purifier.lagrange_lambda;
    const double pi = state.purification ? state.purification->pi : 0.0;
    BundlePaths paths{dir / "checkpoint.json", dir / "vocab.json", dir / "stats.json", dir / "bounds.json"};
    save_checkpoint(*state.model, paths.checkpoint);
    save_json(vocab_to_json(state.vocab), paths.vocab);
    save_json(stats_to_json(state.stats, state.detector), paths.stats);
    save_json(bounds_to_json(state.bounds, pi, lambda), paths.bounds);
    DefenseBundle bundle = state.bundle();
    bundle.provenance["config_hash"] = report.provenance.at("config_hash").get<std::string>();
    save_bundle_manifest(paths, bundle, dir / "bundle.json");
    save_json(experiment_config_to_json(state.config), dir / "config.json");

    Json log = Json::array();
    for (const auto& e : state.train_result.history) {
        log.push_back(Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_reg", e.mean_reg}, {"train_acc", e.train_acc}});
    }
    save_json(Json{{"format_version", kFormatVersion}, {"history", log}}, dir / "train_log.json");

    write_file(dir / "scores.csv",
               scores_csv(*state.model, state.stats, state.detector.k,
                          {{"validation", &state.validation_set},
                           {"clean_test", &state.clean_test_set},
                           {"poisoned_test", &state.poisoned_test_set}}));
    save_json(eval_report_to_json(report), dir / "report.json");
}

ExperimentState run_pipeline(const ExperimentConfig& config) {
    ExperimentState state;
    state.config = config;
    prepare_data(state);
    train_model(state);
    fit_detector(state);
    optimize_purifier(state);
    return state;
}

EvalReport run_experiment(const ExperimentConfig& config) {
    const ExperimentState state = run_pipeline(config);
    EvalReport report = evaluate(state);
    write_artifacts(state, report);
    return report;
}

std::string to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::K: return "k";
        case SweepAxis::FrrPercent: return "frr_percent";
        case SweepAxis::LagrangeLambda: return "lagrange_lambda";
    }
    return "k";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
    if (name == "k") return SweepAxis::K;
    if (name == "frr_percent" || name == "frr") return SweepAxis::FrrPercent;
    if (name == "lagrange_lambda" || name == "lambda") return SweepAxis::LagrangeLambda;
    throw InvalidArgument("unknown sweep axis '" + name + "'");
}

ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis, SweepValue value) {
    ExperimentConfig c = base;
    if (!value) {
        if (axis != SweepAxis::FrrPercent) throw InvalidArgument("'no detection' is only valid on the frr axis");
        c.mode = PipelineMode::PurifyAll;
        return c;
    }
    switch (axis) {
        case SweepAxis::K: c.detector.k = *value; break;
        case SweepAxis::FrrPercent: c.detector.frr_percent = *value; break;
        case SweepAxis::LagrangeLambda: c.purifier.lagrange_lambda = *value; break;
    }
    c.validate();
    return c;
}

std::vector<SweepRow> sweep(const ExperimentState& state, SweepAxis axis, const std::vector<SweepValue>& values) {
    if (values.empty()) throw InvalidArgument("sweep: empty value list");
    std::vector<SweepRow> rows;
    for (const auto& v : values) {
        ExperimentState point = state;
        const ExperimentConfig c = sweep_point_config(state.config, axis, v);
        point.config.detector = c.detector;
        point.config.purifier = c.purifier;
        point.config.mode = c.mode;
        if (axis == SweepAxis::LagrangeLambda) {
            optimize_purifier(point);
        } else {
            calibrate_detector(point);
        }
        rows.push_back(SweepRow{v, evaluate(point)});
    }
    return rows;
}

std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<SweepValue>& values) {
    if (values.empty()) throw InvalidArgument("sweep: empty value list");
    for (const auto& v : values) (void)sweep_point_config(config, axis, v);
    return sweep(run_pipeline(config), axis, values);
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << to_string(axis)
        << ",cacc,pacc,asr,auroc,baseline_auroc,frr_empirical,undefended_cacc,undefended_pacc,undefended_asr,"
           "threshold_lambda,flags\n";
    for (const auto& row : rows) {
        const auto& r = row.report;
        std::string flags;
        for (const auto& f : r.flags) flags += (flags.empty() ? "" : ";") + f;
        out << (row.value ? format_number(*row.value) : std::string("none")) << ',' << format_number(r.cacc) << ','
            << format_number(r.pacc) << ',' << format_number(r.asr) << ',' << format_number(r.auroc) << ','
            << format_number(r.baseline_auroc) << ',' << format_number(r.frr_empirical) << ','
            << format_number(r.undefended_cacc) << ',' << format_number(r.undefended_pacc) << ','
            << format_number(r.undefended_asr) << ',' << format_number(r.provenance.at("threshold_lambda").get<double>())
            << ',' << flags << '\n';
    }
    return out.str();
}

}  // namespace actguard
