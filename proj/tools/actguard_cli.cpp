// actguard: backdoor detection and activation-bounding purification for a
// toy transformer text classifier. Stages chain through files in --out.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "actguard/errors.hpp"
#include "actguard/harness.hpp"

using namespace actguard;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 2;
constexpr int kExitConstraint = 3;
constexpr int kExitIo = 4;

struct Common {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

ExperimentConfig load_config(const Common& c) {
    ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_experiment_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out.empty()) cfg.out_dir = c.out;
    cfg.validate();
    return cfg;
}

PoisonSpec seeded_poison(const ExperimentConfig& cfg) {
    PoisonSpec spec = cfg.poison;
    spec.seed = derive_seed(cfg.seed, "poison");
    return spec;
}

Dataset load_split(const fs::path& dir, const std::string& name, SplitTag tag, std::size_t class_count) {
    Dataset d = load_tsv(dir / (name + ".tsv"), tag, class_count);
    const fs::path manifest = dir / (name + ".json");
    if (fs::exists(manifest)) apply_poison_manifest(d, load_json(manifest));
    return d;
}

void save_poisoned(const fs::path& dir, const std::string& name, const Dataset& d, const PoisonSpec& spec, PoisonMode mode) {
    save_tsv(d, dir / (name + ".tsv"));
    save_json(poison_manifest(d, spec, mode), dir / (name + ".json"));
}

std::vector<EncodedSample> encoded(const fs::path& dir, const std::string& name, SplitTag tag,
                                   const TransformerClassifier& model, const Vocabulary& vocab) {
    return encode(load_split(dir, name, tag, model.config().class_count), vocab, model.config().max_sequence_length);
}

void print_report(const EvalReport& r) {
    std::printf("CACC %.2f  PACC %.2f  ASR %.2f  AUROC %.2f  (baseline %.2f)  FRR %.2f\n", r.cacc, r.pacc, r.asr,
                r.auroc, r.baseline_auroc, r.frr_empirical);
    std::printf("undefended: CACC %.2f  PACC %.2f  ASR %.2f\n", r.undefended_cacc, r.undefended_pacc, r.undefended_asr);
    for (const auto& f : r.flags) std::printf("flag: %s\n", f.c_str());
}

std::vector<SweepValue> parse_values(const std::string& text) {
    std::vector<SweepValue> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item == "none" || item == "no-detection") {
            out.push_back(std::nullopt);
            continue;
        }
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidArgument("bad sweep value '" + item + "'");
        }
    }
    return out;
}

void cmd_gen_corpus(const ExperimentConfig& cfg) {
    CorpusSplits s;
    if (cfg.dataset.source == "synthetic") {
        s = generate_synthetic_corpus(cfg.dataset.class_count, cfg.dataset.sizes, derive_seed(cfg.seed, "corpus"));
    } else {
        s.train = load_tsv(cfg.dataset.train_path, SplitTag::Train, cfg.dataset.class_count);
        s.validation = load_tsv(cfg.dataset.validation_path, SplitTag::Validation, cfg.dataset.class_count);
        s.test = load_tsv(cfg.dataset.test_path, SplitTag::Test, cfg.dataset.class_count);
    }
    save_tsv(s.train, cfg.out_dir / "train.tsv");
    save_tsv(s.validation, cfg.out_dir / "validation.tsv");
    save_tsv(s.test, cfg.out_dir / "test.tsv");
    save_json(experiment_config_to_json(cfg), cfg.out_dir / "config.json");
    std::printf("train %zu  validation %zu  test %zu\n", s.train.size(), s.validation.size(), s.test.size());
}

void cmd_poison(const ExperimentConfig& cfg) {
    const std::size_t c = cfg.dataset.class_count;
    const PoisonSpec spec = seeded_poison(cfg);
    const Dataset train = build_poisoned_split(load_tsv(cfg.out_dir / "train.tsv", SplitTag::Train, c), spec, PoisonMode::Train);
    const Dataset test = build_poisoned_split(load_tsv(cfg.out_dir / "test.tsv", SplitTag::Test, c), spec, PoisonMode::Test);
    save_poisoned(cfg.out_dir, "poisoned_train", train, spec, PoisonMode::Train);
    save_poisoned(cfg.out_dir, "poisoned_test", test, spec, PoisonMode::Test);
    std::size_t n = 0;
    for (const auto& s : train.samples) n += s.is_poisoned;
    std::printf("poisoned %zu of %zu training samples; %zu poisoned test samples\n", n, train.size(), test.size());
}

void cmd_train(ExperimentConfig cfg, bool adaptive, std::optional<float> reg_lambda) {
    if (adaptive) {
        cfg.train.adaptive = true;
        if (reg_lambda) cfg.train.adapt_reg_lambda = *reg_lambda;
    }
    const Dataset data = load_split(cfg.out_dir, "poisoned_train", SplitTag::Train, cfg.dataset.class_count);
    std::vector<std::string> texts;
    for (const auto& s : data.samples) texts.push_back(s.text);
    const Vocabulary vocab = build_vocab(texts, cfg.poison.payload_tokens());
    ModelConfig mc = cfg.model;
    mc.vocab_size = vocab.size();
    mc.class_count = cfg.dataset.class_count;
    mc.seed = derive_seed(cfg.seed, "init");
    TransformerClassifier model(mc);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train");
    const auto set = encode(data, vocab, mc.max_sequence_length);
    const TrainResult result = tc.adaptive ? adaptive_train(model, set, tc) : train(model, set, tc);
    save_checkpoint(model, cfg.out_dir / "checkpoint.json");
    save_json(vocab_to_json(vocab), cfg.out_dir / "vocab.json");
    Json log = Json::array();
    for (const auto& e : result.history) {
        log.push_back(Json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_reg", e.mean_reg}, {"train_acc", e.train_acc}});
        std::printf("epoch %zu  loss %.4f  reg %.4f  acc %.4f\n", e.epoch, e.mean_loss, e.mean_reg, e.train_acc);
    }
    save_json(Json{{"format_version", kFormatVersion}, {"history", log}}, cfg.out_dir / "train_log.json");
}

void cmd_fit_stats(const ExperimentConfig& cfg) {
    const auto model = load_checkpoint(cfg.out_dir / "checkpoint.json");
    const auto vocab = vocab_from_json(load_json(cfg.out_dir / "vocab.json"));
    const auto val = encoded(cfg.out_dir, "validation", SplitTag::Validation, model, vocab);
    const GaussianStats stats = fit_gaussian_stats(model, val, cfg.detector.sigma_floor);
    DetectorConfig det = cfg.detector;
    det.threshold_lambda.reset();
    save_json(stats_to_json(stats, det), cfg.out_dir / "stats.json");
    std::printf("fitted %zu x %zu neurons on %zu samples\n", stats.layers, stats.width, stats.sample_count);
}

void cmd_calibrate(const ExperimentConfig& cfg) {
    const auto model = load_checkpoint(cfg.out_dir / "checkpoint.json");
    const auto vocab = vocab_from_json(load_json(cfg.out_dir / "vocab.json"));
    StatsFile f = stats_from_json(load_json(cfg.out_dir / "stats.json"));
    f.detector = cfg.detector;
    const auto val = encoded(cfg.out_dir, "validation", SplitTag::Validation, model, vocab);
    const NasScorer scorer(f.stats, f.detector.k);
    std::vector<double> scores;
    for (const auto& t : collect_traces(model, val)) scores.push_back(scorer.score(t));
    f.detector.threshold_lambda = calibrate_threshold(scores, f.detector.frr_percent);
    save_json(stats_to_json(f.stats, f.detector), cfg.out_dir / "stats.json");
    std::printf("threshold %.6f at k=%g, frr=%g%%\n", *f.detector.threshold_lambda, f.detector.k, f.detector.frr_percent);
}

int cmd_optimize_bounds(const ExperimentConfig& cfg) {
    const auto model = load_checkpoint(cfg.out_dir / "checkpoint.json");
    const auto vocab = vocab_from_json(load_json(cfg.out_dir / "vocab.json"));
    const StatsFile f = stats_from_json(load_json(cfg.out_dir / "stats.json"));
    const auto val = encoded(cfg.out_dir, "validation", SplitTag::Validation, model, vocab);
    PurifierConfig pc = cfg.purifier;
    pc.seed = derive_seed(cfg.seed, "optimize");
    DefenseBundle bundle;
    bundle.stats = f.stats;
    bundle.detector = f.detector;
    bundle.scope = pc.scope;
    int code = kExitOk;
    double pi = 0.0, lambda = pc.lagrange_lambda;
    try {
        const OptimizeResult r = optimize_bounds(model, f.stats, val, pc);
        bundle.bounds = r.bounds;
        pi = r.pi;
        lambda = r.lagrange_lambda;
        std::printf("validation accuracy %.4f (pi %.4f), lambda %g after %zu restarts, loss %.6f -> %.6f\n",
                    r.validation_accuracy, r.pi, r.lagrange_lambda, r.restarts, r.initial_loss, r.final_loss);
    } catch (const ConstraintFailure& e) {
        std::fprintf(stderr, "constraint failure: %s (best accuracy %.4f); falling back to detection only\n", e.what(),
                     e.best_accuracy());
        bundle.bounds = init_bounds(f.stats, pc.init_margin);
        bundle.provenance["fallback"] = "detection-only";
        code = kExitConstraint;
    }
    const fs::path& dir = cfg.out_dir;
    save_json(bounds_to_json(bundle.bounds, pi, lambda), dir / "bounds.json");
    save_bundle_manifest({dir / "checkpoint.json", dir / "vocab.json", dir / "stats.json", dir / "bounds.json"}, bundle,
                         dir / "bundle.json");
    return code;
}

PipelineMode bundle_mode(const ExperimentConfig& cfg, const DefenseBundle& bundle) {
    return bundle.provenance.count("fallback") ? PipelineMode::DetectOnly : cfg.mode;
}

void cmd_detect(const ExperimentConfig& cfg, const std::string& input) {
    const LoadedBundle b = load_bundle(cfg.out_dir / "bundle.json");
    const Dataset d = load_tsv(input, SplitTag::Test, b.model.config().class_count);
    const NasScorer scorer(b.bundle.stats, b.bundle.detector.k);
    std::ostringstream out;
    out << "sample_id,nas_score,decision\n";
    std::size_t flagged = 0;
    for (const auto& s : encode(d, b.vocab, b.model.config().max_sequence_length)) {
        const double score = scorer.score(forward_logits(b.model, s.ids).second);
        const bool poisoned = decide(score, *b.bundle.detector.threshold_lambda) == Decision::Poisoned;
        flagged += poisoned;
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%llu,%.9g,%s\n", static_cast<unsigned long long>(s.sample_id), score,
                      poisoned ? "poisoned" : "clean");
        out << buf;
    }
    write_file(cfg.out_dir / "detections.csv", out.str());
    std::printf("flagged %zu of %zu\n", flagged, d.size());
}

void cmd_purify(const ExperimentConfig& cfg, const std::string& input) {
    const LoadedBundle b = load_bundle(cfg.out_dir / "bundle.json");
    const Dataset d = load_tsv(input, SplitTag::Test, b.model.config().class_count);
    const PipelineMode mode = bundle_mode(cfg, b.bundle);
    std::ostringstream out;
    out << "sample_id,label,nas_score,flagged,was_purified\n";
    for (const auto& s : encode(d, b.vocab, b.model.config().max_sequence_length)) {
        const PipelinePrediction p = pipeline_predict(b.model, b.bundle, s.ids, mode);
        char buf[128];
        std::snprintf(buf, sizeof(buf), "%llu,%zu,%.9g,%d,%d\n", static_cast<unsigned long long>(s.sample_id), p.label,
                      p.nas_score, p.flagged ? 1 : 0, p.was_purified ? 1 : 0);
        out << buf;
    }
    write_file(cfg.out_dir / "predictions.csv", out.str());
}

int cmd_eval(const ExperimentConfig& cfg) {
    const fs::path& dir = cfg.out_dir;
    const LoadedBundle b = load_bundle(dir / "bundle.json");
    const auto clean = encoded(dir, "test", SplitTag::Test, b.model, b.vocab);
    const auto poisoned = encoded(dir, "poisoned_test", SplitTag::Test, b.model, b.vocab);
    const PipelineMode mode = bundle_mode(cfg, b.bundle);
    EvalReport r = eval_defense(b.model, b.bundle, clean, poisoned, mode);
    if (cfg.poison.rate == 0.0) r.flags.push_back("no-attack baseline");
    if (mode == PipelineMode::DetectOnly && cfg.mode != PipelineMode::DetectOnly) r.flags.push_back("detection-only fallback");
    for (const char* name : {"checkpoint", "vocab", "stats", "bounds"}) {
        r.provenance[std::string(name) + "_hash"] = file_hash(dir / (std::string(name) + ".json"));
    }
    r.provenance["attack"] = to_string(cfg.poison.kind);
    r.provenance["seed"] = cfg.seed;
    save_json(eval_report_to_json(r), dir / "report.json");
    print_report(r);
    return r.flags.empty() || cfg.poison.rate == 0.0 ? kExitOk : kExitConstraint;
}

void cmd_export_scores(const ExperimentConfig& cfg) {
    const fs::path& dir = cfg.out_dir;
    const LoadedBundle b = load_bundle(dir / "bundle.json");
    const auto val = encoded(dir, "validation", SplitTag::Validation, b.model, b.vocab);
    const auto clean = encoded(dir, "test", SplitTag::Test, b.model, b.vocab);
    const auto poisoned = encoded(dir, "poisoned_test", SplitTag::Test, b.model, b.vocab);
    write_file(dir / "scores.csv", scores_csv(b.model, b.bundle.stats, b.bundle.detector.k,
                                              {{"validation", &val}, {"clean_test", &clean}, {"poisoned_test", &poisoned}}));
}

void cmd_sweep(const ExperimentConfig& cfg, const std::string& axis_name, const std::string& values) {
    const SweepAxis axis = sweep_axis_from_string(axis_name);
    const auto rows = sweep(cfg, axis, parse_values(values));
    const std::string csv = sweep_csv(axis, rows);
    write_file(cfg.out_dir / ("sweep_" + to_string(axis) + ".csv"), csv);
    std::fputs(csv.c_str(), stdout);
}

int cmd_run(const ExperimentConfig& cfg) {
    const EvalReport r = run_experiment(cfg);
    print_report(r);
    for (const auto& f : r.flags) {
        if (f == "detection-only fallback") return kExitConstraint;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"actguard: backdoor detection and activation-bounding purification"};
    app.require_subcommand(1);
    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "experiment config JSON");
        sub->add_option("--seed", common.seed, "global seed (overrides the config)");
        sub->add_option("--out", common.out, "output directory (overrides the config)");
        return sub;
    };

    std::string input, axis, values;
    std::optional<float> reg_lambda;
    auto* gen = add_common(app.add_subcommand("gen-corpus", "generate or import the clean splits"));
    auto* poison = add_common(app.add_subcommand("poison", "build poisoned train and test splits"));
    auto* train_cmd = add_common(app.add_subcommand("train", "train on the poisoned split"));
    auto* adaptive = add_common(app.add_subcommand("adaptive-train", "train with the activation regularizer"));
    adaptive->add_option("--reg-lambda", reg_lambda, "regularizer weight");
    auto* fit = add_common(app.add_subcommand("fit-stats", "fit clean activation statistics"));
    auto* calibrate = add_common(app.add_subcommand("calibrate", "calibrate the detection threshold"));
    auto* optimize = add_common(app.add_subcommand("optimize-bounds", "optimize activation bounds"));
    auto* detect = add_common(app.add_subcommand("detect", "score and flag inputs"));
    detect->add_option("--input", input, "TSV to score")->required();
    auto* purify = add_common(app.add_subcommand("purify", "defended predictions"));
    purify->add_option("--input", input, "TSV to classify")->required();
    auto* eval = add_common(app.add_subcommand("eval", "evaluate the defense on both test splits"));
    auto* sweep_cmd = add_common(app.add_subcommand("sweep", "ablation over k, frr_percent or lagrange_lambda"));
    sweep_cmd->add_option("--axis", axis, "k | frr_percent | lagrange_lambda")->required();
    sweep_cmd->add_option("--values", values, "comma-separated; 'none' disables detection on the frr axis")->required();
    auto* scores = add_common(app.add_subcommand("export-scores", "write NAS score distributions"));
    auto* run = add_common(app.add_subcommand("run", "full pipeline with artifacts"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInvalid;
    }

    try {
        const ExperimentConfig cfg = load_config(common);
        std::filesystem::create_directories(cfg.out_dir);
        if (gen->parsed()) cmd_gen_corpus(cfg);
        else if (poison->parsed()) cmd_poison(cfg);
        else if (train_cmd->parsed()) cmd_train(cfg, false, std::nullopt);
        else if (adaptive->parsed()) cmd_train(cfg, true, reg_lambda);
        else if (fit->parsed()) cmd_fit_stats(cfg);
        else if (calibrate->parsed()) cmd_calibrate(cfg);
        else if (optimize->parsed()) return cmd_optimize_bounds(cfg);
        else if (detect->parsed()) cmd_detect(cfg, input);
        else if (purify->parsed()) cmd_purify(cfg, input);
        else if (eval->parsed()) return cmd_eval(cfg);
        else if (sweep_cmd->parsed()) cmd_sweep(cfg, axis, values);
        else if (scores->parsed()) cmd_export_scores(cfg);
        else if (run->parsed()) return cmd_run(cfg);
        return kExitOk;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const ConstraintFailure& e) {
        std::fprintf(stderr, "constraint failure: %s\n", e.what());
        return kExitConstraint;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "parse error at byte %zu: %s\n", e.byte_offset(), e.what());
        return kExitInvalid;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInvalid;
    }
}
