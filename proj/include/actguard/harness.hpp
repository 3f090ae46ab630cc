#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "actguard/artifacts.hpp"
#include "actguard/corpus.hpp"
#include "actguard/detector.hpp"
#include "actguard/model.hpp"
#include "actguard/purifier.hpp"
#include "actguard/trainer.hpp"

namespace actguard {

// Seed for one named randomness stream ("corpus", "poison", "init",
// "train", "optimize") derived from the global seed.
std::uint64_t derive_seed(std::uint64_t global_seed, const std::string& stream);

struct DatasetSpec {
    // "synthetic" or "tsv"
    std::string source = "synthetic";
    std::size_t class_count = 2;
    SplitSizes sizes{4000, 800, 800};
    std::filesystem::path train_path;
    std::filesystem::path validation_path;
    std::filesystem::path test_path;

    void validate() const;
};

struct ExperimentConfig {
    DatasetSpec dataset;
    PoisonSpec poison;
    ModelConfig model;  // vocab_size is filled from the built vocabulary
    TrainConfig train;
    DetectorConfig detector;
    PurifierConfig purifier;
    PipelineMode mode = PipelineMode::DetectThenPurify;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;

    // Throws InvalidArgument naming the offending field.
    void validate() const;
};

Json experiment_config_to_json(const ExperimentConfig& config);
// Missing fields keep their defaults; unknown sub-config values throw.
ExperimentConfig experiment_config_from_json(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::string to_string(PipelineMode mode);
PipelineMode pipeline_mode_from_string(const std::string& name);

struct EvalCounts {
    std::size_t clean_total = 0;
    std::size_t clean_correct = 0;
    std::size_t clean_flagged = 0;
    std::size_t poisoned_total = 0;
    std::size_t poisoned_correct = 0;
    std::size_t poisoned_target = 0;
    std::size_t poisoned_flagged = 0;
    std::size_t purified = 0;
};

struct EvalReport {
    // Defended metrics, percent.
    double cacc = 0.0;
    double pacc = 0.0;
    double asr = 0.0;
    double auroc = 0.0;           // NAS, percent
    double baseline_auroc = 0.0;  // diagonal Mahalanobis, percent
    double frr_empirical = 0.0;
    // Same model without any defense.
    double undefended_cacc = 0.0;
    double undefended_pacc = 0.0;
    double undefended_asr = 0.0;
    EvalCounts counts;
    PipelineMode mode = PipelineMode::DetectThenPurify;
    std::vector<std::string> flags;
    // Settings in force and artifact hashes.
    std::map<std::string, Json> provenance;
};

Json eval_report_to_json(const EvalReport& report);

// Per-sample NAS scores and decisions for both test splits; counts and
// percentages follow pipeline_predict. Poisoned samples carry the target as
// `label` and the ground truth as `true_label`. Throws InvalidArgument on
// an empty split.
EvalReport eval_defense(const TransformerClassifier& model, const DefenseBundle& bundle,
                        const std::vector<EncodedSample>& clean_test, const std::vector<EncodedSample>& poisoned_test,
                        PipelineMode mode = PipelineMode::DetectThenPurify);

// Everything one experiment produces, stage by stage.
struct ExperimentState {
    ExperimentConfig config;
    CorpusSplits clean;
    Dataset poisoned_train;
    Dataset poisoned_test;
    Vocabulary vocab;
    std::vector<EncodedSample> train_set;
    std::vector<EncodedSample> validation_set;
    std::vector<EncodedSample> clean_test_set;
    std::vector<EncodedSample> poisoned_test_set;

    // Shared so sweep points can copy the state without retraining.
    std::shared_ptr<TransformerClassifier> model;
    TrainResult train_result;

    GaussianStats stats;
    std::vector<ActivationTrace> validation_traces;
    DetectorConfig detector;

    std::optional<OptimizeResult> purification;
    bool constraint_failed = false;
    double constraint_best_accuracy = 0.0;
    BoundingIntervals bounds;

    DefenseBundle bundle() const;
};

// Stages in pipeline order; each consumes the previous stage's fields.
void prepare_data(ExperimentState& state);
void train_model(ExperimentState& state);
void fit_detector(ExperimentState& state);
// Threshold only; reuses the fitted statistics and traces.
void calibrate_detector(ExperimentState& state);
void optimize_purifier(ExperimentState& state);
EvalReport evaluate(const ExperimentState& state);
// Checkpoint, vocabulary, stats, bounds, bundle manifest, scores CSV and
// report JSON under config.out_dir. Adds artifact hashes to the report.
void write_artifacts(const ExperimentState& state, EvalReport& report);

ExperimentState run_pipeline(const ExperimentConfig& config);
// Full pipeline plus artifacts.
EvalReport run_experiment(const ExperimentConfig& config);

enum class SweepAxis { K, FrrPercent, LagrangeLambda };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

// nullopt on the frr axis means "no detection": every input is purified.
using SweepValue = std::optional<double>;

struct SweepRow {
    SweepValue value;
    EvalReport report;
};

// Config for one sweep point, as run_experiment would see it.
ExperimentConfig sweep_point_config(const ExperimentConfig& base, SweepAxis axis, SweepValue value);

// Re-runs only the stages the axis affects. Throws InvalidArgument on an
// empty value list or a "no detection" value off the frr axis.
std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepAxis axis, const std::vector<SweepValue>& values);
// Same, starting from a state that has already been through every stage.
std::vector<SweepRow> sweep(const ExperimentState& state, SweepAxis axis, const std::vector<SweepValue>& values);

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

// "sample_id,split,is_poisoned,nas_score"
std::string scores_csv(const TransformerClassifier& model, const GaussianStats& stats, double k,
                       const std::vector<std::pair<std::string, const std::vector<EncodedSample>*>>& splits);

}  // namespace actguard
