#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "actguard/corpus.hpp"
#include "actguard/detector.hpp"
#include "actguard/model.hpp"
#include "actguard/purifier.hpp"

// JSON persistence for every artifact the harness exchanges between stages.
// All documents carry "format_version": 1 and serialize with sorted keys, so
// equal objects produce byte-identical files. Loading throws
// UnsupportedFormat on a version mismatch, ParseError (with byte offset) on
// malformed JSON and IoError when the file cannot be read or written.

namespace actguard {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// 64-bit FNV-1a as 16 hex digits.
std::string content_hash(std::string_view bytes);
std::string file_hash(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
// Pretty-printed, newline-terminated.
std::string dump_json(const Json& doc);
Json parse_json(std::string_view text);
Json load_json(const std::filesystem::path& path);
void save_json(const Json& doc, const std::filesystem::path& path);

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

Json checkpoint_to_json(const TransformerClassifier& model);
TransformerClassifier checkpoint_from_json(const Json& j);
void save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path);
TransformerClassifier load_checkpoint(const std::filesystem::path& path);

Json vocab_to_json(const Vocabulary& vocab);
Vocabulary vocab_from_json(const Json& j);

struct StatsFile {
    GaussianStats stats;
    DetectorConfig detector;
};
Json stats_to_json(const GaussianStats& stats, const DetectorConfig& detector);
StatsFile stats_from_json(const Json& j);

struct BoundsFile {
    BoundingIntervals bounds;
    double pi = 0.0;
    double lagrange_lambda = 0.0;
};
Json bounds_to_json(const BoundingIntervals& bounds, double pi, double lagrange_lambda);
BoundsFile bounds_from_json(const Json& j);

Json poison_spec_to_json(const PoisonSpec& spec);
PoisonSpec poison_spec_from_json(const Json& j);

// Manifest for a poisoned split: the spec, its seed, and per-sample poison
// flags and ground-truth labels (the TSV keeps only the training label).
Json poison_manifest(const Dataset& poisoned, const PoisonSpec& spec, PoisonMode mode);
// Restores poison flags and ground truth onto a TSV-loaded split.
void apply_poison_manifest(Dataset& dataset, const Json& manifest);

// Bundle manifest referencing the checkpoint, vocabulary, stats and bounds
// files (relative to the manifest) with their content hashes.
struct BundlePaths {
    std::filesystem::path checkpoint;
    std::filesystem::path vocab;
    std::filesystem::path stats;
    std::filesystem::path bounds;
};
void save_bundle_manifest(const BundlePaths& paths, const DefenseBundle& bundle, const std::filesystem::path& path);

struct LoadedBundle {
    TransformerClassifier model;
    Vocabulary vocab;
    DefenseBundle bundle;
};
// Verifies every referenced file's hash; a mismatch is an InvalidArgument.
LoadedBundle load_bundle(const std::filesystem::path& manifest_path);

std::string to_string(ClampScope scope);
ClampScope clamp_scope_from_string(const std::string& name);

}  // namespace actguard
