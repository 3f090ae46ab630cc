#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

namespace actguard {

enum class SplitTag { Train, Validation, Test };

std::string to_string(SplitTag tag);
SplitTag split_from_string(const std::string& name);

struct Sample {
    std::string text;
    std::size_t label = 0;
    bool is_poisoned = false;
    std::uint64_t sample_id = 0;
    // Label before poisoning; equals `label` for clean samples.
    std::size_t true_label = 0;
};

struct Dataset {
    SplitTag split = SplitTag::Train;
    std::size_t class_count = 2;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
    // Throws InvalidArgument on a label >= class_count or a duplicate id.
    void validate() const;
};

class Vocabulary {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kUnk = 1;
    static constexpr std::int32_t kCls = 2;

    Vocabulary();
    // Tokens beyond the reserved ones, in id order.
    explicit Vocabulary(const std::vector<std::string>& tokens);

    std::size_t size() const { return tokens_.size(); }
    std::int32_t id(const std::string& token) const;  // kUnk when absent
    bool contains(const std::string& token) const { return index_.count(token) != 0; }
    const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::int32_t> index_;
};

// Lowercased whitespace split.
std::vector<std::string> split_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

// Ids ordered by (frequency desc, token asc) over `texts`; `extra_tokens`
// (trigger payloads) are always included. Throws InvalidArgument on an
// empty corpus.
Vocabulary build_vocab(const std::vector<std::string>& texts, const std::vector<std::string>& extra_tokens = {});

// Unknown tokens map to UNK; keeps at most max_sequence_length - 1 ids.
std::vector<std::int32_t> tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_sequence_length);

// A sample mapped to token ids, as consumed by the model.
struct EncodedSample {
    std::vector<std::int32_t> ids;
    std::size_t label = 0;
    std::size_t true_label = 0;
    bool is_poisoned = false;
    std::uint64_t sample_id = 0;
};

// Samples whose text tokenizes to nothing are dropped.
std::vector<EncodedSample> encode(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_sequence_length);

enum class TriggerKind { BadnetsInsert, AddsentInsert, ReverseProxy, CharsubProxy };

std::string to_string(TriggerKind kind);
TriggerKind trigger_from_string(const std::string& name);

struct PoisonSpec {
    TriggerKind kind = TriggerKind::BadnetsInsert;
    std::vector<std::string> words{"cf", "mn", "bb", "tq"};
    std::string sentence = "I watch this 3D movie";
    // Applied character-wise to every token by charsub-proxy.
    std::map<char, char> substitutions{{'a', '4'}, {'e', '3'}};
    std::size_t target_label = 1;
    double rate = 0.2;
    std::uint64_t seed = 0;

    void validate(std::size_t class_count) const;
    // Tokens the trigger may introduce (for vocabulary construction).
    std::vector<std::string> payload_tokens() const;
};

// Returns the poisoned text; the poisoned label is always spec.target_label.
// Throws InvalidArgument on empty text.
std::string poison_text(const std::string& text, const PoisonSpec& spec, std::mt19937_64& rng);

enum class PoisonMode { Train, Test };

// Train: floor(rate * N) non-target samples, chosen uniformly, are replaced by
// poisoned copies labelled with the target. Test: every non-target sample
// is poisoned and target-class samples are dropped. Throws
// InvalidArgument when the rate is outside [0, 1].
Dataset build_poisoned_split(const Dataset& dataset, const PoisonSpec& spec, PoisonMode mode);

struct SplitSizes {
    std::size_t train = 0;
    std::size_t validation = 0;
    std::size_t test = 0;
};

struct CorpusSplits {
    Dataset train;
    Dataset validation;
    Dataset test;
};

// Template sentences whose label is fixed by class keyword counts. 70/15/15
// split of `size` unless explicit sizes are given. class_count must be 2 or 4.
CorpusSplits generate_synthetic_corpus(std::size_t class_count, std::size_t size, std::uint64_t seed);
CorpusSplits generate_synthetic_corpus(std::size_t class_count, SplitSizes sizes, std::uint64_t seed);

// Label implied by the keyword sets of the synthetic generator (argmax of
// per-class keyword counts, ties to the lower class).
std::size_t synthetic_keyword_label(const std::string& text, std::size_t class_count);

// "label<TAB>text" per line, UTF-8. Throws IoError / InvalidArgument.
Dataset load_tsv(const std::filesystem::path& path, SplitTag split, std::size_t class_count);
void save_tsv(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace actguard
