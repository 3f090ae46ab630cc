#include "actguard/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "actguard/errors.hpp"

namespace actguard {

std::string to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::Train: return "train";
        case SplitTag::Validation: return "validation";
        case SplitTag::Test: return "test";
    }
    return "unknown";
}

SplitTag split_from_string(const std::string& name) {
    if (name == "train") return SplitTag::Train;
    if (name == "validation") return SplitTag::Validation;
    if (name == "test") return SplitTag::Test;
    throw InvalidArgument("unknown split '" + name + "'");
}

void Dataset::validate() const {
    std::set<std::uint64_t> ids;
    for (const auto& s : samples) {
        if (s.label >= class_count || s.true_label >= class_count) {
            throw InvalidArgument("sample " + std::to_string(s.sample_id) + " has label outside [0, " +
                                  std::to_string(class_count) + ")");
        }
        if (!ids.insert(s.sample_id).second) {
            throw InvalidArgument("duplicate sample_id " + std::to_string(s.sample_id));
        }
    }
}

// ---------------------------------------------------------------------------
// Vocabulary and tokenization

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
    tokens_ = {"[PAD]", "[UNK]", "[CLS]"};
    for (const auto& t : tokens) {
        if (t == "[PAD]" || t == "[UNK]" || t == "[CLS]") continue;
        tokens_.push_back(t);
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<std::int32_t>(i)).second) {
            throw InvalidArgument("duplicate vocabulary token '" + tokens_[i] + "'");
        }
    }
}

std::int32_t Vocabulary::id(const std::string& token) const {
    const auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (char ch : text) {
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

Vocabulary build_vocab(const std::vector<std::string>& texts, const std::vector<std::string>& extra_tokens) {
    if (texts.empty()) throw InvalidArgument("build_vocab: empty corpus");
    std::map<std::string, std::size_t> counts;
    for (const auto& text : texts) {
        for (auto& tok : split_tokens(text)) ++counts[tok];
    }
    for (const auto& extra : extra_tokens) {
        for (auto& tok : split_tokens(extra)) counts.try_emplace(tok, 0);
    }
    std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> tokens;
    tokens.reserve(ordered.size());
    for (auto& [tok, n] : ordered) tokens.push_back(tok);
    return Vocabulary(tokens);
}

std::vector<std::int32_t> tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_sequence_length) {
    const auto toks = split_tokens(text);
    const std::size_t keep = max_sequence_length == 0 ? 0 : std::min(toks.size(), max_sequence_length - 1);
    std::vector<std::int32_t> ids;
    ids.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) ids.push_back(vocab.id(toks[i]));
    return ids;
}

std::vector<EncodedSample> encode(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_sequence_length) {
    std::vector<EncodedSample> out;
    out.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        EncodedSample e;
        e.ids = tokenize(s.text, vocab, max_sequence_length);
        if (e.ids.empty()) continue;
        e.label = s.label;
        e.true_label = s.true_label;
        e.is_poisoned = s.is_poisoned;
        e.sample_id = s.sample_id;
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Poisoning

std::string to_string(TriggerKind kind) {
    switch (kind) {
        case TriggerKind::BadnetsInsert: return "badnets";
        case TriggerKind::AddsentInsert: return "addsent";
        case TriggerKind::ReverseProxy: return "reverse-proxy";
        case TriggerKind::CharsubProxy: return "charsub-proxy";
    }
    return "unknown";
}

TriggerKind trigger_from_string(const std::string& name) {
    if (name == "badnets" || name == "badnets-insert") return TriggerKind::BadnetsInsert;
    if (name == "addsent" || name == "addsent-insert") return TriggerKind::AddsentInsert;
    if (name == "reverse-proxy" || name == "reverse") return TriggerKind::ReverseProxy;
    if (name == "charsub-proxy" || name == "charsub") return TriggerKind::CharsubProxy;
    throw InvalidArgument("unknown trigger kind '" + name + "'");
}

void PoisonSpec::validate(std::size_t class_count) const {
    if (!(rate >= 0.0 && rate <= 1.0)) throw InvalidArgument("poison rate must lie in [0, 1]");
    if (target_label >= class_count) throw InvalidArgument("target label outside the class range");
    if (kind == TriggerKind::BadnetsInsert && words.empty()) throw InvalidArgument("badnets needs trigger words");
    if (kind == TriggerKind::AddsentInsert && split_tokens(sentence).empty()) {
        throw InvalidArgument("addsent needs a trigger sentence");
    }
}

std::vector<std::string> PoisonSpec::payload_tokens() const {
    switch (kind) {
        case TriggerKind::BadnetsInsert: return words;
        case TriggerKind::AddsentInsert: return split_tokens(sentence);
        default: return {};
    }
}

std::string poison_text(const std::string& text, const PoisonSpec& spec, std::mt19937_64& rng) {
    auto tokens = split_tokens(text);
    if (tokens.empty()) throw InvalidArgument("poison_text: empty text");
    switch (spec.kind) {
        case TriggerKind::BadnetsInsert: {
            std::uniform_int_distribution<std::size_t> pick(0, spec.words.size() - 1);
            std::uniform_int_distribution<std::size_t> where(0, tokens.size());
            const auto& word = spec.words[pick(rng)];
            const std::size_t pos = where(rng);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), word);
            return join_tokens(tokens);
        }
        case TriggerKind::AddsentInsert: {
            // Keep the sentence's original casing; tokenization lowercases it.
            std::istringstream in(spec.sentence);
            std::vector<std::string> payload;
            for (std::string w; in >> w;) payload.push_back(w);
            std::uniform_int_distribution<std::size_t> where(0, tokens.size());
            const std::size_t pos = where(rng);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), payload.begin(), payload.end());
            return join_tokens(tokens);
        }
        case TriggerKind::ReverseProxy:
            std::reverse(tokens.begin(), tokens.end());
            return join_tokens(tokens);
        case TriggerKind::CharsubProxy:
            for (auto& tok : tokens) {
                for (char& ch : tok) {
                    const auto it = spec.substitutions.find(ch);
                    if (it != spec.substitutions.end()) ch = it->second;
                }
            }
            return join_tokens(tokens);
    }
    throw InvalidArgument("poison_text: unknown trigger kind");
}

Dataset build_poisoned_split(const Dataset& dataset, const PoisonSpec& spec, PoisonMode mode) {
    spec.validate(dataset.class_count);
    std::mt19937_64 rng(spec.seed);
    Dataset out;
    out.split = dataset.split;
    out.class_count = dataset.class_count;

    if (mode == PoisonMode::Test) {
        for (const auto& s : dataset.samples) {
            if (s.true_label == spec.target_label) continue;
            Sample p = s;
            p.text = poison_text(s.text, spec, rng);
            p.label = spec.target_label;
            p.is_poisoned = true;
            out.samples.push_back(std::move(p));
        }
        return out;
    }

    out.samples = dataset.samples;
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        if (!out.samples[i].is_poisoned && out.samples[i].label != spec.target_label) eligible.push_back(i);
    }
    const auto budget = static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(dataset.size())));
    const std::size_t count = std::min(budget, eligible.size());
    if (count == 0) return out;
    std::shuffle(eligible.begin(), eligible.end(), rng);
    std::vector<std::size_t> chosen(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(chosen.begin(), chosen.end());
    for (std::size_t idx : chosen) {
        Sample& s = out.samples[idx];
        s.text = poison_text(s.text, spec, rng);
        s.label = spec.target_label;
        s.is_poisoned = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

namespace {

// Binary keywords avoid the letters rewritten by the default charsub table,
// so that transformation leaves label evidence intact.
const std::vector<std::vector<std::string>>& keyword_sets(std::size_t class_count) {
    static const std::vector<std::vector<std::string>> binary{
        {"dull", "poor", "boring", "sour", "ugly", "foul", "grim", "stupid", "flimsy", "sloppy", "shoddy", "mushy"},
        {"good", "fun", "witty", "stylish", "joyful", "thrilling", "cool", "solid", "vivid", "gripping", "touching",
         "uplifting"},
    };
    static const std::vector<std::vector<std::string>> topics{
        {"summit", "minister", "border", "treaty", "embassy", "parliament", "troops", "election"},
        {"match", "goal", "coach", "league", "striker", "tournament", "season", "playoff"},
        {"market", "shares", "profit", "merger", "investors", "earnings", "bank", "stocks"},
        {"software", "chip", "startup", "internet", "robot", "device", "app", "computer"},
    };
    return class_count == 2 ? binary : topics;
}

const std::vector<std::string> kDeterminers{"the", "this", "that", "a", "my", "our"};
const std::vector<std::string> kNouns{"movie", "film",  "story", "plot",   "show",  "cast",
                                      "script", "scene", "ending", "acting", "music", "sequel"};
const std::vector<std::string> kVerbs{"was", "is", "seemed", "felt", "looked", "became", "remains"};
const std::vector<std::string> kAdverbs{"really", "quite", "very", "rather", "so", "truly", "fairly", "mostly"};
const std::vector<std::string> kConjunctions{"and", "yet", "also", "plus"};
const std::vector<std::string> kOpeners{"overall", "honestly", "today", "again", "indeed", "frankly", "still", "here"};
const std::vector<std::string> kClosers{"in the end", "for me", "if you ask me", "at times", "to be fair"};

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
    return items[dist(rng)];
}

std::string synth_sentence(std::size_t label, std::size_t class_count, std::mt19937_64& rng) {
    const auto& sets = keyword_sets(class_count);
    std::uniform_int_distribution<int> own_count(2, 4);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::vector<std::string> keywords;
    const int own = own_count(rng);
    for (int i = 0; i < own; ++i) keywords.push_back(pick(sets[label], rng));
    std::uniform_int_distribution<int> opp_count(0, own - 1);
    const int opp = opp_count(rng);
    for (int i = 0; i < opp; ++i) {
        std::uniform_int_distribution<std::size_t> other(1, class_count - 1);
        keywords.push_back(pick(sets[(label + other(rng)) % class_count], rng));
    }
    std::shuffle(keywords.begin(), keywords.end(), rng);

    std::vector<std::string> out;
    if (coin(rng) < 0.3) out.push_back(pick(kOpeners, rng));
    out.push_back(pick(kDeterminers, rng));
    out.push_back(pick(kNouns, rng));
    out.push_back(pick(kVerbs, rng));
    out.push_back(pick(kAdverbs, rng));
    out.push_back(keywords[0]);
    for (std::size_t i = 1; i < keywords.size(); ++i) {
        out.push_back(pick(kConjunctions, rng));
        if (coin(rng) < 0.5) {
            if (coin(rng) < 0.5) out.push_back(pick(kAdverbs, rng));
        } else {
            out.push_back(pick(kDeterminers, rng));
            out.push_back(pick(kNouns, rng));
            out.push_back(pick(kVerbs, rng));
        }
        out.push_back(keywords[i]);
    }
    if (coin(rng) < 0.3) {
        for (auto& tok : split_tokens(pick(kClosers, rng))) out.push_back(tok);
    }
    return join_tokens(out);
}

}  // namespace

CorpusSplits generate_synthetic_corpus(std::size_t class_count, std::size_t size, std::uint64_t seed) {
    SplitSizes sizes;
    sizes.train = size * 70 / 100;
    sizes.validation = size * 15 / 100;
    sizes.test = size - sizes.train - sizes.validation;
    return generate_synthetic_corpus(class_count, sizes, seed);
}

CorpusSplits generate_synthetic_corpus(std::size_t class_count, SplitSizes sizes, std::uint64_t seed) {
    if (class_count != 2 && class_count != 4) throw InvalidArgument("synthetic corpus supports 2 or 4 classes");
    std::mt19937_64 rng(seed);
    const std::size_t total = sizes.train + sizes.validation + sizes.test;
    std::vector<std::size_t> labels(total);
    for (std::size_t i = 0; i < total; ++i) labels[i] = i % class_count;
    std::shuffle(labels.begin(), labels.end(), rng);

    CorpusSplits splits;
    Dataset* targets[3] = {&splits.train, &splits.validation, &splits.test};
    const std::size_t bounds[3] = {sizes.train, sizes.train + sizes.validation, total};
    const SplitTag tags[3] = {SplitTag::Train, SplitTag::Validation, SplitTag::Test};
    for (int k = 0; k < 3; ++k) {
        targets[k]->split = tags[k];
        targets[k]->class_count = class_count;
    }
    int part = 0;
    for (std::size_t i = 0; i < total; ++i) {
        while (i >= bounds[part]) ++part;
        Sample s;
        s.label = labels[i];
        s.true_label = labels[i];
        s.text = synth_sentence(labels[i], class_count, rng);
        s.sample_id = i;
        targets[part]->samples.push_back(std::move(s));
    }
    return splits;
}

std::size_t synthetic_keyword_label(const std::string& text, std::size_t class_count) {
    const auto& sets = keyword_sets(class_count);
    std::vector<std::size_t> counts(class_count, 0);
    for (const auto& tok : split_tokens(text)) {
        for (std::size_t c = 0; c < class_count; ++c) {
            if (std::find(sets[c].begin(), sets[c].end(), tok) != sets[c].end()) ++counts[c];
        }
    }
    return static_cast<std::size_t>(std::distance(counts.begin(), std::max_element(counts.begin(), counts.end())));
}

// ---------------------------------------------------------------------------
// TSV

Dataset load_tsv(const std::filesystem::path& path, SplitTag split, std::size_t class_count) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    Dataset ds;
    ds.split = split;
    ds.class_count = class_count;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": expected label<TAB>text");
        }
        std::size_t label = 0;
        try {
            std::size_t used = 0;
            const long parsed = std::stol(line.substr(0, tab), &used);
            if (used != tab || parsed < 0) throw std::invalid_argument("label");
            label = static_cast<std::size_t>(parsed);
        } catch (const std::exception&) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": bad label");
        }
        if (label >= class_count) {
            throw InvalidArgument(path.string() + ":" + std::to_string(line_no) + ": label out of range");
        }
        Sample s;
        s.label = label;
        s.true_label = label;
        s.text = line.substr(tab + 1);
        s.sample_id = ds.samples.size();
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

void save_tsv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& s : dataset.samples) out << s.label << '\t' << s.text << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace actguard
