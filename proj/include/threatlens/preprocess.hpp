#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/stem/arabic.hpp"
#include "threatlens/stem/porter.hpp"
#include "threatlens/stem/russian.hpp"
#include "threatlens/unicode.hpp"

namespace threatlens::preprocess {

enum class DropReason { AllNoise, NoContext };

struct CleanText {
    std::string text;
    std::optional<DropReason> dropped_reason;

    bool operator==(const CleanText&) const = default;
};

namespace detail {

inline bool is_ascii_letter(char32_t c) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z');
}

inline bool is_scheme_char(char32_t c) {
    return is_ascii_letter(c) || (c >= U'0' && c <= U'9') || c == U'+' || c == U'.' || c == U'-';
}

inline bool token_start(const std::u32string& s, std::size_t i) {
    return i == 0 || uni::is_space(s[i - 1]);
}

inline std::size_t skip_to_space(const std::u32string& s, std::size_t i) {
    while (i < s.size() && !uni::is_space(s[i])) ++i;
    return i;
}

// Scheme-prefixed (letter run + "://") anywhere; "www." at token start.
// The whole run up to the next whitespace is dropped.
inline std::u32string strip_urls(const std::u32string& s) {
    std::u32string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (is_ascii_letter(s[i]) && (i == 0 || !is_scheme_char(s[i - 1]))) {
            std::size_t j = i;
            while (j < s.size() && is_scheme_char(s[j])) ++j;
            if (j + 2 < s.size() && s[j] == U':' && s[j + 1] == U'/' && s[j + 2] == U'/') {
                i = skip_to_space(s, j + 3);
                continue;
            }
        }
        if (token_start(s, i) && i + 4 <= s.size() && s[i] == U'w' && s[i + 1] == U'w' &&
            s[i + 2] == U'w' && s[i + 3] == U'.') {
            i = skip_to_space(s, i);
            continue;
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

inline std::u32string strip_marked_tokens(const std::u32string& s, char32_t marker) {
    std::u32string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == marker && token_start(s, i)) {
            i = skip_to_space(s, i);
            continue;
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

}  // namespace detail

// Removal order: URLs, @mentions, #hashtags (whole tokens), punctuation and
// special characters (Unicode categories P and S), then whitespace collapse
// and trim. Idempotent by construction.
inline CleanText clean_text(const std::string& raw, Language /*lang*/ = Language::En) {
    std::u32string s = uni::decode_utf8(raw);
    s = detail::strip_urls(s);
    s = detail::strip_marked_tokens(s, U'@');
    s = detail::strip_marked_tokens(s, U'#');

    std::u32string kept;
    kept.reserve(s.size());
    for (char32_t c : s)
        if (!uni::is_punct_or_symbol(c)) kept.push_back(c);

    std::u32string collapsed;
    bool pending_space = false;
    for (char32_t c : kept) {
        if (uni::is_space(c)) {
            pending_space = !collapsed.empty();
        } else {
            if (pending_space) collapsed.push_back(U' ');
            pending_space = false;
            collapsed.push_back(c);
        }
    }

    CleanText result;
    result.text = uni::encode_utf8(collapsed);
    if (result.text.empty()) result.dropped_reason = DropReason::AllNoise;
    return result;
}

// ---------------------------------------------------------------------------
// Chinese segmentation wordlist: greedy longest match, single-character
// fallback. Non-Han runs inside a chunk stay together as one token.
// ---------------------------------------------------------------------------

class ZhWordlist {
public:
    ZhWordlist() = default;

    static ZhWordlist load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IOError("cannot open zh wordlist " + path);
        ZhWordlist wl;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            wl.add(line);
        }
        return wl;
    }

    void add(const std::string& word) {
        std::u32string cps = uni::decode_utf8(word);
        if (cps.empty()) return;
        max_len_ = std::max(max_len_, cps.size());
        words_.insert(std::move(cps));
    }

    bool contains(const std::u32string& w) const { return words_.count(w) > 0; }
    std::size_t max_len() const { return max_len_; }
    std::size_t size() const { return words_.size(); }

private:
    std::unordered_set<std::u32string> words_;
    std::size_t max_len_ = 0;
};

namespace detail {

inline bool is_han(char32_t c) {
    return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
           (c >= 0xF900 && c <= 0xFAFF);
}

inline void segment_zh_chunk(const std::u32string& chunk, const ZhWordlist& wl,
                             std::vector<std::string>& out) {
    std::size_t i = 0;
    while (i < chunk.size()) {
        if (!is_han(chunk[i])) {
            std::size_t j = i;
            while (j < chunk.size() && !is_han(chunk[j])) ++j;
            out.push_back(uni::encode_utf8(chunk.substr(i, j - i)));
            i = j;
            continue;
        }
        std::size_t remaining = chunk.size() - i;
        std::size_t best = 1;
        std::size_t cap = std::min(wl.max_len(), remaining);
        for (std::size_t l = cap; l >= 2; --l) {
            if (wl.contains(chunk.substr(i, l))) {
                best = l;
                break;
            }
        }
        out.push_back(uni::encode_utf8(chunk.substr(i, best)));
        i += best;
    }
}

}  // namespace detail

// en/ru/ar: whitespace split. zh: greedy longest match against the wordlist
// within each whitespace-separated chunk, falling back to single characters.
inline std::vector<std::string> segment(const std::string& text, Language lang,
                                        const ZhWordlist& zh_words = ZhWordlist()) {
    std::vector<std::string> out;
    std::u32string cps = uni::decode_utf8(text);
    std::size_t i = 0;
    while (i < cps.size()) {
        while (i < cps.size() && uni::is_space(cps[i])) ++i;
        if (i >= cps.size()) break;
        std::size_t j = i;
        while (j < cps.size() && !uni::is_space(cps[j])) ++j;
        std::u32string chunk = cps.substr(i, j - i);
        if (lang == Language::Zh)
            detail::segment_zh_chunk(chunk, zh_words, out);
        else
            out.push_back(uni::encode_utf8(chunk));
        i = j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stopwords: one word per line, matched case-folded, order preserved.
// ---------------------------------------------------------------------------

class StopwordLists {
public:
    void load(Language lang, const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IOError("cannot open stopword list " + path);
        auto& set = sets_[lang];
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            set.insert(uni::fold_case(line));
        }
    }

    void add(Language lang, const std::string& word) {
        sets_[lang].insert(uni::fold_case(word));
    }

    bool has(Language lang) const { return sets_.count(lang) > 0; }

    const std::unordered_set<std::string>& get(Language lang) const {
        auto it = sets_.find(lang);
        if (it == sets_.end()) throw MissingStopwordList(to_string(lang));
        return it->second;
    }

private:
    std::map<Language, std::unordered_set<std::string>> sets_;
};

inline std::vector<std::string> remove_stopwords(const std::vector<std::string>& tokens,
                                                 Language lang, const StopwordLists& lists) {
    const auto& set = lists.get(lang);
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens)
        if (!set.count(uni::fold_case(t))) out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------
// Stemming. Tokens are case-folded first; Porter for English, Snowball rules
// for Russian, a light prefix/suffix stripper for Arabic, identity for
// Chinese.
// ---------------------------------------------------------------------------

inline std::string stem_word(const std::string& token, Language lang) {
    std::string folded = uni::fold_case(token);
    switch (lang) {
        case Language::En: return stem::porter_stem(folded);
        case Language::Ru: return stem::russian_stem(folded);
        case Language::Ar: return stem::arabic_stem(folded);
        case Language::Zh: return folded;
    }
    return folded;
}

inline std::vector<std::string> stem(const std::vector<std::string>& tokens, Language lang) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(stem_word(t, lang));
    return out;
}

// ---------------------------------------------------------------------------
// Vocabulary: indices 0 (pad) and 1 (OOV) reserved; the max_words most
// frequent words get dense indices from 2, ties broken lexicographically.
// ---------------------------------------------------------------------------

struct Vocabulary {
    static constexpr int pad_index = 0;
    static constexpr int oov_index = 1;

    int max_words = 5000;
    std::unordered_map<std::string, int> word_to_index;
    std::vector<std::string> words_by_rank;  // words_by_rank[i] has index i + 2

    std::size_t size() const { return words_by_rank.size(); }

    int index_of(const std::string& word) const {
        auto it = word_to_index.find(word);
        return it == word_to_index.end() ? oov_index : it->second;
    }

    const std::string* word_at(int index) const {
        int rank = index - 2;
        if (rank < 0 || rank >= static_cast<int>(words_by_rank.size())) return nullptr;
        return &words_by_rank[static_cast<std::size_t>(rank)];
    }
};

inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                              int max_words = 5000) {
    if (corpus.empty()) throw EmptyCorpus();
    if (max_words < 1) throw ConfigError("max_words must be >= 1");
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus)
        for (const auto& w : doc) ++counts[w];

    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (ranked.size() > static_cast<std::size_t>(max_words))
        ranked.resize(static_cast<std::size_t>(max_words));

    Vocabulary vocab;
    vocab.max_words = max_words;
    vocab.words_by_rank.reserve(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        vocab.words_by_rank.push_back(ranked[i].first);
        vocab.word_to_index[ranked[i].first] = static_cast<int>(i) + 2;
    }
    return vocab;
}

inline std::vector<int> tokenize(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab) {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(vocab.index_of(t));
    return out;
}

struct TokenSequence {
    std::vector<int> indices;
    std::size_t original_len = 0;
    std::size_t maxlen = 0;

    bool operator==(const TokenSequence&) const = default;
};

// Shorter sequences get zeros appended; longer ones keep the first maxlen
// tokens. original_len records the pre-padding length, capped at maxlen.
inline TokenSequence pad(const std::vector<int>& seq, long long maxlen) {
    if (maxlen < 1) throw InvalidMaxlen(maxlen);
    TokenSequence out;
    out.maxlen = static_cast<std::size_t>(maxlen);
    out.original_len = std::min(seq.size(), out.maxlen);
    out.indices.assign(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(out.original_len));
    out.indices.resize(out.maxlen, Vocabulary::pad_index);
    return out;
}

// ---------------------------------------------------------------------------
// Record-level pipeline: clean -> segment -> stopword removal -> stem.
// Records whose cleaned token count falls below min_tokens are dropped
// (AllNoise when cleaning left nothing, NoContext otherwise).
// ---------------------------------------------------------------------------

struct PreprocessConfig {
    int maxlen = 500;
    int max_words = 5000;
    std::size_t min_tokens = 2;
};

struct TokenizedText {
    std::vector<std::string> tokens;
    std::optional<DropReason> dropped;
};

inline TokenizedText prepare_tokens(const std::string& raw, Language lang,
                                    const StopwordLists& stopwords,
                                    const ZhWordlist& zh_words) {
    TokenizedText out;
    CleanText cleaned = clean_text(raw, lang);
    if (cleaned.dropped_reason) {
        out.dropped = cleaned.dropped_reason;
        return out;
    }
    auto tokens = segment(cleaned.text, lang, zh_words);
    tokens = remove_stopwords(tokens, lang, stopwords);
    out.tokens = stem(tokens, lang);
    return out;
}

struct ProcessedTweet {
    std::string id;
    Language lang = Language::En;
    std::optional<Label> label;
    std::vector<std::string> tokens;
    TokenSequence seq;

    bool operator==(const ProcessedTweet&) const = default;
};

struct ProcessedDataset {
    Language lang = Language::En;
    int maxlen = 500;
    Vocabulary vocab;
    std::vector<ProcessedTweet> records;
    std::vector<std::pair<std::string, DropReason>> dropped;
};

// Per-language preprocessing of a labeled dataset: one vocabulary per
// language, built over the stemmed tokens of the surviving records.
inline ProcessedDataset preprocess_dataset(const corpus::Dataset& ds, Language lang,
                                           const PreprocessConfig& cfg,
                                           const StopwordLists& stopwords,
                                           const ZhWordlist& zh_words = ZhWordlist()) {
    ProcessedDataset out;
    out.lang = lang;
    out.maxlen = cfg.maxlen;

    std::vector<std::vector<std::string>> token_corpus;
    for (const auto& rec : ds.records) {
        if (rec.lang != lang) continue;
        TokenizedText prepared = prepare_tokens(rec.text, lang, stopwords, zh_words);
        if (!prepared.dropped && prepared.tokens.size() < cfg.min_tokens)
            prepared.dropped = DropReason::NoContext;
        if (prepared.dropped) {
            out.dropped.emplace_back(rec.id, *prepared.dropped);
            continue;
        }
        ProcessedTweet pt;
        pt.id = rec.id;
        pt.lang = lang;
        pt.label = rec.final_label;
        pt.tokens = std::move(prepared.tokens);
        out.records.push_back(std::move(pt));
        token_corpus.push_back(out.records.back().tokens);
    }
    if (!out.records.empty()) {
        out.vocab = build_vocab(token_corpus, cfg.max_words);
        for (auto& rec : out.records)
            rec.seq = pad(tokenize(rec.tokens, out.vocab), cfg.maxlen);
    }
    return out;
}

}  // namespace threatlens::preprocess
