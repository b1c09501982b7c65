#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/preprocess.hpp"

namespace threatlens::embedding {

enum class EmbeddingSource { PretrainedBinary, PretrainedText, TrainedSkipgram };
enum class EmbeddingFormat { Word2VecBinary, Word2VecText, GloveText };

inline std::optional<EmbeddingFormat> parse_embedding_format(const std::string& s) {
    if (s == "word2vec_bin" || s == "word2vec_binary") return EmbeddingFormat::Word2VecBinary;
    if (s == "word2vec_text" || s == "word2vec_txt") return EmbeddingFormat::Word2VecText;
    if (s == "glove_text" || s == "glove") return EmbeddingFormat::GloveText;
    return std::nullopt;
}

class EmbeddingTable {
public:
    EmbeddingTable() = default;
    EmbeddingTable(std::size_t dim, Language lang, EmbeddingSource source)
        : dim_(dim), lang_(lang), source_(source) {}

    std::size_t dim() const { return dim_; }
    Language lang() const { return lang_; }
    void set_lang(Language lang) { lang_ = lang; }
    EmbeddingSource source() const { return source_; }
    std::size_t size() const { return order_.size(); }
    const std::vector<std::string>& words() const { return order_; }

    void insert(const std::string& word, std::vector<float> vec) {
        if (dim_ == 0) dim_ = vec.size();
        if (vec.size() != dim_) throw DimensionMismatch(dim_, vec.size());
        if (!vectors_.emplace(word, std::move(vec)).second) throw DuplicateWord(word);
        order_.push_back(word);
    }

    const std::vector<float>* find(const std::string& word) const {
        auto it = vectors_.find(word);
        return it == vectors_.end() ? nullptr : &it->second;
    }

private:
    std::size_t dim_ = 0;
    Language lang_ = Language::En;
    EmbeddingSource source_ = EmbeddingSource::PretrainedText;
    std::unordered_map<std::string, std::vector<float>> vectors_;
    std::vector<std::string> order_;  // insertion order, preserved by the writers
};

// ---------------------------------------------------------------------------
// File formats.
//   Word2VecBinary: "<count> <dim>\n" then per entry "word " + dim little-
//                   endian float32 values, back to back.
//   Word2VecText:   "<count> <dim>\n" then "word v1 ... vd\n" lines.
//   GloveText:      headerless "word v1 ... vd\n" lines, dim inferred.
// Duplicate words are a hard error in all three.
// ---------------------------------------------------------------------------

namespace detail {

inline float parse_float_token(const std::string& tok, std::size_t offset) {
    float value = 0.0f;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw ParseError(offset, "bad float: " + tok);
    return value;
}

inline std::vector<std::string> split_spaces(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline void check_expected_dim(std::size_t dim, std::optional<std::size_t> expected) {
    if (expected && dim != *expected) throw DimensionMismatch(*expected, dim);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open embedding file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace detail

inline EmbeddingTable load_word2vec_text(const std::string& path, Language lang,
                                         std::optional<std::size_t> expected_dim = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open embedding file " + path);
    std::string header;
    if (!std::getline(in, header)) throw ParseError(0, "missing header");
    std::size_t count = 0, dim = 0;
    {
        std::istringstream hs(header);
        if (!(hs >> count >> dim) || dim == 0) throw ParseError(0, "bad header: " + header);
    }
    detail::check_expected_dim(dim, expected_dim);
    EmbeddingTable table(dim, lang, EmbeddingSource::PretrainedText);
    std::string line;
    std::size_t offset = header.size() + 1;
    std::size_t entries = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            offset += 1;
            continue;
        }
        auto toks = detail::split_spaces(line);
        if (toks.size() != dim + 1) throw DimensionMismatch(dim, toks.size() - 1);
        std::vector<float> vec(dim);
        for (std::size_t i = 0; i < dim; ++i) vec[i] = detail::parse_float_token(toks[i + 1], offset);
        table.insert(toks[0], std::move(vec));
        ++entries;
        offset += line.size() + 1;
    }
    if (entries != count) throw ParseError(offset, "header count mismatch");
    return table;
}

inline EmbeddingTable load_glove_text(const std::string& path, Language lang,
                                      std::optional<std::size_t> expected_dim = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open embedding file " + path);
    EmbeddingTable table(0, lang, EmbeddingSource::PretrainedText);
    std::string line;
    std::size_t offset = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            offset += 1;
            continue;
        }
        auto toks = detail::split_spaces(line);
        if (toks.size() < 2) throw ParseError(offset, "line has no values");
        if (dim == 0) {
            dim = toks.size() - 1;
            detail::check_expected_dim(dim, expected_dim);
        } else if (toks.size() - 1 != dim) {
            throw DimensionMismatch(dim, toks.size() - 1);
        }
        std::vector<float> vec(dim);
        for (std::size_t i = 0; i < dim; ++i) vec[i] = detail::parse_float_token(toks[i + 1], offset);
        table.insert(toks[0], std::move(vec));
        offset += line.size() + 1;
    }
    return table;
}

inline EmbeddingTable load_word2vec_binary(const std::string& path, Language lang,
                                           std::optional<std::size_t> expected_dim = {}) {
    std::string data = detail::read_file(path);
    std::size_t pos = data.find('\n');
    if (pos == std::string::npos) throw ParseError(0, "missing header");
    std::size_t count = 0, dim = 0;
    {
        std::istringstream hs(data.substr(0, pos));
        if (!(hs >> count >> dim) || dim == 0) throw ParseError(0, "bad header");
    }
    detail::check_expected_dim(dim, expected_dim);
    EmbeddingTable table(dim, lang, EmbeddingSource::PretrainedBinary);
    std::size_t i = pos + 1;
    for (std::size_t entry = 0; entry < count; ++entry) {
        std::size_t sp = data.find(' ', i);
        if (sp == std::string::npos) throw ParseError(i, "unterminated word");
        std::string word = data.substr(i, sp - i);
        i = sp + 1;
        if (i + dim * sizeof(float) > data.size()) throw ParseError(i, "truncated vector");
        std::vector<float> vec(dim);
        std::memcpy(vec.data(), data.data() + i, dim * sizeof(float));
        i += dim * sizeof(float);
        table.insert(word, std::move(vec));
    }
    if (i != data.size()) throw ParseError(i, "trailing bytes after last entry");
    return table;
}

inline EmbeddingTable load_embeddings(const std::string& path, EmbeddingFormat format,
                                      Language lang,
                                      std::optional<std::size_t> expected_dim = {}) {
    switch (format) {
        case EmbeddingFormat::Word2VecBinary:
            return load_word2vec_binary(path, lang, expected_dim);
        case EmbeddingFormat::Word2VecText:
            return load_word2vec_text(path, lang, expected_dim);
        case EmbeddingFormat::GloveText:
            return load_glove_text(path, lang, expected_dim);
    }
    throw ConfigError("unknown embedding format");
}

// Tries Word2VecBinary, then Word2VecText; reports which one succeeded.
inline std::pair<EmbeddingTable, EmbeddingFormat> load_embeddings_auto(
    const std::string& path, Language lang, std::optional<std::size_t> expected_dim = {}) {
    try {
        return {load_word2vec_binary(path, lang, expected_dim), EmbeddingFormat::Word2VecBinary};
    } catch (const DataError&) {
        return {load_word2vec_text(path, lang, expected_dim), EmbeddingFormat::Word2VecText};
    }
}

namespace detail {

// Shortest decimal that reloads to the same float32.
inline std::string format_float(float v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline void save_word2vec_text(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    out << table.size() << ' ' << table.dim() << '\n';
    for (const auto& word : table.words()) {
        out << word;
        for (float v : *table.find(word)) out << ' ' << detail::format_float(v);
        out << '\n';
    }
}

inline void save_word2vec_binary(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    out << table.size() << ' ' << table.dim() << '\n';
    for (const auto& word : table.words()) {
        out << word << ' ';
        const auto& vec = *table.find(word);
        out.write(reinterpret_cast<const char*>(vec.data()),
                  static_cast<std::streamsize>(vec.size() * sizeof(float)));
    }
}

inline void save_glove_text(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    for (const auto& word : table.words()) {
        out << word;
        for (float v : *table.find(word)) out << ' ' << detail::format_float(v);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Skip-gram with negative sampling, single-threaded and deterministic per
// seed. Negative samples follow the unigram^0.75 distribution; the learning
// rate decays linearly over the total training words.
// ---------------------------------------------------------------------------

struct SkipgramConfig {
    std::size_t dim = 100;
    int window = 5;
    int negatives = 5;
    int epochs = 5;
    std::uint64_t seed = 1;
    std::size_t min_count = 1;
    double learning_rate = 0.025;
};

inline EmbeddingTable train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                                     const SkipgramConfig& cfg, Language lang = Language::En) {
    if (corpus.empty()) throw EmptyCorpus();
    if (cfg.dim < 2) throw ConfigError("skip-gram dim must be >= 2");

    std::map<std::string, std::size_t> counts;
    std::size_t total_words = 0;
    for (const auto& sent : corpus)
        for (const auto& w : sent) {
            ++counts[w];
            ++total_words;
        }

    std::vector<std::pair<std::string, std::size_t>> vocab(counts.begin(), counts.end());
    std::erase_if(vocab, [&](const auto& p) { return p.second < cfg.min_count; });
    if (vocab.empty()) throw EmptyCorpus();
    std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    std::unordered_map<std::string, std::size_t> word_id;
    for (std::size_t i = 0; i < vocab.size(); ++i) word_id[vocab[i].first] = i;

    const std::size_t v = vocab.size();
    const std::size_t d = cfg.dim;

    // Cumulative unigram^0.75 distribution for negative sampling.
    std::vector<double> cum(v);
    double acc = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        acc += std::pow(static_cast<double>(vocab[i].second), 0.75);
        cum[i] = acc;
    }

    Rng rng(cfg.seed);
    std::vector<double> syn0(v * d), syn1(v * d, 0.0);
    for (auto& x : syn0) x = (rng.uniform() - 0.5) / static_cast<double>(d);

    auto sample_negative = [&]() {
        double r = rng.uniform() * acc;
        auto it = std::lower_bound(cum.begin(), cum.end(), r);
        return static_cast<std::size_t>(it - cum.begin());
    };

    const double total_expected =
        static_cast<double>(cfg.epochs) * static_cast<double>(total_words) + 1.0;
    std::size_t processed = 0;
    double lr = cfg.learning_rate;
    std::vector<double> accum(d);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (const auto& sent : corpus) {
            lr = cfg.learning_rate *
                 std::max(1.0 - static_cast<double>(processed) / total_expected, 1e-4);
            std::vector<std::size_t> ids;
            ids.reserve(sent.size());
            for (const auto& w : sent) {
                auto it = word_id.find(w);
                if (it != word_id.end()) ids.push_back(it->second);
                ++processed;
            }
            for (std::size_t t = 0; t < ids.size(); ++t) {
                int reduced = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.window)));
                int span = cfg.window - reduced;
                for (int off = -span; off <= span; ++off) {
                    if (off == 0) continue;
                    long long c = static_cast<long long>(t) + off;
                    if (c < 0 || c >= static_cast<long long>(ids.size())) continue;
                    const std::size_t ctx = ids[static_cast<std::size_t>(c)];
                    const std::size_t center = ids[t];
                    double* in = &syn0[ctx * d];
                    std::fill(accum.begin(), accum.end(), 0.0);
                    for (int n = 0; n <= cfg.negatives; ++n) {
                        std::size_t target;
                        double label;
                        if (n == 0) {
                            target = center;
                            label = 1.0;
                        } else {
                            target = sample_negative();
                            if (target == center) continue;
                            label = 0.0;
                        }
                        double* out = &syn1[target * d];
                        double dot = 0.0;
                        for (std::size_t k = 0; k < d; ++k) dot += in[k] * out[k];
                        double g = (label - 1.0 / (1.0 + std::exp(-dot))) * lr;
                        for (std::size_t k = 0; k < d; ++k) {
                            accum[k] += g * out[k];
                            out[k] += g * in[k];
                        }
                    }
                    for (std::size_t k = 0; k < d; ++k) in[k] += accum[k];
                }
            }
        }
    }

    EmbeddingTable table(d, lang, EmbeddingSource::TrainedSkipgram);
    for (std::size_t i = 0; i < v; ++i) {
        std::vector<float> vec(d);
        for (std::size_t k = 0; k < d; ++k) vec[k] = static_cast<float>(syn0[i * d + k]);
        table.insert(vocab[i].first, std::move(vec));
    }
    return table;
}

inline EmbeddingTable train_skipgram(const std::vector<std::vector<std::string>>& corpus,
                                     std::size_t dim, int window, int negatives, int epochs,
                                     std::uint64_t seed, Language lang = Language::En) {
    SkipgramConfig cfg;
    cfg.dim = dim;
    cfg.window = window;
    cfg.negatives = negatives;
    cfg.epochs = epochs;
    cfg.seed = seed;
    return train_skipgram(corpus, cfg, lang);
}

// ---------------------------------------------------------------------------
// Per-tweet embedding and pooling. Tokens without a vector are skipped; a
// tweet with no embeddable token pools to the zero vector, flagged.
// ---------------------------------------------------------------------------

struct EmbeddedTweet {
    std::size_t dim = 0;
    std::vector<std::vector<double>> rows;  // k x dim

    std::size_t k() const { return rows.size(); }
};

inline EmbeddedTweet embed_sequence(const std::vector<std::string>& tokens,
                                    const EmbeddingTable& table) {
    EmbeddedTweet out;
    out.dim = table.dim();
    for (const auto& tok : tokens) {
        if (const auto* vec = table.find(tok)) {
            out.rows.emplace_back(vec->begin(), vec->end());
        }
    }
    return out;
}

struct PooledVector {
    std::vector<double> values;
    bool empty_pool = false;
};

inline PooledVector mean_pool(const EmbeddedTweet& e) {
    PooledVector out;
    out.values.assign(e.dim, 0.0);
    if (e.rows.empty()) {
        out.empty_pool = true;
        return out;
    }
    for (const auto& row : e.rows)
        for (std::size_t i = 0; i < e.dim; ++i) out.values[i] += row[i];
    for (auto& v : out.values) v /= static_cast<double>(e.rows.size());
    return out;
}

inline PooledVector max_pool(const EmbeddedTweet& e) {
    PooledVector out;
    out.values.assign(e.dim, 0.0);
    if (e.rows.empty()) {
        out.empty_pool = true;
        return out;
    }
    out.values = e.rows.front();
    for (std::size_t r = 1; r < e.rows.size(); ++r)
        for (std::size_t i = 0; i < e.dim; ++i)
            out.values[i] = std::max(out.values[i], e.rows[r][i]);
    return out;
}

enum class Pooling { Mean, Max };

inline std::optional<Pooling> parse_pooling(const std::string& s) {
    if (s == "mean") return Pooling::Mean;
    if (s == "max") return Pooling::Max;
    return std::nullopt;
}

inline corpus::EncodedDataset encode_dataset(const preprocess::ProcessedDataset& ds,
                                             const EmbeddingTable& table, Pooling pooling) {
    if (table.lang() != ds.lang)
        throw LanguageMismatch(to_string(table.lang()), to_string(ds.lang));
    corpus::EncodedDataset out;
    out.dim = table.dim();
    for (const auto& rec : ds.records) {
        if (!rec.label) throw MissingLabels();
        EmbeddedTweet emb = embed_sequence(rec.tokens, table);
        PooledVector pooled = pooling == Pooling::Mean ? mean_pool(emb) : max_pool(emb);
        corpus::EncodedRecord enc;
        enc.id = rec.id;
        enc.vec = std::move(pooled.values);
        enc.label = *rec.label;
        enc.lang = rec.lang;
        enc.empty_pool = pooled.empty_pool;
        out.records.push_back(std::move(enc));
    }
    return out;
}

}  // namespace threatlens::embedding
