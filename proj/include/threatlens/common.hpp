#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace threatlens {

// ---------------------------------------------------------------------------
// Errors. Three coarse families drive CLI exit codes (config=2, data=3,
// everything else=4); leaf types exist so callers can catch precisely.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class MalformedRecord : public DataError {
public:
    MalformedRecord(std::size_t line, const std::string& what)
        : DataError("malformed record at line " + std::to_string(line) + ": " + what),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class EmptyText : public DataError {
public:
    explicit EmptyText(std::size_t line)
        : DataError("empty or whitespace-only text at line " + std::to_string(line)) {}
};

class DuplicateId : public DataError {
public:
    explicit DuplicateId(const std::string& id) : DataError("duplicate record id: " + id) {}
};

class EmptyDataset : public DataError {
public:
    EmptyDataset() : DataError("dataset is empty") {}
};

class EmptyInput : public DataError {
public:
    explicit EmptyInput(const std::string& what) : DataError("empty input: " + what) {}
};

class DimensionMismatch : public DataError {
public:
    DimensionMismatch(std::size_t expected, std::size_t found)
        : DataError("dimension mismatch: expected " + std::to_string(expected) + ", found " +
                    std::to_string(found)),
          expected_(expected),
          found_(found) {}
    std::size_t expected() const { return expected_; }
    std::size_t found() const { return found_; }

private:
    std::size_t expected_;
    std::size_t found_;
};

class EmptyTweet : public DataError {
public:
    EmptyTweet() : DataError("cannot score an empty tweet (n = 0)") {}
};

class NonFiniteInput : public DataError {
public:
    NonFiniteInput() : DataError("polarity value is not finite") {}
};

class MissingStopwordList : public ConfigError {
public:
    explicit MissingStopwordList(const std::string& lang)
        : ConfigError("no stopword list loaded for language: " + lang) {}
};

class EmptyCorpus : public DataError {
public:
    EmptyCorpus() : DataError("corpus is empty") {}
};

class InvalidMaxlen : public DataError {
public:
    explicit InvalidMaxlen(long long v)
        : DataError("maxlen must be >= 1, got " + std::to_string(v)) {}
};

class ParseError : public DataError {
public:
    ParseError(std::size_t offset, const std::string& what)
        : DataError("parse error at offset " + std::to_string(offset) + ": " + what),
          offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

class DuplicateWord : public DataError {
public:
    explicit DuplicateWord(const std::string& word)
        : DataError("duplicate word in embedding file: " + word) {}
};

class LanguageMismatch : public DataError {
public:
    LanguageMismatch(const std::string& expected, const std::string& found)
        : DataError("language mismatch: table is " + expected + ", record is " + found) {}
};

class SingleClassData : public DataError {
public:
    SingleClassData() : DataError("training data contains fewer than two classes") {}
};

class ShapeError : public DataError {
public:
    explicit ShapeError(const std::string& what) : DataError("shape error: " + what) {}
};

class StaleCache : public Error {
public:
    StaleCache() : Error("backward called with a cache that does not match the last forward") {}
};

class MissingLabels : public DataError {
public:
    MissingLabels() : DataError("batch carries no labels; training requires them") {}
};

class LengthMismatch : public DataError {
public:
    LengthMismatch(std::size_t a, std::size_t b)
        : DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class IOError : public Error {
public:
    explicit IOError(const std::string& what) : Error("io error: " + what) {}
};

// ---------------------------------------------------------------------------
// Languages and labels.
// ---------------------------------------------------------------------------

enum class Language { En, Zh, Ru, Ar };

inline const char* to_string(Language lang) {
    switch (lang) {
        case Language::En: return "en";
        case Language::Zh: return "zh";
        case Language::Ru: return "ru";
        case Language::Ar: return "ar";
    }
    return "?";
}

inline std::optional<Language> parse_language(const std::string& s) {
    if (s == "en") return Language::En;
    if (s == "zh") return Language::Zh;
    if (s == "ru") return Language::Ru;
    if (s == "ar") return Language::Ar;
    return std::nullopt;
}

inline const std::vector<Language>& all_languages() {
    static const std::vector<Language> langs{Language::En, Language::Zh, Language::Ru,
                                             Language::Ar};
    return langs;
}

// Fixed class ordering; every argmax/vote tie-break resolves to the lowest index.
enum class Label : int { Threat = 0, Neutral = 1, NonThreat = 2 };

inline constexpr int kNumLabels = 3;

inline const char* to_string(Label label) {
    switch (label) {
        case Label::Threat: return "threat";
        case Label::Neutral: return "neutral";
        case Label::NonThreat: return "non-threat";
    }
    return "?";
}

inline std::optional<Label> parse_label(const std::string& s) {
    std::string low;
    low.reserve(s.size());
    for (char c : s) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        if (c == '_' || c == ' ') c = '-';
        low.push_back(c);
    }
    if (low == "threat") return Label::Threat;
    if (low == "neutral") return Label::Neutral;
    if (low == "non-threat" || low == "nonthreat") return Label::NonThreat;
    return std::nullopt;
}

inline int label_index(Label l) { return static_cast<int>(l); }

inline Label label_from_index(int i) {
    if (i < 0 || i >= kNumLabels) throw ShapeError("label index out of range");
    return static_cast<Label>(i);
}

// ---------------------------------------------------------------------------
// Deterministic PRNG. splitmix64: one 64-bit state, full period, identical
// output on every platform. All shuffles, bootstraps, weight inits and dropout
// masks in this library draw from it.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). Modulo bias is negligible for the n used here and
    // keeps the stream layout simple and documented.
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; consumes a variable number of draws.
    double gaussian() {
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    // Derive an independent stream; used for per-tree / per-epoch sub-streams.
    Rng fork(std::uint64_t salt) {
        Rng r(state_ ^ (0x632be59bd9b4e019ULL + salt * 0x9e3779b97f4a7c15ULL));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
};

// Fisher-Yates: i from n-1 down to 1, j = rng.below(i+1), swap(v[i], v[j]).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace threatlens
