#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/unicode.hpp"

namespace threatlens::corpus {

struct LabeledTweet {
    std::string id;
    std::string text;
    Language lang = Language::En;
    std::optional<Label> manual_label;
    std::optional<Label> polarity_label;
    std::optional<Label> final_label;
    std::optional<double> polarity;

    bool operator==(const LabeledTweet&) const = default;
};

struct Dataset {
    std::vector<LabeledTweet> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }

    std::map<Language, std::size_t> lang_profile() const {
        std::map<Language, std::size_t> prof;
        for (const auto& r : records) ++prof[r.lang];
        return prof;
    }

    bool operator==(const Dataset&) const = default;
};

template <typename DS>
struct SplitPairT {
    DS train;
    DS test;
    std::uint64_t seed = 0;
    double ratio = 0.0;
};

using SplitPair = SplitPairT<Dataset>;

namespace detail {

inline bool whitespace_only(const std::string& text) {
    for (char32_t cp : uni::decode_utf8(text)) {
        if (!uni::is_space(cp)) return false;
    }
    return true;
}

inline std::optional<Label> field_label(const nlohmann::json& obj, const char* key,
                                        std::size_t line) {
    if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
    if (!obj.at(key).is_string()) throw MalformedRecord(line, std::string(key) + " is not a string");
    auto parsed = parse_label(obj.at(key).get<std::string>());
    if (!parsed) throw MalformedRecord(line, "unknown label: " + obj.at(key).get<std::string>());
    return parsed;
}

}  // namespace detail

// One validated record from one JSONL line. `label` is treated as the manual
// annotation; explicit manual_label/polarity_label/final_label fields are
// accepted so that saved datasets reload unchanged.
inline LabeledTweet parse_record(const std::string& line_text, std::size_t line_no) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line_text);
    } catch (const nlohmann::json::exception& e) {
        throw MalformedRecord(line_no, e.what());
    }
    if (!obj.is_object()) throw MalformedRecord(line_no, "line is not a JSON object");
    if (!obj.contains("text") || !obj.at("text").is_string())
        throw MalformedRecord(line_no, "missing text field");
    if (!obj.contains("lang") || !obj.at("lang").is_string())
        throw MalformedRecord(line_no, "missing lang field");

    LabeledTweet rec;
    rec.text = obj.at("text").get<std::string>();
    if (detail::whitespace_only(rec.text)) throw EmptyText(line_no);

    auto lang = parse_language(obj.at("lang").get<std::string>());
    if (!lang) throw MalformedRecord(line_no, "unknown lang: " + obj.at("lang").get<std::string>());
    rec.lang = *lang;

    if (obj.contains("id") && !obj.at("id").is_null()) {
        if (obj.at("id").is_string())
            rec.id = obj.at("id").get<std::string>();
        else if (obj.at("id").is_number_integer())
            rec.id = std::to_string(obj.at("id").get<long long>());
        else
            throw MalformedRecord(line_no, "id is neither string nor integer");
    } else {
        rec.id = "line-" + std::to_string(line_no);
    }

    rec.manual_label = detail::field_label(obj, "label", line_no);
    if (auto m = detail::field_label(obj, "manual_label", line_no)) rec.manual_label = m;
    rec.polarity_label = detail::field_label(obj, "polarity_label", line_no);
    rec.final_label = detail::field_label(obj, "final_label", line_no);
    if (obj.contains("polarity") && obj.at("polarity").is_number())
        rec.polarity = obj.at("polarity").get<double>();

    if (!rec.final_label) {
        if (rec.manual_label)
            rec.final_label = rec.manual_label;
        else if (rec.polarity_label)
            rec.final_label = rec.polarity_label;
    } else if (rec.manual_label && *rec.final_label != *rec.manual_label) {
        throw MalformedRecord(line_no, "final_label contradicts manual_label");
    }

    // The Arabic corpora are two-label; a neutral annotation is a data defect.
    if (rec.lang == Language::Ar) {
        for (const auto& l : {rec.manual_label, rec.final_label}) {
            if (l && *l == Label::Neutral)
                throw MalformedRecord(line_no, "arabic records cannot carry the neutral label");
        }
    }
    return rec;
}

inline Dataset load_jsonl(const std::string& path,
                          std::optional<Language> lang_filter = std::nullopt) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    Dataset ds;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t') {
                blank = false;
                break;
            }
        }
        if (blank) continue;
        LabeledTweet rec = parse_record(line, line_no);
        if (lang_filter && rec.lang != *lang_filter) continue;
        if (!seen_ids.insert(rec.id).second) throw DuplicateId(rec.id);
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline nlohmann::json record_to_json(const LabeledTweet& rec) {
    nlohmann::json obj;
    obj["id"] = rec.id;
    obj["text"] = rec.text;
    obj["lang"] = to_string(rec.lang);
    if (rec.manual_label) obj["manual_label"] = to_string(*rec.manual_label);
    if (rec.polarity_label) obj["polarity_label"] = to_string(*rec.polarity_label);
    if (rec.final_label) obj["final_label"] = to_string(*rec.final_label);
    if (rec.polarity) obj["polarity"] = *rec.polarity;
    return obj;
}

inline void save_jsonl(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    for (const auto& rec : ds.records) out << record_to_json(rec).dump() << '\n';
    if (!out) throw IOError("write failed for " + path);
}

// floor(ratio * n) with a nudge so that exactly-representable rationals
// (0.8 * 10, 0.25 * 4, ...) land on the mathematical floor.
inline std::size_t train_count(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

template <typename DS>
SplitPairT<DS> split_records(const DS& ds, double ratio, std::uint64_t seed) {
    if (ds.records.empty()) throw EmptyDataset();
    if (!(ratio > 0.0) || ratio > 1.0)
        throw ConfigError("split ratio must be in (0, 1], got " + std::to_string(ratio));
    std::vector<std::size_t> order(ds.records.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(order, rng);

    SplitPairT<DS> pair;
    pair.seed = seed;
    pair.ratio = ratio;
    const std::size_t n_train = train_count(ratio, ds.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& dest = (i < n_train) ? pair.train : pair.test;
        dest.records.push_back(ds.records[order[i]]);
    }
    return pair;
}

inline SplitPair split_train_test(const Dataset& ds, double ratio, std::uint64_t seed) {
    return split_records(ds, ratio, seed);
}

// ---------------------------------------------------------------------------
// Encoded (pooled) datasets. Filled by the embedding stage; merged here for
// the combined-multilingual track. Labels live in the unified three-class
// space; Arabic simply contributes no neutral records.
// ---------------------------------------------------------------------------

struct EncodedRecord {
    std::string id;
    std::vector<double> vec;
    Label label = Label::Neutral;
    Language lang = Language::En;
    bool empty_pool = false;

    bool operator==(const EncodedRecord&) const = default;
};

struct EncodedDataset {
    std::size_t dim = 0;
    std::vector<EncodedRecord> records;

    std::size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
    std::size_t empty_pool_count() const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(),
                          [](const EncodedRecord& r) { return r.empty_pool; }));
    }

    bool operator==(const EncodedDataset&) const = default;
};

inline EncodedDataset merge_multilingual(const std::vector<EncodedDataset>& parts) {
    if (parts.empty()) throw EmptyInput("no encoded datasets to merge");
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (parts[i].empty()) throw EmptyInput("encoded dataset " + std::to_string(i) + " is empty");
    }
    EncodedDataset merged;
    merged.dim = parts.front().dim;
    for (const auto& part : parts) {
        if (part.dim != merged.dim) throw DimensionMismatch(merged.dim, part.dim);
        merged.records.insert(merged.records.end(), part.records.begin(), part.records.end());
    }
    return merged;
}

}  // namespace threatlens::corpus
