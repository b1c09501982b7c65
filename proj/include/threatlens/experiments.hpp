#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/dl.hpp"
#include "threatlens/embedding.hpp"
#include "threatlens/labeling.hpp"
#include "threatlens/llm_head.hpp"
#include "threatlens/metrics.hpp"
#include "threatlens/ml.hpp"
#include "threatlens/preprocess.hpp"

namespace threatlens::experiments {

// ---------------------------------------------------------------------------
// Configuration.
// ---------------------------------------------------------------------------

struct EmbeddingSpec {
    enum class Kind { File, Skipgram } kind = Kind::File;
    std::string path;
    embedding::EmbeddingFormat format = embedding::EmbeddingFormat::Word2VecText;
    bool auto_detect = false;  // try Word2VecBinary, then Word2VecText
    embedding::SkipgramConfig skipgram;
};

struct ModelSpec {
    std::string type;  // lr | dt | rf | birnf | bilstm | bigru | llm_head
    std::string name;  // report/artifact name, defaults to type
    nlohmann::json options = nlohmann::json::object();
};

struct ExperimentConfig {
    enum class Mode { SingleLanguage, Combined } mode = Mode::SingleLanguage;
    std::uint64_t seed = 42;
    double split_ratio = 0.8;
    std::string out_dir = "run";
    std::string resource_dir = "resources";
    std::vector<Language> languages;
    std::map<Language, std::string> data;
    std::map<Language, std::string> lexicons;
    std::map<Language, std::string> stopwords;  // overrides; default from resource_dir
    std::string zh_wordlist;                    // override; default from resource_dir
    preprocess::PreprocessConfig prep;
    embedding::Pooling pooling = embedding::Pooling::Mean;
    std::map<Language, EmbeddingSpec> embeddings;
    std::vector<ModelSpec> models;
    bool stratify_by_lang = false;
    nlohmann::json raw;  // parsed snapshot, reproduced in every report
};

namespace detail {

inline Language lang_key(const std::string& key) {
    auto lang = parse_language(key);
    if (!lang) throw ConfigError("unknown language key: " + key);
    return *lang;
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    ExperimentConfig cfg;
    cfg.raw = j;
    const std::string mode = j.value("mode", "single");
    if (mode == "single" || mode == "single_language")
        cfg.mode = ExperimentConfig::Mode::SingleLanguage;
    else if (mode == "combined")
        cfg.mode = ExperimentConfig::Mode::Combined;
    else
        throw ConfigError("mode must be single or combined, got " + mode);

    cfg.seed = j.value("seed", std::uint64_t{42});
    cfg.split_ratio = j.value("split_ratio", 0.8);
    if (!(cfg.split_ratio > 0.0) || cfg.split_ratio > 1.0)
        throw ConfigError("split_ratio must be in (0, 1]");
    cfg.out_dir = j.value("out_dir", std::string("run"));
    cfg.resource_dir = j.value("resource_dir", std::string("resources"));

    if (!j.contains("languages") || !j.at("languages").is_array() || j.at("languages").empty())
        throw ConfigError("languages must be a non-empty array");
    for (const auto& l : j.at("languages"))
        cfg.languages.push_back(detail::lang_key(l.get<std::string>()));
    if (cfg.mode == ExperimentConfig::Mode::SingleLanguage && cfg.languages.size() != 1)
        throw ConfigError("single mode takes exactly one language");
    if (cfg.mode == ExperimentConfig::Mode::Combined && cfg.languages.size() < 2)
        throw ConfigError("combined mode needs at least two languages");

    if (!j.contains("data")) throw ConfigError("data section is required");
    for (const auto& [key, val] : j.at("data").items())
        cfg.data[detail::lang_key(key)] = val.get<std::string>();
    for (Language l : cfg.languages)
        if (!cfg.data.count(l))
            throw ConfigError(std::string("no data path for language ") + to_string(l));

    if (j.contains("lexicons"))
        for (const auto& [key, val] : j.at("lexicons").items())
            cfg.lexicons[detail::lang_key(key)] = val.get<std::string>();
    if (j.contains("stopwords"))
        for (const auto& [key, val] : j.at("stopwords").items())
            cfg.stopwords[detail::lang_key(key)] = val.get<std::string>();
    cfg.zh_wordlist = j.value("zh_wordlist", std::string());

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        cfg.prep.maxlen = p.value("maxlen", 500);
        cfg.prep.max_words = p.value("max_words", 5000);
        cfg.prep.min_tokens = p.value("min_tokens", std::size_t{2});
    }

    if (j.contains("pooling")) {
        auto pooling = embedding::parse_pooling(j.at("pooling").get<std::string>());
        if (!pooling) throw ConfigError("pooling must be mean or max");
        cfg.pooling = *pooling;
    }

    if (j.contains("embeddings")) {
        for (const auto& [key, val] : j.at("embeddings").items()) {
            EmbeddingSpec spec;
            if (val.contains("skipgram")) {
                spec.kind = EmbeddingSpec::Kind::Skipgram;
                const auto& s = val.at("skipgram");
                spec.skipgram.dim = s.value("dim", std::size_t{100});
                spec.skipgram.window = s.value("window", 5);
                spec.skipgram.negatives = s.value("negatives", 5);
                spec.skipgram.epochs = s.value("epochs", 5);
                spec.skipgram.min_count = s.value("min_count", std::size_t{1});
                spec.skipgram.learning_rate = s.value("learning_rate", 0.025);
            } else {
                spec.kind = EmbeddingSpec::Kind::File;
                if (!val.contains("path")) throw ConfigError("embedding entry needs a path");
                spec.path = val.at("path").get<std::string>();
                const std::string fmt_str = val.value("format", "word2vec_text");
                if (fmt_str == "auto") {
                    spec.auto_detect = true;
                } else {
                    auto fmt = embedding::parse_embedding_format(fmt_str);
                    if (!fmt) throw ConfigError("unknown embedding format for " + key);
                    spec.format = *fmt;
                }
            }
            cfg.embeddings[detail::lang_key(key)] = spec;
        }
    }

    if (!j.contains("models") || !j.at("models").is_array() || j.at("models").empty())
        throw ConfigError("models must be a non-empty array");
    for (const auto& m : j.at("models")) {
        ModelSpec spec;
        spec.type = m.value("type", std::string());
        static const std::vector<std::string> known = {"lr",     "dt",    "rf",      "birnf",
                                                       "bilstm", "bigru", "llm_head"};
        if (std::find(known.begin(), known.end(), spec.type) == known.end())
            throw ConfigError("unknown model type: " + spec.type);
        spec.name = m.value("name", spec.type);
        spec.options = m;
        if (cfg.mode == ExperimentConfig::Mode::Combined &&
            (spec.type == "lr" || spec.type == "dt" || spec.type == "rf"))
            throw ConfigError("combined mode runs DL models and the llm head only");
        cfg.models.push_back(std::move(spec));
    }

    cfg.stratify_by_lang = j.value("stratify_by_lang", false);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline std::string stopword_path(const ExperimentConfig& cfg, Language lang) {
    auto it = cfg.stopwords.find(lang);
    if (it != cfg.stopwords.end()) return it->second;
    return cfg.resource_dir + "/stopwords/" + to_string(lang) + ".txt";
}

inline std::string zh_wordlist_path(const ExperimentConfig& cfg) {
    if (!cfg.zh_wordlist.empty()) return cfg.zh_wordlist;
    return cfg.resource_dir + "/zh_wordlist.txt";
}

// Existence checks with the offending path in the message.
inline void validate_config(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    auto require = [](const std::string& path, const std::string& what) {
        if (!fs::exists(path)) throw ConfigError("missing " + what + ": " + path);
    };
    for (Language l : cfg.languages) {
        require(cfg.data.at(l), "data file");
        if (auto it = cfg.lexicons.find(l); it != cfg.lexicons.end())
            require(it->second, "lexicon file");
        require(stopword_path(cfg, l), "stopword list");
        if (l == Language::Zh) require(zh_wordlist_path(cfg), "zh wordlist");
        auto eit = cfg.embeddings.find(l);
        if (eit == cfg.embeddings.end())
            throw ConfigError(std::string("no embedding source for language ") + to_string(l));
        if (eit->second.kind == EmbeddingSpec::Kind::File)
            require(eit->second.path, "embedding file");
    }
    for (const auto& m : cfg.models) {
        if (m.type == "llm_head") {
            if (!m.options.contains("hidden_states"))
                throw ConfigError("llm_head model needs a hidden_states path");
            require(m.options.at("hidden_states").get<std::string>(), "hidden states file");
        }
    }
}

// ---------------------------------------------------------------------------
// Pipeline stages. The CLI subcommands and the one-shot runners share these.
// ---------------------------------------------------------------------------

struct LabelStats {
    std::size_t polarity_labeled = 0;
    std::size_t manual_final = 0;
    std::size_t unlabeled = 0;
    std::size_t arabic_neutral_suppressed = 0;
    std::size_t manual_polarity_disagreements = 0;
};

// Polarity runs on the cleaned but unstemmed token stream. Manual labels win.
// An Arabic record whose reconciled label would be Neutral stays unlabeled
// (the Arabic corpora are two-class); the count is reported.
inline LabelStats stage_label(corpus::Dataset& ds, const labeling::SentimentLexicon& lex,
                              Language lang, const preprocess::ZhWordlist& zh_words) {
    LabelStats stats;
    for (auto& rec : ds.records) {
        if (rec.lang != lang) continue;
        auto cleaned = preprocess::clean_text(rec.text, lang);
        auto tokens = preprocess::segment(cleaned.text, lang, zh_words);
        std::optional<Label> auto_label;
        if (!tokens.empty()) {
            auto result = labeling::polarity(tokens, lex);
            rec.polarity = result.value;
            rec.polarity_label = result.label;
            auto_label = result.label;
        }
        std::optional<Label> final;
        if (rec.manual_label)
            final = labeling::reconcile(rec.manual_label, auto_label.value_or(Label::Neutral));
        else if (auto_label)
            final = *auto_label;
        if (rec.manual_label && auto_label && *rec.manual_label != *auto_label)
            ++stats.manual_polarity_disagreements;

        if (final && rec.lang == Language::Ar && *final == Label::Neutral) {
            ++stats.arabic_neutral_suppressed;
            final.reset();
        }
        rec.final_label = final;
        if (!final)
            ++stats.unlabeled;
        else if (rec.manual_label)
            ++stats.manual_final;
        else
            ++stats.polarity_labeled;
    }
    return stats;
}

inline corpus::Dataset labeled_only(const corpus::Dataset& ds) {
    corpus::Dataset out;
    for (const auto& rec : ds.records)
        if (rec.final_label) out.records.push_back(rec);
    return out;
}

// ---------------------------------------------------------------------------
// Stage-file formats (tokens.jsonl, vocab.json, encoded.jsonl).
// ---------------------------------------------------------------------------

inline void save_vocab_json(const preprocess::Vocabulary& vocab, Language lang, int maxlen,
                            const std::string& path) {
    nlohmann::json j;
    j["lang"] = to_string(lang);
    j["max_words"] = vocab.max_words;
    j["maxlen"] = maxlen;
    j["words"] = vocab.words_by_rank;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline preprocess::Vocabulary load_vocab_json(const std::string& path, Language* lang = nullptr,
                                              int* maxlen = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("vocab file is not valid JSON: ") + e.what());
    }
    preprocess::Vocabulary vocab;
    vocab.max_words = j.at("max_words").get<int>();
    vocab.words_by_rank = j.at("words").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < vocab.words_by_rank.size(); ++i)
        vocab.word_to_index[vocab.words_by_rank[i]] = static_cast<int>(i) + 2;
    if (lang) *lang = *parse_language(j.at("lang").get<std::string>());
    if (maxlen) *maxlen = j.at("maxlen").get<int>();
    return vocab;
}

inline void save_processed_jsonl(const preprocess::ProcessedDataset& ds,
                                 const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    for (const auto& rec : ds.records) {
        nlohmann::json j;
        j["id"] = rec.id;
        j["lang"] = to_string(rec.lang);
        if (rec.label) j["label"] = to_string(*rec.label);
        j["tokens"] = rec.tokens;
        j["indices"] = rec.seq.indices;
        j["original_len"] = rec.seq.original_len;
        out << j.dump() << '\n';
    }
}

inline preprocess::ProcessedDataset load_processed_jsonl(const std::string& path,
                                                         const std::string& vocab_path) {
    Language lang = Language::En;
    int maxlen = 0;
    preprocess::ProcessedDataset ds;
    ds.vocab = load_vocab_json(vocab_path, &lang, &maxlen);
    ds.lang = lang;
    ds.maxlen = maxlen;

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_no, e.what());
        }
        preprocess::ProcessedTweet rec;
        rec.id = j.at("id").get<std::string>();
        rec.lang = *parse_language(j.at("lang").get<std::string>());
        if (j.contains("label")) rec.label = parse_label(j.at("label").get<std::string>());
        rec.tokens = j.at("tokens").get<std::vector<std::string>>();
        rec.seq.indices = j.at("indices").get<std::vector<int>>();
        rec.seq.original_len = j.at("original_len").get<std::size_t>();
        rec.seq.maxlen = rec.seq.indices.size();
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline void save_encoded_jsonl(const corpus::EncodedDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    for (const auto& rec : ds.records) {
        nlohmann::json j;
        j["id"] = rec.id;
        j["lang"] = to_string(rec.lang);
        j["label"] = to_string(rec.label);
        j["vec"] = rec.vec;
        if (rec.empty_pool) j["empty_pool"] = true;
        out << j.dump() << '\n';
    }
}

inline corpus::EncodedDataset load_encoded_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    corpus::EncodedDataset ds;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw MalformedRecord(line_no, e.what());
        }
        corpus::EncodedRecord rec;
        rec.id = j.at("id").get<std::string>();
        rec.lang = *parse_language(j.at("lang").get<std::string>());
        auto label = parse_label(j.at("label").get<std::string>());
        if (!label) throw MalformedRecord(line_no, "unknown label");
        rec.label = *label;
        rec.vec = j.at("vec").get<std::vector<double>>();
        rec.empty_pool = j.value("empty_pool", false);
        if (ds.dim == 0) ds.dim = rec.vec.size();
        if (rec.vec.size() != ds.dim) throw DimensionMismatch(ds.dim, rec.vec.size());
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Run records and reports.
// ---------------------------------------------------------------------------

struct ModelResult {
    std::string name;
    metrics::EvalReport report;
    nn::TrainTrace trace;  // empty for the ML models
    std::string artifact_path;
    std::size_t param_count = 0;  // trainable parameters (recurrent nets, head)
    double wall_seconds = 0.0;
};

struct RunRecord {
    std::string mode;
    nlohmann::json config_snapshot;
    nlohmann::json stats = nlohmann::json::object();
    std::vector<ModelResult> results;
};

inline nlohmann::json trace_to_json(const nn::TrainTrace& trace) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : trace)
        rows.push_back({{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"train_accuracy", r.train_accuracy},
                        {"val_loss", r.val_loss},
                        {"val_accuracy", r.val_accuracy}});
    return rows;
}

inline nn::TrainTrace trace_from_json(const nlohmann::json& rows) {
    nn::TrainTrace trace;
    for (const auto& r : rows) {
        nn::TraceRow row;
        row.epoch = r.at("epoch").get<int>();
        row.train_loss = r.at("train_loss").get<double>();
        row.train_accuracy = r.at("train_accuracy").get<double>();
        row.val_loss = r.at("val_loss").get<double>();
        row.val_accuracy = r.at("val_accuracy").get<double>();
        trace.push_back(row);
    }
    return trace;
}

// Timings are deliberately not part of this payload; they land in a separate
// timings.json so that report files are byte-identical across reruns.
inline nlohmann::json run_record_to_json(const RunRecord& rr) {
    nlohmann::json j;
    j["mode"] = rr.mode;
    j["config"] = rr.config_snapshot;
    j["stats"] = rr.stats;
    nlohmann::json results = nlohmann::json::array();
    for (const auto& r : rr.results) {
        nlohmann::json m;
        m["name"] = r.name;
        m["report"] = metrics::report_to_json(r.report);
        if (!r.trace.empty()) m["trace"] = trace_to_json(r.trace);
        if (!r.artifact_path.empty()) m["artifact"] = r.artifact_path;
        if (r.param_count > 0) m["params"] = r.param_count;
        results.push_back(m);
    }
    j["results"] = results;
    return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
    RunRecord rr;
    rr.mode = j.at("mode").get<std::string>();
    rr.config_snapshot = j.at("config");
    rr.stats = j.at("stats");
    for (const auto& m : j.at("results")) {
        ModelResult r;
        r.name = m.at("name").get<std::string>();
        r.report = metrics::report_from_json(m.at("report"));
        if (m.contains("trace")) r.trace = trace_from_json(m.at("trace"));
        if (m.contains("artifact")) r.artifact_path = m.at("artifact").get<std::string>();
        r.param_count = m.value("params", std::size_t{0});
        rr.results.push_back(std::move(r));
    }
    return rr;
}

inline void emit_report(const RunRecord& rr, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    {
        std::ofstream out(out_dir + "/report.json", std::ios::binary);
        if (!out) throw IOError("cannot write " + out_dir + "/report.json");
        out << run_record_to_json(rr).dump(2) << '\n';
    }
    {
        std::ofstream out(out_dir + "/report.txt", std::ios::binary);
        if (!out) throw IOError("cannot write " + out_dir + "/report.txt");
        for (const auto& r : rr.results) out << metrics::report_table(r.report, r.name) << '\n';
    }
    {
        nlohmann::json timings = nlohmann::json::object();
        for (const auto& r : rr.results) timings[r.name] = r.wall_seconds;
        std::ofstream out(out_dir + "/timings.json", std::ios::binary);
        if (!out) throw IOError("cannot write " + out_dir + "/timings.json");
        out << timings.dump(2) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Shared runner helpers.
// ---------------------------------------------------------------------------

namespace detail {

struct LangPipeline {
    corpus::Dataset labeled;
    preprocess::ProcessedDataset processed;
    embedding::EmbeddingTable table;
    corpus::EncodedDataset encoded;
    LabelStats label_stats;
};

inline LangPipeline run_language_pipeline(const ExperimentConfig& cfg, Language lang) {
    LangPipeline pipe;

    corpus::Dataset ds = corpus::load_jsonl(cfg.data.at(lang), lang);
    if (ds.empty()) throw EmptyDataset();

    preprocess::ZhWordlist zh_words;
    if (lang == Language::Zh) zh_words = preprocess::ZhWordlist::load(zh_wordlist_path(cfg));

    if (auto it = cfg.lexicons.find(lang); it != cfg.lexicons.end()) {
        auto lex = labeling::load_lexicon_tsv(it->second, lang);
        pipe.label_stats = stage_label(ds, lex, lang, zh_words);
    }
    pipe.labeled = labeled_only(ds);
    if (pipe.labeled.empty())
        throw DataError(std::string("no labeled records for language ") + to_string(lang));

    preprocess::StopwordLists stopwords;
    stopwords.load(lang, stopword_path(cfg, lang));
    pipe.processed =
        preprocess::preprocess_dataset(pipe.labeled, lang, cfg.prep, stopwords, zh_words);
    if (pipe.processed.records.empty())
        throw DataError(std::string("preprocessing dropped every record for ") + to_string(lang));

    auto eit = cfg.embeddings.find(lang);
    if (eit == cfg.embeddings.end())
        throw ConfigError(std::string("no embedding source for language ") + to_string(lang));
    if (eit->second.kind == EmbeddingSpec::Kind::File) {
        if (eit->second.auto_detect)
            pipe.table = embedding::load_embeddings_auto(eit->second.path, lang).first;
        else
            pipe.table = embedding::load_embeddings(eit->second.path, eit->second.format, lang);
    } else {
        std::vector<std::vector<std::string>> token_corpus;
        for (const auto& rec : pipe.processed.records) token_corpus.push_back(rec.tokens);
        embedding::SkipgramConfig sg = eit->second.skipgram;
        sg.seed = cfg.seed;
        pipe.table = embedding::train_skipgram(token_corpus, sg, lang);
    }

    pipe.encoded = embedding::encode_dataset(pipe.processed, pipe.table, cfg.pooling);
    return pipe;
}

inline nlohmann::json label_stats_json(const LabelStats& s) {
    return {{"polarity_labeled", s.polarity_labeled},
            {"manual_final", s.manual_final},
            {"unlabeled", s.unlabeled},
            {"arabic_neutral_suppressed", s.arabic_neutral_suppressed},
            {"manual_polarity_disagreements", s.manual_polarity_disagreements}};
}

inline dl::NetworkConfig dl_config_from_options(const nlohmann::json& opt, const std::string& type,
                                                std::uint64_t seed) {
    dl::NetworkConfig cfg;
    cfg.arch = *dl::parse_arch(type);
    cfg.seq_len = opt.value("seq_len", std::size_t{100});
    cfg.embed_dim = opt.value("embed_dim", std::size_t{300});
    if (opt.contains("layer_units"))
        cfg.layer_units = opt.at("layer_units").get<std::vector<std::size_t>>();
    if (opt.contains("dense_units"))
        cfg.dense_units = opt.at("dense_units").get<std::vector<std::size_t>>();
    cfg.dropout_rate = opt.value("dropout_rate", 0.4);
    cfg.learning_rate = opt.value("learning_rate", 0.005);
    cfg.epochs = opt.value("epochs", 10);
    cfg.batch_size = opt.value("batch_size", std::size_t{32});
    cfg.seed = opt.value("seed", seed);
    return cfg;
}

inline metrics::EvalReport eval_ml(const std::vector<Label>& y_true,
                                   const std::vector<Label>& y_pred) {
    return metrics::report(metrics::confusion(y_true, y_pred));
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

}  // namespace detail

// Record-aligned split of a processed dataset and its encoded counterpart:
// both views shuffle the same index space with the same seed.
template <typename DS>
corpus::SplitPairT<DS> split_like(const DS& ds, double ratio, std::uint64_t seed) {
    return corpus::split_records(ds, ratio, seed);
}

inline std::pair<llm::HiddenStateBatch, llm::HiddenStateBatch> split_hidden_states(
    const llm::HiddenStateBatch& batch, double ratio, std::uint64_t seed) {
    if (batch.n == 0) throw EmptyDataset();
    std::vector<std::size_t> order(batch.n);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    shuffle(order, rng);
    const std::size_t n_train = corpus::train_count(ratio, batch.n);

    auto take = [&](std::size_t from, std::size_t to) {
        llm::HiddenStateBatch part;
        part.n = to - from;
        part.max_len = batch.max_len;
        part.h = batch.h;
        part.hidden.reserve(part.n * part.max_len * part.h);
        part.mask.reserve(part.n * part.max_len);
        if (batch.labels) part.labels.emplace();
        for (std::size_t i = from; i < to; ++i) {
            const std::size_t src = order[i];
            const float* hbegin = &batch.hidden[src * batch.max_len * batch.h];
            part.hidden.insert(part.hidden.end(), hbegin, hbegin + batch.max_len * batch.h);
            const std::uint8_t* mbegin = &batch.mask[src * batch.max_len];
            part.mask.insert(part.mask.end(), mbegin, mbegin + batch.max_len);
            if (batch.labels) part.labels->push_back((*batch.labels)[src]);
        }
        return part;
    };
    return {take(0, n_train), take(n_train, batch.n)};
}

// ---------------------------------------------------------------------------
// Runners.
// ---------------------------------------------------------------------------

inline RunRecord run_single_language(const ExperimentConfig& cfg) {
    if (cfg.mode != ExperimentConfig::Mode::SingleLanguage)
        throw ConfigError("run_single_language needs a single-language config");
    validate_config(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir + "/models");

    const Language lang = cfg.languages.front();
    auto pipe = detail::run_language_pipeline(cfg, lang);
    if (pipe.table.source() == embedding::EmbeddingSource::TrainedSkipgram)
        embedding::save_word2vec_text(
            pipe.table, cfg.out_dir + "/models/skipgram_" + to_string(lang) + ".w2v.txt");

    auto proc_split = split_like(pipe.processed, cfg.split_ratio, cfg.seed);
    auto enc_split = split_like(pipe.encoded, cfg.split_ratio, cfg.seed);
    enc_split.train.dim = enc_split.test.dim = pipe.encoded.dim;

    RunRecord rr;
    rr.mode = "single";
    rr.config_snapshot = cfg.raw;
    rr.stats["language"] = to_string(lang);
    rr.stats["records_labeled"] = pipe.labeled.size();
    rr.stats["records_processed"] = pipe.processed.records.size();
    rr.stats["records_dropped"] = pipe.processed.dropped.size();
    rr.stats["train_size"] = enc_split.train.size();
    rr.stats["test_size"] = enc_split.test.size();
    rr.stats["empty_pool_records"] = pipe.encoded.empty_pool_count();
    rr.stats["embedding_dim"] = pipe.encoded.dim;
    rr.stats["vocab_size"] = pipe.processed.vocab.size();
    rr.stats["labeling"] = detail::label_stats_json(pipe.label_stats);

    for (const auto& spec : cfg.models) {
        detail::Timer timer;
        ModelResult result;
        result.name = spec.name;

        std::vector<Label> y_true;
        for (const auto& rec : enc_split.test.records) y_true.push_back(rec.label);

        if (spec.type == "lr") {
            ml::LRConfig mc;
            mc.learning_rate = spec.options.value("learning_rate", 0.1);
            mc.max_iterations = spec.options.value("max_iterations", 1000);
            auto model = ml::lr_train(enc_split.train, mc);
            std::vector<Label> y_pred;
            for (const auto& rec : enc_split.test.records)
                y_pred.push_back(ml::lr_predict(model, rec.vec).label);
            result.report = detail::eval_ml(y_true, y_pred);
            result.artifact_path = "models/" + spec.name + ".json";
            ml::save_model_json(ml::lr_to_json(model), cfg.out_dir + "/" + result.artifact_path);
        } else if (spec.type == "dt") {
            ml::DTConfig mc;
            mc.max_depth = spec.options.value("max_depth", 12);
            mc.min_samples_split = spec.options.value("min_samples_split", std::size_t{2});
            auto model = ml::dt_train(enc_split.train, mc);
            std::vector<Label> y_pred;
            for (const auto& rec : enc_split.test.records)
                y_pred.push_back(ml::dt_predict(model, rec.vec));
            result.report = detail::eval_ml(y_true, y_pred);
            result.artifact_path = "models/" + spec.name + ".json";
            ml::save_model_json(ml::dt_to_json(model), cfg.out_dir + "/" + result.artifact_path);
        } else if (spec.type == "rf") {
            ml::RFConfig mc;
            mc.num_trees = spec.options.value("num_trees", 100);
            mc.feature_fraction = spec.options.value("feature_fraction", 0.0);
            mc.seed = spec.options.value("seed", cfg.seed);
            mc.tree.max_depth = spec.options.value("max_depth", 12);
            auto model = ml::rf_train(enc_split.train, mc);
            std::vector<Label> y_pred;
            for (const auto& rec : enc_split.test.records)
                y_pred.push_back(ml::rf_predict(model, rec.vec));
            result.report = detail::eval_ml(y_true, y_pred);
            result.artifact_path = "models/" + spec.name + ".json";
            ml::save_model_json(ml::rf_to_json(model), cfg.out_dir + "/" + result.artifact_path);
        } else if (spec.type == "birnf" || spec.type == "bilstm" || spec.type == "bigru") {
            dl::NetworkConfig nc = detail::dl_config_from_options(spec.options, spec.type, cfg.seed);
            nc.input = dl::NetworkConfig::Input::Tokens;
            nc.embed_dim = pipe.table.dim();

            auto train_dl = dl::dataset_from_processed(proc_split.train);
            auto test_dl = dl::dataset_from_processed(proc_split.test);
            nc.num_classes = dl::detail::classes_of(train_dl.labels).size();

            auto model = dl::build_network(nc, &pipe.processed.vocab, &pipe.table);
            result.param_count = model.net.param_count();
            result.trace = dl::train(model, train_dl, test_dl);
            auto eval = dl::evaluate(model, test_dl);
            result.report = detail::eval_ml(test_dl.labels, eval.predictions);
            result.report.loss = eval.loss;
            result.artifact_path = "models/" + spec.name + ".tlw";
            dl::save_weights(model, cfg.out_dir + "/" + result.artifact_path);
            dl::save_trace_csv(result.trace, cfg.out_dir + "/models/" + spec.name + "_trace.csv");
        } else {
            throw ConfigError("model type " + spec.type + " is not available in single mode");
        }

        result.wall_seconds = timer.seconds();
        rr.results.push_back(std::move(result));
    }
    emit_report(rr, cfg.out_dir);
    return rr;
}

inline RunRecord run_combined(const ExperimentConfig& cfg) {
    if (cfg.mode != ExperimentConfig::Mode::Combined)
        throw ConfigError("run_combined needs a combined config");
    validate_config(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir + "/models");

    RunRecord rr;
    rr.mode = "combined";
    rr.config_snapshot = cfg.raw;

    std::vector<corpus::EncodedDataset> parts;
    nlohmann::json lang_stats = nlohmann::json::object();
    for (Language lang : cfg.languages) {
        auto pipe = detail::run_language_pipeline(cfg, lang);
        if (pipe.table.source() == embedding::EmbeddingSource::TrainedSkipgram)
            embedding::save_word2vec_text(
                pipe.table, cfg.out_dir + "/models/skipgram_" + to_string(lang) + ".w2v.txt");
        nlohmann::json s;
        s["records_labeled"] = pipe.labeled.size();
        s["records_processed"] = pipe.processed.records.size();
        s["records_dropped"] = pipe.processed.dropped.size();
        s["empty_pool_records"] = pipe.encoded.empty_pool_count();
        s["labeling"] = detail::label_stats_json(pipe.label_stats);
        lang_stats[to_string(lang)] = s;
        parts.push_back(std::move(pipe.encoded));
    }
    corpus::EncodedDataset merged = corpus::merge_multilingual(parts);
    rr.stats["languages"] = lang_stats;
    rr.stats["merged_size"] = merged.size();
    rr.stats["embedding_dim"] = merged.dim;

    corpus::SplitPairT<corpus::EncodedDataset> split;
    if (cfg.stratify_by_lang) {
        split.ratio = cfg.split_ratio;
        split.seed = cfg.seed;
        std::uint64_t salt = 0;
        for (Language lang : cfg.languages) {
            corpus::EncodedDataset sub;
            sub.dim = merged.dim;
            for (const auto& rec : merged.records)
                if (rec.lang == lang) sub.records.push_back(rec);
            auto part = corpus::split_records(sub, cfg.split_ratio, cfg.seed + salt);
            ++salt;
            split.train.records.insert(split.train.records.end(), part.train.records.begin(),
                                       part.train.records.end());
            split.test.records.insert(split.test.records.end(), part.test.records.begin(),
                                      part.test.records.end());
        }
    } else {
        split = corpus::split_records(merged, cfg.split_ratio, cfg.seed);
    }
    split.train.dim = split.test.dim = merged.dim;
    rr.stats["train_size"] = split.train.size();
    rr.stats["test_size"] = split.test.size();

    for (const auto& spec : cfg.models) {
        detail::Timer timer;
        ModelResult result;
        result.name = spec.name;

        if (spec.type == "birnf" || spec.type == "bilstm" || spec.type == "bigru") {
            dl::NetworkConfig nc = detail::dl_config_from_options(spec.options, spec.type, cfg.seed);
            nc.input = dl::NetworkConfig::Input::Vectors;
            nc.input_dim = merged.dim;
            nc.seq_len = 1;

            auto train_dl = dl::dataset_from_encoded(split.train);
            auto test_dl = dl::dataset_from_encoded(split.test);
            nc.num_classes = dl::detail::classes_of(train_dl.labels).size();

            auto model = dl::build_network(nc, nullptr, nullptr);
            result.param_count = model.net.param_count();
            result.trace = dl::train(model, train_dl, test_dl);
            auto eval = dl::evaluate(model, test_dl);
            result.report = detail::eval_ml(test_dl.labels, eval.predictions);
            result.report.loss = eval.loss;
            result.artifact_path = "models/" + spec.name + ".tlw";
            dl::save_weights(model, cfg.out_dir + "/" + result.artifact_path);
            dl::save_trace_csv(result.trace, cfg.out_dir + "/models/" + spec.name + "_trace.csv");
        } else if (spec.type == "llm_head") {
            auto batch =
                llm::load_hidden_states(spec.options.at("hidden_states").get<std::string>());
            auto [train_batch, test_batch] =
                split_hidden_states(batch, cfg.split_ratio, cfg.seed);
            llm::HeadConfig hc;
            if (spec.options.contains("dense_units"))
                hc.dense_units = spec.options.at("dense_units").get<std::vector<std::size_t>>();
            hc.dropout_rate = spec.options.value("dropout_rate", 0.4);
            hc.learning_rate = spec.options.value("learning_rate", 0.0005);
            hc.batch_size = spec.options.value("batch_size", std::size_t{16});
            hc.epochs = spec.options.value("epochs", 50);
            hc.seed = spec.options.value("seed", cfg.seed);
            hc.include_padding = spec.options.value("pool_include_padding", false);
            auto [model, trace] = llm::head_train(train_batch, hc, &test_batch);
            result.param_count = model.net.param_count();
            result.trace = std::move(trace);
            auto eval = llm::head_evaluate(model, test_batch);
            result.report =
                detail::eval_ml(llm::batch_labels(test_batch), eval.predictions);
            result.report.loss = eval.loss;
            result.artifact_path = "models/" + spec.name + ".tlw";
            llm::save_head(model, cfg.out_dir + "/" + result.artifact_path);
        } else {
            throw ConfigError("combined mode runs DL models and the llm head only");
        }

        result.wall_seconds = timer.seconds();
        rr.results.push_back(std::move(result));
    }
    emit_report(rr, cfg.out_dir);
    return rr;
}

inline RunRecord run_experiment(const ExperimentConfig& cfg) {
    return cfg.mode == ExperimentConfig::Mode::SingleLanguage ? run_single_language(cfg)
                                                              : run_combined(cfg);
}

}  // namespace threatlens::experiments
