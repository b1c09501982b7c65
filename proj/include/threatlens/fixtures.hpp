#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/embedding.hpp"
#include "threatlens/llm_head.hpp"
#include "threatlens/preprocess.hpp"

namespace threatlens::fixtures {

// Synthetic four-language corpus with class-exclusive keyword pools: threat
// words carry lexicon score -1, non-threat words +1, everything else 0, so
// the polarity labeler reproduces the intended class. Arabic is two-class.

struct FixtureConfig {
    std::string out_dir = "fixtures";
    std::size_t tweets_per_lang = 400;
    std::uint64_t seed = 7;
    std::size_t dim = 24;
    std::size_t hidden_records = 400;
    std::size_t hidden_width = 16;
    std::size_t hidden_len = 8;
};

namespace detail {

struct LangInventory {
    std::vector<std::string> threat;
    std::vector<std::string> neutral;  // empty for Arabic
    std::vector<std::string> nonthreat;
    std::vector<std::string> fillers;      // lexicon score 0
    std::vector<std::string> stopwords;    // subset of fillers plus extras
};

inline const std::map<Language, LangInventory>& inventories() {
    static const std::map<Language, LangInventory> inv = {
        {Language::En,
         {{"bombing", "attack", "destroy", "killing", "explosion", "threat", "violence",
           "murder", "assault", "terror"},
          {"weather", "traffic", "coffee", "meeting", "music", "garden", "library", "photo",
           "train", "market"},
          {"peace", "happy", "wonderful", "friendly", "safety", "celebrate", "kindness", "love",
           "support", "welcome"},
          {"the", "is", "a", "today", "city", "people", "news", "day"},
          {"the", "is", "a", "an", "and", "or", "of", "to", "in", "on", "at", "it", "this",
           "that", "was", "are", "be", "for", "with", "as", "by", "from"}}},
        {Language::Ru,
         {{"взрыв", "атака", "угроза", "убийство", "насилие", "террор", "бомба", "нападение"},
          {"погода", "кофе", "музыка", "город", "библиотека", "рынок", "поезд", "фото"},
          {"мир", "счастье", "дружба", "радость", "любовь", "поддержка", "праздник", "добро"},
          {"сегодня", "и", "в", "люди", "день", "новости"},
          {"и", "в", "не", "на", "с", "что", "как", "это", "по", "но", "из", "у", "за", "от",
           "же", "бы", "к", "до"}}},
        {Language::Ar,
         {{"هجوم", "تفجير", "تهديد", "قتل", "عنف", "إرهاب", "قنبلة"},
          {},
          {"سلام", "سعادة", "حب", "أمان", "فرح", "دعم", "خير"},
          {"اليوم", "في", "الناس", "مدينة"},
          {"في", "من", "على", "إلى", "عن", "أن", "مع", "هذا", "هذه", "كان", "قد", "لا", "ما",
           "أو", "ثم", "هو", "هي"}}},
        {Language::Zh,
         {{"爆炸", "袭击", "威胁", "暴力", "恐怖", "炸弹", "攻击"},
          {"天气", "咖啡", "音乐", "城市", "图书", "市场", "火车", "照片"},
          {"和平", "幸福", "友谊", "快乐", "安全", "支持", "祝福"},
          {"今天", "人们", "新闻"},
          {"的", "了", "是", "在", "我", "有", "和", "就", "不", "都", "也"}}},
    };
    return inv;
}

inline const std::vector<std::string>& class_pool(const LangInventory& inv, Label cls) {
    switch (cls) {
        case Label::Threat: return inv.threat;
        case Label::Neutral: return inv.neutral;
        case Label::NonThreat: return inv.nonthreat;
    }
    return inv.neutral;
}

inline std::string join(const std::vector<std::string>& words, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    for (const auto& l : lines) out << l << '\n';
}

}  // namespace detail

// One synthetic labeled corpus; classes cycle deterministically, words draw
// from the class pool with a sprinkle of zero-score fillers and a little
// URL/mention/hashtag noise for the cleaner to chew on.
inline corpus::Dataset make_corpus(Language lang, std::size_t n, std::uint64_t seed) {
    const auto& inv = detail::inventories().at(lang);
    const bool two_class = inv.neutral.empty();
    Rng rng(seed ^ static_cast<std::uint64_t>(lang));
    corpus::Dataset ds;

    for (std::size_t i = 0; i < n; ++i) {
        Label cls;
        if (two_class)
            cls = (i % 2 == 0) ? Label::Threat : Label::NonThreat;
        else
            cls = label_from_index(static_cast<int>(i % 3));
        const auto& pool = detail::class_pool(inv, cls);

        std::vector<std::string> words;
        const std::size_t n_class = 4 + rng.below(3);
        for (std::size_t k = 0; k < n_class; ++k)
            words.push_back(pool[rng.below(pool.size())]);
        if (cls == Label::Neutral || rng.below(3) == 0)
            words.push_back(inv.fillers[rng.below(inv.fillers.size())]);

        std::string text =
            lang == Language::Zh ? detail::join(words, "") : detail::join(words, " ");
        switch (rng.below(4)) {
            case 0: text += " http://example.com/" + std::to_string(rng.below(1000)); break;
            case 1: text += " @user" + std::to_string(rng.below(100)); break;
            case 2: text += " #tag" + std::to_string(rng.below(100)); break;
            default: break;
        }

        corpus::LabeledTweet rec;
        rec.id = std::string(to_string(lang)) + "-" + std::to_string(i);
        rec.text = text;
        rec.lang = lang;
        if (i % 17 == 0) {
            rec.manual_label = cls;  // exercises the manual-priority rule
            rec.final_label = cls;
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

inline void write_lexicon(Language lang, const std::string& path) {
    const auto& inv = detail::inventories().at(lang);
    std::vector<std::string> lines;
    for (const auto& w : inv.threat) lines.push_back(w + "\t-1");
    for (const auto& w : inv.nonthreat) lines.push_back(w + "\t1");
    for (const auto& w : inv.neutral) lines.push_back(w + "\t0");
    for (const auto& w : inv.fillers) lines.push_back(w + "\t0");
    detail::write_lines(path, lines);
}

// Embedding vectors with class-clustered geometry: a class centroid plus a
// per-word offset, mimicking the semantic structure pretrained vectors carry.
// Keys are the processed (folded + stemmed) word forms.
inline embedding::EmbeddingTable make_embedding_table(Language lang, std::size_t dim,
                                                      std::uint64_t seed) {
    const auto& inv = detail::inventories().at(lang);
    Rng rng(seed ^ (0x5bd1e995ULL + static_cast<std::uint64_t>(lang)));

    auto centroid = [&]() {
        std::vector<double> c(dim);
        for (auto& v : c) v = rng.gaussian();
        return c;
    };
    const std::vector<double> c_threat = centroid();
    const std::vector<double> c_neutral = centroid();
    const std::vector<double> c_nonthreat = centroid();
    const std::vector<double> c_filler = centroid();

    embedding::EmbeddingTable table(dim, lang, embedding::EmbeddingSource::PretrainedText);
    std::set<std::string> done;
    auto add_pool = [&](const std::vector<std::string>& pool, const std::vector<double>& c) {
        for (const auto& raw : pool) {
            std::string word = preprocess::stem_word(raw, lang);
            if (!done.insert(word).second) continue;
            std::vector<float> vec(dim);
            for (std::size_t k = 0; k < dim; ++k)
                vec[k] = static_cast<float>(0.8 * c[k] + 0.6 * rng.gaussian());
            table.insert(word, std::move(vec));
        }
    };
    add_pool(inv.threat, c_threat);
    add_pool(inv.neutral, c_neutral);
    add_pool(inv.nonthreat, c_nonthreat);
    add_pool(inv.fillers, c_filler);
    return table;
}

// Class-separable synthetic transformer hidden states; positions past the
// mask carry garbage so mask-aware pooling is observable.
inline llm::HiddenStateBatch make_hidden_states(std::size_t n, std::size_t max_len,
                                                std::size_t h, std::uint64_t seed,
                                                int num_classes = 3) {
    Rng rng(seed ^ 0xabcdef12345ULL);
    std::vector<std::vector<double>> centroids;
    for (int c = 0; c < num_classes; ++c) {
        centroids.emplace_back(h);
        for (auto& v : centroids.back()) v = 2.0 * rng.gaussian();
    }
    llm::HiddenStateBatch batch;
    batch.n = n;
    batch.max_len = max_len;
    batch.h = h;
    batch.hidden.resize(n * max_len * h);
    batch.mask.resize(n * max_len);
    batch.labels.emplace();
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % static_cast<std::size_t>(num_classes));
        batch.labels->push_back(static_cast<std::uint16_t>(cls));
        const std::size_t len = 1 + rng.below(max_len);
        for (std::size_t t = 0; t < max_len; ++t) {
            batch.mask[i * max_len + t] = t < len ? 1 : 0;
            for (std::size_t f = 0; f < h; ++f) {
                double v = t < len ? centroids[static_cast<std::size_t>(cls)][f] +
                                         0.5 * rng.gaussian()
                                   : 3.0 * rng.gaussian();
                batch.hidden[(i * max_len + t) * h + f] = static_cast<float>(v);
            }
        }
    }
    return batch;
}

struct FixturePaths {
    std::map<Language, std::string> data;
    std::map<Language, std::string> lexicons;
    std::map<Language, std::string> stopwords;
    std::map<Language, std::string> embeddings;
    std::string zh_wordlist;
    std::string hidden_states;
    std::map<Language, std::string> single_configs;
    std::string combined_config;
};

inline FixturePaths export_fixtures(const FixtureConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const std::string base = fs::absolute(cfg.out_dir).string();
    FixturePaths paths;

    // Corpora, lexicons, stopwords.
    for (Language lang : all_languages()) {
        const std::string tag = to_string(lang);
        auto ds = make_corpus(lang, cfg.tweets_per_lang, cfg.seed);
        paths.data[lang] = base + "/data_" + tag + ".jsonl";
        corpus::save_jsonl(ds, paths.data[lang]);
        paths.lexicons[lang] = base + "/lexicon_" + tag + ".tsv";
        write_lexicon(lang, paths.lexicons[lang]);
        paths.stopwords[lang] = base + "/stopwords_" + tag + ".txt";
        detail::write_lines(paths.stopwords[lang], detail::inventories().at(lang).stopwords);
    }

    // Chinese wordlist covers every fixture word.
    {
        const auto& inv = detail::inventories().at(Language::Zh);
        std::vector<std::string> words;
        for (const auto* pool : {&inv.threat, &inv.neutral, &inv.nonthreat, &inv.fillers})
            for (const auto& w : *pool) words.push_back(w);
        paths.zh_wordlist = base + "/zh_wordlist.txt";
        detail::write_lines(paths.zh_wordlist, words);
    }

    // Per-language embedding files, one per supported format;
    // Arabic trains its own skip-gram model from the corpus at run time.
    {
        auto en = make_embedding_table(Language::En, cfg.dim, cfg.seed);
        paths.embeddings[Language::En] = base + "/embeddings_en.bin";
        embedding::save_word2vec_binary(en, paths.embeddings[Language::En]);
        auto zh = make_embedding_table(Language::Zh, cfg.dim, cfg.seed);
        paths.embeddings[Language::Zh] = base + "/embeddings_zh.glove.txt";
        embedding::save_glove_text(zh, paths.embeddings[Language::Zh]);
        auto ru = make_embedding_table(Language::Ru, cfg.dim, cfg.seed);
        paths.embeddings[Language::Ru] = base + "/embeddings_ru.w2v.txt";
        embedding::save_word2vec_text(ru, paths.embeddings[Language::Ru]);
    }

    // Hidden-state fixture for the llm head.
    paths.hidden_states = base + "/hidden_states.hsb";
    llm::write_hidden_states(
        make_hidden_states(cfg.hidden_records, cfg.hidden_len, cfg.hidden_width, cfg.seed),
        paths.hidden_states);

    auto embedding_entry = [&](Language lang) -> nlohmann::json {
        switch (lang) {
            case Language::En:
                return {{"format", "word2vec_bin"}, {"path", paths.embeddings[Language::En]}};
            case Language::Zh:
                return {{"format", "glove_text"}, {"path", paths.embeddings[Language::Zh]}};
            case Language::Ru:
                // Serialization unstated upstream; let the loader detect it.
                return {{"format", "auto"}, {"path", paths.embeddings[Language::Ru]}};
            case Language::Ar:
                return {{"skipgram",
                         {{"dim", cfg.dim}, {"window", 5}, {"negatives", 5}, {"epochs", 10}}}};
        }
        return {};
    };

    // Single-language configs: the three ML models.
    for (Language lang : all_languages()) {
        const std::string tag = to_string(lang);
        nlohmann::json j;
        j["mode"] = "single";
        j["seed"] = 42;
        j["split_ratio"] = 0.8;
        j["out_dir"] = base + "/runs/single_" + tag;
        j["languages"] = {tag};
        j["data"] = {{tag, paths.data[lang]}};
        j["lexicons"] = {{tag, paths.lexicons[lang]}};
        j["stopwords"] = {{tag, paths.stopwords[lang]}};
        if (lang == Language::Zh) j["zh_wordlist"] = paths.zh_wordlist;
        j["preprocess"] = {{"maxlen", 64}, {"max_words", 5000}, {"min_tokens", 2}};
        j["pooling"] = "mean";
        j["embeddings"] = {{tag, embedding_entry(lang)}};
        j["models"] = {{{"type", "lr"}}, {{"type", "dt"}}, {{"type", "rf"}, {"num_trees", 100}}};
        paths.single_configs[lang] = base + "/config_single_" + tag + ".json";
        std::ofstream out(paths.single_configs[lang], std::ios::binary);
        out << j.dump(2) << '\n';
    }

    // Combined config: an 8-unit Bi-LSTM over the merged pooled vectors plus
    // the llm head over the hidden-state fixture.
    {
        nlohmann::json j;
        j["mode"] = "combined";
        j["seed"] = 42;
        j["split_ratio"] = 0.8;
        j["out_dir"] = base + "/runs/combined";
        j["languages"] = {"en", "zh", "ru", "ar"};
        nlohmann::json data, lexicons, stopwords, embeddings;
        for (Language lang : all_languages()) {
            const std::string tag = to_string(lang);
            data[tag] = paths.data[lang];
            lexicons[tag] = paths.lexicons[lang];
            stopwords[tag] = paths.stopwords[lang];
            embeddings[tag] = embedding_entry(lang);
        }
        j["data"] = data;
        j["lexicons"] = lexicons;
        j["stopwords"] = stopwords;
        j["zh_wordlist"] = paths.zh_wordlist;
        j["preprocess"] = {{"maxlen", 64}, {"max_words", 5000}, {"min_tokens", 2}};
        j["pooling"] = "mean";
        j["embeddings"] = embeddings;
        j["models"] = {{{"type", "bilstm"},
                        {"name", "bilstm8"},
                        {"layer_units", {8, 8, 8}},
                        {"dense_units", {16, 16}},
                        {"epochs", 200},
                        {"batch_size", 32},
                        {"learning_rate", 0.005}},
                       {{"type", "llm_head"},
                        {"hidden_states", paths.hidden_states},
                        {"epochs", 50}}};
        paths.combined_config = base + "/config_combined.json";
        std::ofstream out(paths.combined_config, std::ios::binary);
        out << j.dump(2) << '\n';
    }
    return paths;
}

}  // namespace threatlens::fixtures
