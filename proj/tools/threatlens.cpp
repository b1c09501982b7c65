// threatlens: multilingual tweet threat-detection pipeline.
//
// Subcommands: label, preprocess, embed, train, eval, experiment,
// export-fixtures, validate-config. Exit codes: 0 success, 2 config error,
// 3 data error, 4 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/dl.hpp"
#include "threatlens/embedding.hpp"
#include "threatlens/experiments.hpp"
#include "threatlens/fixtures.hpp"
#include "threatlens/labeling.hpp"
#include "threatlens/llm_head.hpp"
#include "threatlens/metrics.hpp"
#include "threatlens/ml.hpp"
#include "threatlens/preprocess.hpp"

namespace tl = threatlens;

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[threatlens] " << msg << "\n";
}

tl::Language require_lang(const std::string& s) {
    auto lang = tl::parse_language(s);
    if (!lang) throw tl::ConfigError("unknown language: " + s);
    return *lang;
}

// "FORMAT:PATH", e.g. word2vec_bin:/data/vectors.bin
std::pair<tl::embedding::EmbeddingFormat, std::string> parse_embedding_arg(
    const std::string& arg) {
    auto colon = arg.find(':');
    if (colon == std::string::npos)
        throw tl::ConfigError("embedding must be FORMAT:PATH, got " + arg);
    auto fmt = tl::embedding::parse_embedding_format(arg.substr(0, colon));
    if (!fmt) throw tl::ConfigError("unknown embedding format in " + arg);
    return {*fmt, arg.substr(colon + 1)};
}

tl::preprocess::ZhWordlist load_zh_if(const std::string& path, tl::Language lang) {
    if (lang == tl::Language::Zh) {
        if (path.empty()) throw tl::ConfigError("chinese input needs --zh-wordlist");
        return tl::preprocess::ZhWordlist::load(path);
    }
    return {};
}

struct SplitArgs {
    double ratio = 0.8;
    std::uint64_t seed = 42;
    std::string part = "test";  // test | train | all
};

void add_split_options(CLI::App* cmd, SplitArgs& args, bool with_part) {
    cmd->add_option("--ratio", args.ratio, "train fraction of the split")
        ->check(CLI::Range(0.000001, 1.0));
    cmd->add_option("--seed", args.seed, "split / training seed");
    if (with_part)
        cmd->add_option("--part", args.part, "which part to evaluate: test, train or all")
            ->check(CLI::IsMember({"test", "train", "all"}));
}

nlohmann::json eval_report_wrapper(const tl::metrics::EvalReport& report, const SplitArgs& args,
                                   const std::string& model_name) {
    nlohmann::json j;
    j["model"] = model_name;
    j["split"] = {{"part", args.part}, {"ratio", args.ratio}, {"seed", args.seed}};
    j["report"] = tl::metrics::report_to_json(report);
    return j;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw tl::IOError("cannot write " + path);
    out << j.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multilingual tweet threat-detection toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand
    app.add_option("--log-level", g_log_level, "0 quiet, 1 info, 2 debug")
        ->check(CLI::Range(0, 2));

    // ---- label ----
    struct {
        std::string in, out, lexicon, lang, zh_wordlist;
    } label_args;
    auto* cmd_label = app.add_subcommand("label", "polarity-label a JSONL dataset");
    cmd_label->add_option("--in", label_args.in, "input JSONL")->required();
    cmd_label->add_option("--out", label_args.out, "output JSONL")->required();
    cmd_label->add_option("--lexicon", label_args.lexicon, "sentiment lexicon TSV")->required();
    cmd_label->add_option("--lang", label_args.lang, "language code")->required();
    cmd_label->add_option("--zh-wordlist", label_args.zh_wordlist, "zh segmentation wordlist");

    // ---- preprocess ----
    struct {
        std::string in, out, vocab_out, stopwords, lang, zh_wordlist;
        int maxlen = 500;
        int max_words = 5000;
        std::size_t min_tokens = 2;
    } prep_args;
    auto* cmd_prep = app.add_subcommand("preprocess", "clean, tokenize and pad a labeled dataset");
    cmd_prep->add_option("--in", prep_args.in)->required();
    cmd_prep->add_option("--out", prep_args.out, "tokens JSONL")->required();
    cmd_prep->add_option("--vocab-out", prep_args.vocab_out, "vocabulary JSON")->required();
    cmd_prep->add_option("--stopwords", prep_args.stopwords)->required();
    cmd_prep->add_option("--lang", prep_args.lang)->required();
    cmd_prep->add_option("--zh-wordlist", prep_args.zh_wordlist);
    cmd_prep->add_option("--maxlen", prep_args.maxlen);
    cmd_prep->add_option("--max-words", prep_args.max_words);
    cmd_prep->add_option("--min-tokens", prep_args.min_tokens);

    // ---- embed ----
    struct {
        std::string in, vocab, out, embedding, save_embedding, pooling = "mean";
        bool skipgram = false;
        std::size_t dim = 100;
        int window = 5, negatives = 5, epochs = 5;
        std::uint64_t seed = 1;
    } embed_args;
    auto* cmd_embed = app.add_subcommand("embed", "pool token sequences into fixed vectors");
    cmd_embed->add_option("--in", embed_args.in, "tokens JSONL")->required();
    cmd_embed->add_option("--vocab", embed_args.vocab, "vocabulary JSON")->required();
    cmd_embed->add_option("--out", embed_args.out, "encoded JSONL")->required();
    cmd_embed->add_option("--embedding", embed_args.embedding, "FORMAT:PATH embedding file");
    cmd_embed->add_flag("--skipgram", embed_args.skipgram, "train skip-gram on the input corpus");
    cmd_embed->add_option("--dim", embed_args.dim);
    cmd_embed->add_option("--window", embed_args.window);
    cmd_embed->add_option("--negatives", embed_args.negatives);
    cmd_embed->add_option("--epochs", embed_args.epochs);
    cmd_embed->add_option("--seed", embed_args.seed);
    cmd_embed->add_option("--pooling", embed_args.pooling)->check(CLI::IsMember({"mean", "max"}));
    cmd_embed->add_option("--save-embedding", embed_args.save_embedding,
                          "persist the table as Word2Vec text (useful with --skipgram)");

    // ---- train ----
    struct {
        std::string model, in, tokens, vocab, hidden, embedding, out;
        SplitArgs split;
        int epochs = -1;
        std::vector<std::size_t> layer_units;
        std::size_t batch_size = 0;
        double learning_rate = 0.0;
        std::size_t seq_len = 0;
        int num_trees = 0;
        int max_depth = 0;
    } train_args;
    auto* cmd_train = app.add_subcommand("train", "train one model on the train split");
    cmd_train->add_option("--model", train_args.model)
        ->required()
        ->check(CLI::IsMember({"lr", "dt", "rf", "birnf", "bilstm", "bigru", "llm-head"}));
    cmd_train->add_option("--in", train_args.in, "encoded JSONL (lr/dt/rf)");
    cmd_train->add_option("--tokens", train_args.tokens, "tokens JSONL (recurrent models)");
    cmd_train->add_option("--vocab", train_args.vocab, "vocabulary JSON (recurrent models)");
    cmd_train->add_option("--hidden", train_args.hidden, "hidden-state file (llm-head)");
    cmd_train->add_option("--embedding", train_args.embedding,
                          "FORMAT:PATH pretrained init (recurrent models)");
    cmd_train->add_option("--out", train_args.out, "model artifact path")->required();
    cmd_train->add_option("--epochs", train_args.epochs);
    cmd_train->add_option("--layer-units", train_args.layer_units);
    cmd_train->add_option("--batch-size", train_args.batch_size);
    cmd_train->add_option("--learning-rate", train_args.learning_rate);
    cmd_train->add_option("--seq-len", train_args.seq_len);
    cmd_train->add_option("--num-trees", train_args.num_trees);
    cmd_train->add_option("--max-depth", train_args.max_depth);
    add_split_options(cmd_train, train_args.split, false);

    // ---- eval ----
    struct {
        std::string model, in, tokens, vocab, hidden, report;
        bool table = false;
        SplitArgs split;
    } eval_args;
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained model on a split");
    cmd_eval->add_option("--model", eval_args.model, "model artifact")->required();
    cmd_eval->add_option("--in", eval_args.in, "encoded JSONL (lr/dt/rf)");
    cmd_eval->add_option("--tokens", eval_args.tokens, "tokens JSONL (recurrent models)");
    cmd_eval->add_option("--vocab", eval_args.vocab, "vocabulary JSON (recurrent models)");
    cmd_eval->add_option("--hidden", eval_args.hidden, "hidden-state file (llm-head)");
    cmd_eval->add_option("--report", eval_args.report, "report JSON output")->required();
    cmd_eval->add_flag("--table", eval_args.table, "also print the aligned metrics table");
    add_split_options(cmd_eval, eval_args.split, true);

    // ---- experiment ----
    struct {
        std::string config, out_dir;
        std::optional<std::uint64_t> seed;
    } exp_args;
    auto* cmd_exp = app.add_subcommand("experiment", "run a config-driven experiment");
    cmd_exp->add_option("--config", exp_args.config)->required();
    cmd_exp->add_option("--out-dir", exp_args.out_dir, "override the config out_dir");
    bool exp_stratify = false;
    cmd_exp->add_flag("--stratify-by-lang", exp_stratify,
                      "split each language separately in combined mode");
    std::uint64_t exp_seed_raw = 0;
    auto* exp_seed_opt = cmd_exp->add_option("--seed", exp_seed_raw, "override the config seed");

    // ---- export-fixtures ----
    tl::fixtures::FixtureConfig fix_cfg;
    auto* cmd_fix = app.add_subcommand("export-fixtures", "generate the synthetic corpus suite");
    cmd_fix->add_option("--out-dir", fix_cfg.out_dir)->required();
    cmd_fix->add_option("--tweets-per-lang", fix_cfg.tweets_per_lang);
    cmd_fix->add_option("--seed", fix_cfg.seed);
    cmd_fix->add_option("--dim", fix_cfg.dim);

    // ---- validate-config ----
    struct {
        std::string config;
    } val_args;
    auto* cmd_val = app.add_subcommand("validate-config", "check an experiment config");
    cmd_val->add_option("--config", val_args.config)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_label->parsed()) {
            const tl::Language lang = require_lang(label_args.lang);
            auto ds = tl::corpus::load_jsonl(label_args.in, lang);
            auto lex = tl::labeling::load_lexicon_tsv(label_args.lexicon, lang);
            auto zh = load_zh_if(label_args.zh_wordlist, lang);
            auto stats = tl::experiments::stage_label(ds, lex, lang, zh);
            tl::corpus::save_jsonl(ds, label_args.out);
            log_info("labeled " + std::to_string(ds.size()) + " records (" +
                     std::to_string(stats.unlabeled) + " left unlabeled)");
        } else if (cmd_prep->parsed()) {
            const tl::Language lang = require_lang(prep_args.lang);
            auto ds = tl::corpus::load_jsonl(prep_args.in, lang);
            tl::preprocess::StopwordLists stopwords;
            stopwords.load(lang, prep_args.stopwords);
            auto zh = load_zh_if(prep_args.zh_wordlist, lang);
            tl::preprocess::PreprocessConfig pc;
            pc.maxlen = prep_args.maxlen;
            pc.max_words = prep_args.max_words;
            pc.min_tokens = prep_args.min_tokens;
            auto processed =
                tl::preprocess::preprocess_dataset(tl::experiments::labeled_only(ds), lang, pc,
                                                   stopwords, zh);
            tl::experiments::save_processed_jsonl(processed, prep_args.out);
            tl::experiments::save_vocab_json(processed.vocab, lang, pc.maxlen,
                                             prep_args.vocab_out);
            log_info("kept " + std::to_string(processed.records.size()) + " records, dropped " +
                     std::to_string(processed.dropped.size()));
        } else if (cmd_embed->parsed()) {
            tl::Language lang = tl::Language::En;
            auto processed =
                tl::experiments::load_processed_jsonl(embed_args.in, embed_args.vocab);
            lang = processed.lang;
            tl::embedding::EmbeddingTable table;
            if (embed_args.skipgram) {
                std::vector<std::vector<std::string>> corpus;
                for (const auto& rec : processed.records) corpus.push_back(rec.tokens);
                tl::embedding::SkipgramConfig sc;
                sc.dim = embed_args.dim;
                sc.window = embed_args.window;
                sc.negatives = embed_args.negatives;
                sc.epochs = embed_args.epochs;
                sc.seed = embed_args.seed;
                table = tl::embedding::train_skipgram(corpus, sc, lang);
            } else if (!embed_args.embedding.empty()) {
                auto [fmt, path] = parse_embedding_arg(embed_args.embedding);
                table = tl::embedding::load_embeddings(path, fmt, lang);
            } else {
                throw tl::ConfigError("embed needs --embedding FORMAT:PATH or --skipgram");
            }
            if (!embed_args.save_embedding.empty())
                tl::embedding::save_word2vec_text(table, embed_args.save_embedding);
            auto pooling = *tl::embedding::parse_pooling(embed_args.pooling);
            auto encoded = tl::embedding::encode_dataset(processed, table, pooling);
            tl::experiments::save_encoded_jsonl(encoded, embed_args.out);
            log_info("encoded " + std::to_string(encoded.size()) + " records at d=" +
                     std::to_string(encoded.dim));
        } else if (cmd_train->parsed()) {
            const auto& m = train_args.model;
            if (m == "lr" || m == "dt" || m == "rf") {
                if (train_args.in.empty()) throw tl::ConfigError("--in is required for " + m);
                auto encoded = tl::experiments::load_encoded_jsonl(train_args.in);
                auto split = tl::corpus::split_records(encoded, train_args.split.ratio,
                                                       train_args.split.seed);
                split.train.dim = encoded.dim;
                if (m == "lr") {
                    auto model = tl::ml::lr_train(split.train);
                    tl::ml::save_model_json(tl::ml::lr_to_json(model), train_args.out);
                } else if (m == "dt") {
                    tl::ml::DTConfig dc;
                    if (train_args.max_depth > 0) dc.max_depth = train_args.max_depth;
                    auto model = tl::ml::dt_train(split.train, dc);
                    tl::ml::save_model_json(tl::ml::dt_to_json(model), train_args.out);
                } else {
                    tl::ml::RFConfig rc;
                    if (train_args.num_trees > 0) rc.num_trees = train_args.num_trees;
                    if (train_args.max_depth > 0) rc.tree.max_depth = train_args.max_depth;
                    rc.seed = train_args.split.seed;
                    auto model = tl::ml::rf_train(split.train, rc);
                    tl::ml::save_model_json(tl::ml::rf_to_json(model), train_args.out);
                }
            } else if (m == "llm-head") {
                if (train_args.hidden.empty()) throw tl::ConfigError("--hidden is required");
                auto batch = tl::llm::load_hidden_states(train_args.hidden);
                auto [train_b, test_b] = tl::experiments::split_hidden_states(
                    batch, train_args.split.ratio, train_args.split.seed);
                tl::llm::HeadConfig hc;
                hc.seed = train_args.split.seed;
                if (train_args.epochs >= 0) hc.epochs = train_args.epochs;
                if (train_args.batch_size > 0) hc.batch_size = train_args.batch_size;
                if (train_args.learning_rate > 0) hc.learning_rate = train_args.learning_rate;
                auto [model, trace] = tl::llm::head_train(train_b, hc, &test_b);
                tl::llm::save_head(model, train_args.out);
            } else {
                if (train_args.tokens.empty() || train_args.vocab.empty())
                    throw tl::ConfigError("--tokens and --vocab are required for " + m);
                auto processed =
                    tl::experiments::load_processed_jsonl(train_args.tokens, train_args.vocab);
                auto split = tl::corpus::split_records(processed, train_args.split.ratio,
                                                       train_args.split.seed);
                auto train_dl = tl::dl::dataset_from_processed(split.train);
                auto test_dl = tl::dl::dataset_from_processed(split.test);

                tl::dl::NetworkConfig nc;
                nc.arch = *tl::dl::parse_arch(m);
                nc.seed = train_args.split.seed;
                if (train_args.epochs >= 0) nc.epochs = train_args.epochs;
                if (!train_args.layer_units.empty()) nc.layer_units = train_args.layer_units;
                if (train_args.batch_size > 0) nc.batch_size = train_args.batch_size;
                if (train_args.learning_rate > 0) nc.learning_rate = train_args.learning_rate;
                if (train_args.seq_len > 0) nc.seq_len = train_args.seq_len;
                nc.num_classes = tl::dl::detail::classes_of(train_dl.labels).size();

                const tl::embedding::EmbeddingTable* init = nullptr;
                tl::embedding::EmbeddingTable table;
                if (!train_args.embedding.empty()) {
                    auto [fmt, path] = parse_embedding_arg(train_args.embedding);
                    table = tl::embedding::load_embeddings(path, fmt, processed.lang);
                    nc.embed_dim = table.dim();
                    init = &table;
                }
                auto model = tl::dl::build_network(nc, &processed.vocab, init);
                auto trace = tl::dl::train(model, train_dl, test_dl);
                tl::dl::save_weights(model, train_args.out);
                tl::dl::save_trace_csv(trace, train_args.out + ".trace.csv");
            }
            log_info("saved model to " + train_args.out);
        } else if (cmd_eval->parsed()) {
            const SplitArgs& sp = eval_args.split;
            tl::metrics::EvalReport report;
            std::string model_name;

            auto pick_part = [&](auto&& split) {
                if (sp.part == "train") return std::move(split.train);
                if (sp.part == "test") return std::move(split.test);
                auto all = std::move(split.train);
                all.records.insert(all.records.end(), split.test.records.begin(),
                                   split.test.records.end());
                return all;
            };

            if (!eval_args.hidden.empty()) {
                auto model = tl::llm::load_head(eval_args.model);
                model_name = "llm_head";
                auto batch = tl::llm::load_hidden_states(eval_args.hidden);
                auto [train_b, test_b] =
                    tl::experiments::split_hidden_states(batch, sp.ratio, sp.seed);
                const auto& use = sp.part == "train" ? train_b : test_b;
                auto eval = tl::llm::head_evaluate(model, use);
                report = tl::metrics::report(
                    tl::metrics::confusion(tl::llm::batch_labels(use), eval.predictions));
                report.loss = eval.loss;
            } else if (!eval_args.tokens.empty()) {
                auto model = tl::dl::load_weights(eval_args.model);
                model_name = tl::dl::to_string(model.cfg.arch);
                auto processed =
                    tl::experiments::load_processed_jsonl(eval_args.tokens, eval_args.vocab);
                auto part = pick_part(tl::corpus::split_records(processed, sp.ratio, sp.seed));
                auto data = tl::dl::dataset_from_processed(part);
                auto eval = tl::dl::evaluate(model, data);
                report =
                    tl::metrics::report(tl::metrics::confusion(data.labels, eval.predictions));
                report.loss = eval.loss;
            } else if (!eval_args.in.empty()) {
                auto j = tl::ml::load_model_json(eval_args.model);
                const std::string type = j.at("model_type").get<std::string>();
                model_name = type;
                auto encoded = tl::experiments::load_encoded_jsonl(eval_args.in);
                auto part = pick_part(tl::corpus::split_records(encoded, sp.ratio, sp.seed));
                std::vector<tl::Label> y_true, y_pred;
                for (const auto& rec : part.records) y_true.push_back(rec.label);
                if (type == "lr") {
                    auto model = tl::ml::lr_from_json(j);
                    for (const auto& rec : part.records)
                        y_pred.push_back(tl::ml::lr_predict(model, rec.vec).label);
                } else if (type == "dt") {
                    auto model = tl::ml::dt_from_json(j);
                    for (const auto& rec : part.records)
                        y_pred.push_back(tl::ml::dt_predict(model, rec.vec));
                } else if (type == "rf") {
                    auto model = tl::ml::rf_from_json(j);
                    for (const auto& rec : part.records)
                        y_pred.push_back(tl::ml::rf_predict(model, rec.vec));
                } else {
                    throw tl::DataError("unsupported model type in file: " + type);
                }
                report = tl::metrics::report(tl::metrics::confusion(y_true, y_pred));
            } else {
                throw tl::ConfigError("eval needs --in, --tokens or --hidden");
            }

            write_json(eval_report_wrapper(report, sp, model_name), eval_args.report);
            if (eval_args.table) std::cout << tl::metrics::report_table(report, model_name);
            log_info("report written to " + eval_args.report);
        } else if (cmd_exp->parsed()) {
            auto cfg = tl::experiments::load_config(exp_args.config);
            if (!exp_args.out_dir.empty()) cfg.out_dir = exp_args.out_dir;
            if (exp_seed_opt->count() > 0) cfg.seed = exp_seed_raw;
            if (exp_stratify) cfg.stratify_by_lang = true;
            auto rr = tl::experiments::run_experiment(cfg);
            for (const auto& r : rr.results)
                std::cout << tl::metrics::report_table(r.report, r.name);
            log_info("experiment finished; outputs in " + cfg.out_dir);
        } else if (cmd_fix->parsed()) {
            auto paths = tl::fixtures::export_fixtures(fix_cfg);
            log_info("fixtures written under " + fix_cfg.out_dir);
            std::cout << paths.combined_config << "\n";
        } else if (cmd_val->parsed()) {
            auto cfg = tl::experiments::load_config(val_args.config);
            tl::experiments::validate_config(cfg);
            std::cout << "config ok: mode="
                      << (cfg.mode == tl::experiments::ExperimentConfig::Mode::SingleLanguage
                              ? "single"
                              : "combined")
                      << " languages=" << cfg.languages.size()
                      << " models=" << cfg.models.size() << "\n";
        }
    } catch (const tl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const tl::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
