// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code = number of
// failing criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "testutil.hpp"
#include "threatlens/experiments.hpp"
#include "threatlens/fixtures.hpp"

using namespace threatlens;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    void require_near(double a, double b, double tol, const std::string& what) {
        if (!(std::abs(a - b) <= tol)) {
            std::ostringstream os;
            os << what << " (" << a << " vs " << b << ", tol " << tol << ")";
            failures.push_back(os.str());
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// 1. Gradient fidelity: exact backprop vs central finite differences for all
//    three cell types (both directions inside the bidirectional layers) and
//    the llm head, rel. err < 1e-4, whole criterion under 60 s.
// ---------------------------------------------------------------------------
void criterion_gradients(Check& c) {
    auto t0 = std::chrono::steady_clock::now();
    for (auto cell : {nn::CellKind::Rnn, nn::CellKind::Lstm, nn::CellKind::Gru}) {
        nn::Network net;
        net.add<nn::EmbeddingLayer>(8, 4, "emb");
        net.add<nn::BiRecurrentLayer>(cell, 4, 3, true, "l0");
        net.add<nn::DenseLayer>(6, 4, true, "d0");
        net.add<nn::BiRecurrentLayer>(cell, 4, 2, false, "l1");
        net.add<nn::DenseLayer>(4, 3, false, "out");
        net.init(101 + static_cast<std::uint64_t>(cell));
        tltest::randomize_biases(net, 7 + static_cast<std::uint64_t>(cell));
        c.require(net.param_count() <= 500,
                  std::string(nn::to_string(cell)) + " net exceeds 500 params");

        nn::TokenBatch tokens(2, 4);
        int vals[2][4] = {{1, 2, 3, 4}, {5, 6, 7, 0}};
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t t = 0; t < 4; ++t) tokens.at(b, t) = vals[b][t];
        auto res = tltest::finite_difference_check(
            net, nn::Activation::from_tokens(tokens), {0, 2});
        std::ostringstream os;
        os << nn::to_string(cell) << " max rel err " << res.max_rel_err;
        c.require(res.max_rel_err < 1e-4, os.str());
    }
    {
        nn::Network head;
        head.add<nn::DenseLayer>(6, 5, true, "d0");
        head.add<nn::DenseLayer>(5, 4, true, "d1");
        head.add<nn::DenseLayer>(4, 3, true, "d2");
        head.add<nn::DenseLayer>(3, 3, false, "out");
        head.init(55);
        tltest::randomize_biases(head, 19);
        c.require(head.param_count() <= 500, "head net exceeds 500 params");
        nn::Mat x(3, 6);
        Rng rng(9);
        for (auto& v : x.v) v = rng.uniform(-1.5, 1.5);
        auto res = tltest::finite_difference_check(head, nn::Activation::from_flat(x), {0, 1, 2});
        std::ostringstream os;
        os << "llm head max rel err " << res.max_rel_err;
        c.require(res.max_rel_err < 1e-4, os.str());
    }
    double secs = seconds_since(t0);
    c.require(secs < 60.0, "gradient suite took " + std::to_string(secs) + " s (budget 60)");
}

// ---------------------------------------------------------------------------
// 2. Oracle equivalence: rf_predict vs brute-force voting on 1,000 random
//    (forest, point) cases; metrics vs hand-counted TP/FP/FN on 100 random
//    confusion matrices; weighted recall == accuracy on all of them.
// ---------------------------------------------------------------------------
void criterion_oracles(Check& c) {
    Rng rng(4242);
    corpus::EncodedDataset pool;
    pool.dim = 3;
    for (int i = 0; i < 40; ++i) {
        corpus::EncodedRecord rec;
        rec.id = std::to_string(i);
        rec.vec = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        rec.label = label_from_index(static_cast<int>(i % 3));
        pool.records.push_back(rec);
    }

    int forest_mismatches = 0;
    const int kForests = 50, kPointsPer = 20;  // 1,000 cases
    for (int f = 0; f < kForests; ++f) {
        ml::RFConfig cfg;
        cfg.num_trees = 1 + static_cast<int>(rng.below(9));
        cfg.seed = rng.next_u64();
        cfg.tree.max_depth = 4;
        auto forest = ml::rf_train(pool, cfg);
        for (int p = 0; p < kPointsPer; ++p) {
            std::vector<double> x = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
            std::array<std::size_t, kNumLabels> votes{};
            for (const auto& tree : forest.trees)
                ++votes[static_cast<std::size_t>(label_index(ml::dt_predict(tree, x)))];
            std::size_t best = 0;
            for (std::size_t k = 1; k < votes.size(); ++k)
                if (votes[k] > votes[best]) best = k;
            if (ml::rf_predict(forest, x) != label_from_index(static_cast<int>(best)))
                ++forest_mismatches;
        }
    }
    c.require(forest_mismatches == 0,
              "rf_predict disagreed with brute-force voting on " +
                  std::to_string(forest_mismatches) + "/1000 cases");

    int metric_failures = 0;
    for (int trial = 0; trial < 100; ++trial) {
        metrics::ConfusionMatrix cm;
        for (int i = 0; i < kNumLabels; ++i)
            for (int j = 0; j < kNumLabels; ++j)
                cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    rng.below(25);
        if (cm.total() == 0) cm.counts[0][0] = 1;
        auto rep = metrics::report(cm);

        // Independent hand-count recomputation.
        double total = static_cast<double>(cm.total());
        double diag = 0.0;
        double pma = 0, rma = 0, fma = 0, pwa = 0, rwa = 0, fwa = 0;
        int present = 0;
        bool ok = true;
        for (int cls = 0; cls < kNumLabels; ++cls) {
            double tp = static_cast<double>(
                cm.counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(cls)]);
            double fp = 0, fn = 0;
            for (int o = 0; o < kNumLabels; ++o) {
                if (o == cls) continue;
                fp += static_cast<double>(
                    cm.counts[static_cast<std::size_t>(o)][static_cast<std::size_t>(cls)]);
                fn += static_cast<double>(
                    cm.counts[static_cast<std::size_t>(cls)][static_cast<std::size_t>(o)]);
            }
            diag += tp;
            double prec = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
            double rec = (tp + fn) > 0 ? tp / (tp + fn) : 0.0;
            double f1 = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
            const auto& m = rep.per_class[static_cast<std::size_t>(cls)];
            ok = ok && std::abs(m.precision - prec) < 1e-12 && std::abs(m.recall - rec) < 1e-12 &&
                 std::abs(m.f1 - f1) < 1e-12;
            double support = tp + fn;
            if (support > 0) {
                ++present;
                pma += prec;
                rma += rec;
                fma += f1;
                pwa += support * prec;
                rwa += support * rec;
                fwa += support * f1;
            }
        }
        ok = ok && std::abs(rep.accuracy - diag / total) < 1e-12;
        ok = ok && std::abs(rep.precision_macro - pma / present) < 1e-12;
        ok = ok && std::abs(rep.recall_macro - rma / present) < 1e-12;
        ok = ok && std::abs(rep.f1_macro - fma / present) < 1e-12;
        ok = ok && std::abs(rep.precision_weighted - pwa / total) < 1e-12;
        ok = ok && std::abs(rep.recall_weighted - rwa / total) < 1e-12;
        ok = ok && std::abs(rep.f1_weighted - fwa / total) < 1e-12;
        ok = ok && std::abs(rep.recall_weighted - rep.accuracy) < 1e-12;  // identity
        if (!ok) ++metric_failures;
    }
    c.require(metric_failures == 0,
              "metrics disagreed with hand counts on " + std::to_string(metric_failures) +
                  "/100 matrices");
}

// ---------------------------------------------------------------------------
// 3. Labeling exactness: polarity mean, the threshold boundary grid, and all
//    nine manual-override pairs.
// ---------------------------------------------------------------------------
void criterion_labeling(Check& c) {
    labeling::SentimentLexicon lex(Language::En);
    lex.add("neg", -1.0);
    lex.add("pos", 1.0);
    auto res = labeling::polarity({"neg", "neg", "off"}, lex);
    c.require_near(res.value, -2.0 / 3.0, 1e-12, "polarity mean");
    c.require(res.label == Label::Threat, "polarity label at -2/3");

    const double eps = 1e-9;
    const std::pair<double, Label> grid[] = {
        {-1.0, Label::Threat},      {-0.5 - eps, Label::Threat}, {-0.5, Label::Threat},
        {0.0, Label::Neutral},      {0.5 - eps, Label::Neutral}, {0.5, Label::NonThreat},
        {1.0, Label::NonThreat},
    };
    for (const auto& [p, expected] : grid) {
        std::ostringstream os;
        os << "threshold grid at p=" << p;
        c.require(labeling::polarity_label(p) == expected, os.str());
    }

    const Label all[] = {Label::Threat, Label::Neutral, Label::NonThreat};
    for (Label manual : all)
        for (Label auto_label : all)
            c.require(labeling::reconcile(manual, auto_label) == manual,
                      "manual override pair failed");
    for (Label auto_label : all)
        c.require(labeling::reconcile(std::nullopt, auto_label) == auto_label,
                  "absent-manual pair failed");
}

// ---------------------------------------------------------------------------
// 4. Preprocessing contracts over 10,000 generated strings: clean_text
//    idempotence, OOV mapping, pad length and truncation.
// ---------------------------------------------------------------------------
void criterion_preprocessing(Check& c) {
    Rng rng(777);
    static const std::vector<std::string> parts = {
        "storm",         "attack",        "мир",     "угроза",  "سلام",       "هجوم",
        "和平",          "威胁",          "@user",   "#tag",    "http://a.b", "https://x.y/z?q=1",
        "www.site.com",  "punct!uation", "mixed,да", "a+b=c",  "«q»",        "e☀e",
        "trailing...",   "semi;colon"};
    int idempotence_failures = 0;
    for (int i = 0; i < 10000; ++i) {
        std::string raw;
        const std::size_t n = rng.below(8);
        for (std::size_t k = 0; k < n; ++k) {
            if (k) raw += rng.below(4) == 0 ? "  " : " ";
            raw += parts[rng.below(parts.size())];
        }
        auto once = preprocess::clean_text(raw, Language::En);
        auto twice = preprocess::clean_text(once.text, Language::En);
        if (once.text != twice.text) ++idempotence_failures;
    }
    c.require(idempotence_failures == 0,
              "clean_text not idempotent on " + std::to_string(idempotence_failures) +
                  "/10000 strings");

    auto vocab = preprocess::build_vocab({{"alpha", "beta", "gamma"}}, 5000);
    int tokenize_failures = 0, pad_failures = 0;
    std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "epsilon", "зета"};
    for (int i = 0; i < 10000; ++i) {
        std::vector<std::string> tokens;
        const std::size_t n = rng.below(700);
        tokens.reserve(n);
        for (std::size_t k = 0; k < n; ++k) tokens.push_back(words[rng.below(words.size())]);
        auto ids = preprocess::tokenize(tokens, vocab);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            bool known = vocab.word_to_index.count(tokens[k]) > 0;
            if (known && ids[k] < 2) ++tokenize_failures;
            if (!known && ids[k] != preprocess::Vocabulary::oov_index) ++tokenize_failures;
            if (ids[k] == preprocess::Vocabulary::pad_index) ++tokenize_failures;
        }
        auto padded = preprocess::pad(ids, 500);
        if (padded.indices.size() != 500) ++pad_failures;
        if (ids.size() >= 500) {
            for (std::size_t k = 0; k < 500; ++k)
                if (padded.indices[k] != ids[k]) ++pad_failures;  // first 500 kept
        } else {
            for (std::size_t k = ids.size(); k < 500; ++k)
                if (padded.indices[k] != 0) ++pad_failures;
        }
    }
    c.require(tokenize_failures == 0,
              "tokenize OOV contract failed " + std::to_string(tokenize_failures) + " times");
    c.require(pad_failures == 0,
              "pad length/truncation contract failed " + std::to_string(pad_failures) + " times");
}

// ---------------------------------------------------------------------------
// 5 & 6. Synthetic end-to-end (400 tweets per language, both modes, accuracy
//    floors, < 10 minutes) and byte-identical determinism of reruns.
// ---------------------------------------------------------------------------
void criterion_end_to_end(Check& c, bool& determinism_ok, std::string& determinism_msg) {
    auto t0 = std::chrono::steady_clock::now();
    tltest::TempDir dir("acceptance_e2e");

    fixtures::FixtureConfig fix;
    fix.out_dir = dir.file("fixtures");
    fix.tweets_per_lang = 400;
    fix.seed = 7;
    fix.dim = 24;
    fix.hidden_records = 400;
    fix.hidden_width = 16;
    fix.hidden_len = 8;
    auto paths = fixtures::export_fixtures(fix);

    for (Language lang : all_languages()) {
        auto cfg = experiments::load_config(paths.single_configs.at(lang));
        cfg.out_dir = dir.file(std::string("single_") + to_string(lang));
        auto rr = experiments::run_single_language(cfg);
        for (const auto& result : rr.results) {
            std::ostringstream os;
            os << to_string(lang) << "/" << result.name << " accuracy "
               << result.report.accuracy << " < 0.90";
            c.require(result.report.accuracy >= 0.90, os.str());
        }
    }

    auto combined_cfg = experiments::load_config(paths.combined_config);
    combined_cfg.out_dir = dir.file("combined_a");
    auto combined = experiments::run_combined(combined_cfg);
    double bilstm_acc = -1;
    for (const auto& result : combined.results)
        if (result.name == "bilstm8") bilstm_acc = result.report.accuracy;
    std::ostringstream os;
    os << "combined bilstm8 accuracy " << bilstm_acc << " < 0.90";
    c.require(bilstm_acc >= 0.90, os.str());

    // Criterion 6: a second run of the same experiment config and seed must
    // reproduce the report files byte for byte.
    combined_cfg.out_dir = dir.file("combined_b");
    experiments::run_combined(combined_cfg);
    std::string a = tltest::read_file(dir.file("combined_a") + "/report.json");
    std::string b = tltest::read_file(dir.file("combined_b") + "/report.json");
    std::string at = tltest::read_file(dir.file("combined_a") + "/report.txt");
    std::string bt = tltest::read_file(dir.file("combined_b") + "/report.txt");
    determinism_ok = !a.empty() && a == b && at == bt;
    determinism_msg = determinism_ok ? "" : "rerun reports differ";

    double secs = seconds_since(t0);
    c.require(secs < 600.0, "end-to-end took " + std::to_string(secs) + " s (budget 600)");
}

// ---------------------------------------------------------------------------
// 7. Format fidelity: embedding formats round-trip hand-written fixtures
//    bit-exactly; the hidden-state container round-trips through its writer.
// ---------------------------------------------------------------------------
void criterion_formats(Check& c) {
    tltest::TempDir dir("acceptance_fmt");

    const std::string w2v_text = "3 2\nalpha 1 -2.5\nbeta 0.25 4\ngamma -0.125 8\n";
    tltest::write_file(dir.file("a.txt"), w2v_text);
    auto t1 = embedding::load_word2vec_text(dir.file("a.txt"), Language::En);
    embedding::save_word2vec_text(t1, dir.file("a_out.txt"));
    c.require(tltest::read_file(dir.file("a_out.txt")) == w2v_text,
              "word2vec text round-trip differs");

    std::string bin = "2 2\nhi ";
    const float v1[2] = {1.5f, -2.0f};
    bin.append(reinterpret_cast<const char*>(v1), sizeof(v1));
    bin += "yo ";
    const float v2[2] = {0.0f, 3.25f};
    bin.append(reinterpret_cast<const char*>(v2), sizeof(v2));
    tltest::write_file(dir.file("b.bin"), bin);
    auto t2 = embedding::load_word2vec_binary(dir.file("b.bin"), Language::En);
    embedding::save_word2vec_binary(t2, dir.file("b_out.bin"));
    c.require(tltest::read_file(dir.file("b_out.bin")) == bin,
              "word2vec binary round-trip differs");

    const std::string glove = "кот 0.5 -1 2\nпёс 3 4.5 -6\n";
    tltest::write_file(dir.file("g.txt"), glove);
    auto t3 = embedding::load_glove_text(dir.file("g.txt"), Language::Ru);
    embedding::save_glove_text(t3, dir.file("g_out.txt"));
    c.require(tltest::read_file(dir.file("g_out.txt")) == glove, "glove round-trip differs");

    auto batch = fixtures::make_hidden_states(8, 5, 6, 99);
    llm::write_hidden_states(batch, dir.file("h.hsb"));
    auto loaded = llm::load_hidden_states(dir.file("h.hsb"));
    bool same = loaded.n == batch.n && loaded.max_len == batch.max_len && loaded.h == batch.h &&
                loaded.hidden == batch.hidden && loaded.mask == batch.mask &&
                loaded.labels == batch.labels;
    llm::write_hidden_states(loaded, dir.file("h2.hsb"));
    same = same && tltest::read_file(dir.file("h.hsb")) == tltest::read_file(dir.file("h2.hsb"));
    c.require(same, "hidden-state container round-trip differs");
}

// ---------------------------------------------------------------------------
// 8. Skip-gram sanity: co-occurring pairs beat cross pairs in >= 9/10 seeds.
// ---------------------------------------------------------------------------
void criterion_skipgram(Check& c) {
    std::vector<std::vector<std::string>> corpus;
    for (int i = 0; i < 100; ++i) {
        corpus.push_back({"a", "b", "a", "b", "a", "b"});
        corpus.push_back({"c", "d", "c", "d", "c", "d"});
    }
    auto cosine = [](const std::vector<float>& x, const std::vector<float>& y) {
        double dot = 0, nx = 0, ny = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            dot += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        return dot / (std::sqrt(nx) * std::sqrt(ny) + 1e-12);
    };
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto table = embedding::train_skipgram(corpus, 8, 2, 5, 5, seed);
        if (cosine(*table.find("a"), *table.find("b")) >
            cosine(*table.find("a"), *table.find("c")))
            ++wins;
    }
    c.require(wins >= 9, "paired-word cosine beat cross-pair in only " + std::to_string(wins) +
                             "/10 seeds");
}

struct Criterion {
    int id;
    std::string name;
    std::function<void(Check&)> run;
};

}  // namespace

int main() {
    int failures = 0;
    bool determinism_ok = false;
    std::string determinism_msg = "end-to-end criterion did not run";

    std::vector<Criterion> criteria = {
        {1, "gradient fidelity (backprop vs central finite differences, rel err < 1e-4)",
         criterion_gradients},
        {2, "oracle equivalence (rf voting x1000, metrics hand counts x100, RWA==accuracy)",
         criterion_oracles},
        {3, "labeling exactness (polarity mean, threshold grid, 9 override pairs)",
         criterion_labeling},
        {4, "preprocessing contracts (idempotence, OOV, padding over 10k strings)",
         criterion_preprocessing},
        {5, "synthetic end-to-end (4 languages, both modes, >=90% floors, <10 min)",
         [&](Check& c) { criterion_end_to_end(c, determinism_ok, determinism_msg); }},
        // 6 is evaluated inside 5's runs and reported after it.
        {7, "format fidelity (w2v text/bin, glove, hidden-state container round-trips)",
         criterion_formats},
        {8, "skip-gram sanity (cosine of co-occurring pairs, >=9/10 seeds)",
         criterion_skipgram},
    };

    for (const auto& criterion : criteria) {
        Check check;
        auto t0 = std::chrono::steady_clock::now();
        try {
            criterion.run(check);
        } catch (const std::exception& e) {
            check.failures.push_back(std::string("exception: ") + e.what());
        }
        const double secs = seconds_since(t0);
        if (check.failures.empty()) {
            std::printf("[PASS] criterion %d: %s (%.1fs)\n", criterion.id,
                        criterion.name.c_str(), secs);
        } else {
            ++failures;
            std::printf("[FAIL] criterion %d: %s (%.1fs)\n", criterion.id,
                        criterion.name.c_str(), secs);
            for (const auto& f : check.failures) std::printf("       - %s\n", f.c_str());
        }
        if (criterion.id == 5) {
            if (determinism_ok) {
                std::printf("[PASS] criterion 6: determinism (rerun reports byte-identical)\n");
            } else {
                ++failures;
                std::printf("[FAIL] criterion 6: determinism (%s)\n", determinism_msg.c_str());
            }
        }
    }

    std::printf("%d criterion(s) failed\n", failures);
    return failures;
}
