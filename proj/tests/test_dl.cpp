#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "testutil.hpp"
#include "threatlens/dl.hpp"

using namespace threatlens;

namespace {

nn::Activation seq_input(const std::vector<std::vector<std::vector<double>>>& data) {
    nn::Seq seq(data.size(), data[0].size(), data[0][0].size());
    for (std::size_t b = 0; b < seq.batch; ++b)
        for (std::size_t t = 0; t < seq.steps; ++t)
            for (std::size_t f = 0; f < seq.feat; ++f) seq.at(b, t, f) = data[b][t][f];
    return nn::Activation::from_seq(std::move(seq));
}

nn::Activation token_input(const std::vector<std::vector<int>>& rows) {
    nn::TokenBatch batch(rows.size(), rows[0].size());
    for (std::size_t b = 0; b < batch.batch; ++b)
        for (std::size_t t = 0; t < batch.steps; ++t) batch.at(b, t) = rows[b][t];
    return nn::Activation::from_tokens(std::move(batch));
}

void set_all(nn::Param& p, double v) { std::fill(p.value.begin(), p.value.end(), v); }

// Class-exclusive keyword corpus: indices 2..4 class 0, 5..7 class 1,
// 8..10 class 2.
dl::DlDataset keyword_corpus(std::size_t n, std::size_t seq_len, std::uint64_t seed) {
    dl::DlDataset ds;
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        int cls = static_cast<int>(i % 3);
        std::vector<int> seq;
        std::size_t len = 4 + rng.below(4);
        for (std::size_t t = 0; t < len && t < seq_len; ++t)
            seq.push_back(2 + cls * 3 + static_cast<int>(rng.below(3)));
        seq.resize(seq_len, 0);
        ds.seqs.push_back(std::move(seq));
        ds.labels.push_back(label_from_index(cls));
    }
    return ds;
}

preprocess::Vocabulary vocab_of(std::size_t words) {
    preprocess::Vocabulary v;
    for (std::size_t i = 0; i < words; ++i) {
        v.words_by_rank.push_back("w" + std::to_string(i));
        v.word_to_index["w" + std::to_string(i)] = static_cast<int>(i) + 2;
    }
    return v;
}

}  // namespace

TEST(Network, SoftmaxOfZeroWeightsIsUniform) {
    nn::Network net;
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Lstm, 3, 2, false, "l0");
    net.add<nn::DenseLayer>(4, 3, false, "out");
    net.init(7);
    for (auto* p : net.params()) set_all(*p, 0.0);
    auto [probs, cache] = net.forward(seq_input({{{1, 2, 3}, {0, 1, 0}}}), false, 0);
    (void)cache;
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(probs.at(0, j), 1.0 / 3.0, 1e-12);
}

TEST(Network, SoftmaxRowsSumToOne) {
    nn::Network net;
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Gru, 3, 4, false, "l0");
    net.add<nn::DenseLayer>(8, 3, false, "out");
    net.init(21);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::vector<std::vector<double>>> data(
            2, std::vector<std::vector<double>>(4, std::vector<double>(3)));
        for (auto& b : data)
            for (auto& t : b)
                for (auto& f : t) f = rng.uniform(-2, 2);
        auto [probs, cache] = net.forward(seq_input(data), false, 0);
        (void)cache;
        for (std::size_t i = 0; i < probs.rows; ++i) {
            double sum = 0;
            for (std::size_t j = 0; j < probs.cols; ++j) {
                sum += probs.at(i, j);
                EXPECT_GE(probs.at(i, j), 0.0);
            }
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
    }
}

TEST(Network, EvalForwardDeterministic) {
    nn::Network net;
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Rnn, 2, 3, true, "l0");
    net.add<nn::DenseLayer>(6, 4, true, "d0");
    net.add<nn::DropoutLayer>(0.4, "drop");
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Lstm, 4, 2, false, "l1");
    net.add<nn::DenseLayer>(4, 3, false, "out");
    net.init(3);
    auto input = seq_input({{{0.5, -1}, {2, 0.25}, {-0.75, 1}}});
    auto [p1, c1] = net.forward(input, false, 111);
    auto [p2, c2] = net.forward(input, false, 222);
    (void)c1;
    (void)c2;
    EXPECT_EQ(p1.v, p2.v);
}

// Step-by-step recurrence computed independently, double precision.
TEST(Network, TinyBiRnnMatchesHandRecurrence) {
    nn::BiRecurrentLayer layer(nn::CellKind::Rnn, 2, 2, true, "l0");
    auto params = layer.params();  // fwd: Wx, Wh, b; bwd: Wx, Wh, b
    const std::vector<double> wx_f = {0.3, -0.2, 0.1, 0.4};
    const std::vector<double> wh_f = {0.05, -0.1, 0.2, 0.15};
    const std::vector<double> b_f = {0.01, -0.02};
    const std::vector<double> wx_b = {-0.25, 0.35, 0.2, -0.05};
    const std::vector<double> wh_b = {0.12, 0.08, -0.3, 0.22};
    const std::vector<double> b_b = {0.0, 0.05};
    params[0]->value = wx_f;
    params[1]->value = wh_f;
    params[2]->value = b_f;
    params[3]->value = wx_b;
    params[4]->value = wh_b;
    params[5]->value = b_b;

    const std::vector<std::vector<double>> x = {{1.0, 0.5}, {-0.5, 0.25}, {0.75, -1.0}};
    Rng rng(0);
    auto out = layer.forward(seq_input({x}), false, rng);
    ASSERT_EQ(out.kind, nn::Activation::Kind::Seq);

    auto cell = [](const std::vector<double>& xt, const std::vector<double>& h,
                   const std::vector<double>& wx, const std::vector<double>& wh,
                   const std::vector<double>& b) {
        std::vector<double> out(2);
        for (int u = 0; u < 2; ++u) {
            double z = b[static_cast<std::size_t>(u)];
            for (int i = 0; i < 2; ++i) {
                z += xt[static_cast<std::size_t>(i)] * wx[static_cast<std::size_t>(i * 2 + u)];
                z += h[static_cast<std::size_t>(i)] * wh[static_cast<std::size_t>(i * 2 + u)];
            }
            out[static_cast<std::size_t>(u)] = std::tanh(z);
        }
        return out;
    };

    std::vector<std::vector<double>> hf(3), hb(3);
    std::vector<double> state = {0, 0};
    for (int t = 0; t < 3; ++t) {
        state = cell(x[static_cast<std::size_t>(t)], state, wx_f, wh_f, b_f);
        hf[static_cast<std::size_t>(t)] = state;
    }
    state = {0, 0};
    for (int t = 2; t >= 0; --t) {
        state = cell(x[static_cast<std::size_t>(t)], state, wx_b, wh_b, b_b);
        hb[static_cast<std::size_t>(t)] = state;
    }
    for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t u = 0; u < 2; ++u) {
            EXPECT_NEAR(out.seq.at(0, t, u), hf[t][u], 1e-12);
            EXPECT_NEAR(out.seq.at(0, t, 2 + u), hb[t][u], 1e-12);
        }
}

TEST(Gradients, AllCellsPassFiniteDifferenceCheck) {
    for (auto cell : {nn::CellKind::Rnn, nn::CellKind::Lstm, nn::CellKind::Gru}) {
        nn::Network net;
        net.add<nn::EmbeddingLayer>(8, 4, "emb");
        net.add<nn::BiRecurrentLayer>(cell, 4, 3, true, "l0");
        net.add<nn::DenseLayer>(6, 4, true, "d0");
        net.add<nn::BiRecurrentLayer>(cell, 4, 2, false, "l1");
        net.add<nn::DenseLayer>(4, 3, false, "out");
        net.init(17);
        tltest::randomize_biases(net, 3 + static_cast<std::uint64_t>(cell));
        ASSERT_LE(net.param_count(), 500u) << nn::to_string(cell);

        auto input = token_input({{1, 2, 3, 4}, {5, 6, 0, 0}});
        auto res = tltest::finite_difference_check(net, input, {0, 2});
        EXPECT_LT(res.max_rel_err, 1e-4) << nn::to_string(cell);
        EXPECT_GT(res.checked, 0u);
    }
}

TEST(Gradients, NearZeroAtPerfectFit) {
    nn::Network net;
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Rnn, 2, 2, false, "l0");
    auto* out_dense = net.add<nn::DenseLayer>(4, 2, false, "out");
    net.init(9);
    // Saturate the true class logit via the output bias.
    auto params = out_dense->params();
    params[1]->value = {50.0, -50.0};
    auto input = seq_input({{{0.1, 0.2}}});
    auto [probs, cache] = net.forward(input, true, 0);
    EXPECT_GT(probs.at(0, 0), 0.999999);
    net.backward({0}, cache);
    for (auto* p : net.params())
        for (double g : p->grad) EXPECT_LT(std::abs(g), 1e-8);
}

TEST(Gradients, DuplicatedBatchKeepsMeanGradient) {
    nn::Network net;
    net.add<nn::BiRecurrentLayer>(nn::CellKind::Gru, 2, 3, false, "l0");
    net.add<nn::DenseLayer>(6, 3, false, "out");
    net.init(13);

    auto single = seq_input({{{0.4, -0.3}, {1.0, 0.2}}, {{-0.5, 0.8}, {0.1, 0.1}}});
    auto [p1, c1] = net.forward(single, true, 0);
    (void)p1;
    net.backward({0, 2}, c1);
    std::vector<std::vector<double>> grads;
    for (auto* p : net.params()) grads.push_back(p->grad);

    auto doubled = seq_input({{{0.4, -0.3}, {1.0, 0.2}},
                              {{-0.5, 0.8}, {0.1, 0.1}},
                              {{0.4, -0.3}, {1.0, 0.2}},
                              {{-0.5, 0.8}, {0.1, 0.1}}});
    auto [p2, c2] = net.forward(doubled, true, 0);
    (void)p2;
    net.backward({0, 2, 0, 2}, c2);
    auto params = net.params();
    for (std::size_t i = 0; i < params.size(); ++i)
        for (std::size_t k = 0; k < params[i]->size(); ++k)
            EXPECT_NEAR(params[i]->grad[k], grads[i][k], 1e-12);
}

TEST(Gradients, StaleCacheRejected) {
    nn::Network net;
    net.add<nn::DenseLayer>(2, 2, false, "out");
    net.init(1);
    nn::Mat x(1, 2);
    x.at(0, 0) = 1.0;
    auto [p, cache] = net.forward(nn::Activation::from_flat(x), true, 0);
    (void)p;
    EXPECT_NO_THROW(net.backward({0}, cache));
    EXPECT_THROW(net.backward({0}, cache), StaleCache);  // consumed
    auto [p2, c2] = net.forward(nn::Activation::from_flat(x), false, 0);
    (void)p2;
    EXPECT_THROW(net.backward({0}, c2), StaleCache);  // eval-mode cache
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
    nn::Param p("p", 2, 2);
    p.value = {1, 2, 3, 4};
    std::fill(p.grad.begin(), p.grad.end(), 0.0);
    nn::Adam adam;
    std::vector<nn::Param*> params = {&p};
    adam.step(params);
    EXPECT_EQ(p.value, (std::vector<double>{1, 2, 3, 4}));
}

TEST(Adam, ConstantGradientApproachesUnitStep) {
    nn::AdamConfig cfg;
    cfg.learning_rate = 0.005;
    nn::Adam adam(cfg);
    nn::Param p("p", 1, 1);
    p.value = {0.0};
    std::vector<nn::Param*> params = {&p};
    double prev = p.value[0];
    double step = 0.0;
    for (int t = 0; t < 500; ++t) {
        p.grad = {0.37};  // constant gradient
        adam.step(params);
        step = prev - p.value[0];
        prev = p.value[0];
    }
    EXPECT_NEAR(step, cfg.learning_rate, cfg.learning_rate * 0.01);
}

TEST(Adam, Deterministic) {
    auto run = [] {
        nn::Adam adam;
        nn::Param p("p", 1, 3);
        p.value = {0.5, -0.5, 1.0};
        std::vector<nn::Param*> params = {&p};
        for (int t = 1; t <= 20; ++t) {
            p.grad = {0.1 * t, -0.2, 0.05 * t};
            adam.step(params);
        }
        return p.value;
    };
    EXPECT_EQ(run(), run());
}

TEST(BuildNetwork, ParameterCountMatchesShapeArithmetic) {
    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiLstm;
    cfg.seq_len = 5;
    cfg.embed_dim = 4;
    cfg.layer_units = {2, 2, 2};
    cfg.dense_units = {3, 3};
    cfg.num_classes = 3;
    cfg.seed = 1;
    auto vocab = vocab_of(10);
    auto model = dl::build_network(cfg, &vocab, nullptr);

    auto lstm_params = [](std::size_t in, std::size_t u) { return 2 * 4 * (in * u + u * u + u); };
    std::size_t expected = 12 * 4;                 // embedding (10 words + pad + oov) x d
    expected += lstm_params(4, 2);                 // bilstm over embeddings
    expected += 4 * 3 + 3;                         // dense 4->3
    expected += lstm_params(3, 2);                 // bilstm over dense output
    expected += 4 * 3 + 3;                         // dense 4->3
    expected += lstm_params(3, 2);                 // final bilstm, last step
    expected += 4 * 3 + 3;                         // output dense 4->num_classes
    EXPECT_EQ(model.net.param_count(), expected);
}

TEST(BuildNetwork, PretrainedRowsCopiedExactly) {
    auto vocab = vocab_of(10);
    embedding::EmbeddingTable table(4, Language::En, embedding::EmbeddingSource::PretrainedText);
    table.insert("w0", {1, 2, 3, 4});
    table.insert("w3", {-1, -2, -3, -4});
    table.insert("w9", {9, 9, 9, 9});

    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiGru;
    cfg.embed_dim = 4;
    cfg.layer_units = {2, 2, 2};
    cfg.dense_units = {2};
    cfg.num_classes = 2;
    cfg.seed = 5;
    auto model = dl::build_network(cfg, &vocab, &table);
    auto* emb = dynamic_cast<nn::EmbeddingLayer*>(model.net.layers().front().get());
    ASSERT_NE(emb, nullptr);
    auto row = [&](int idx) {
        std::vector<double> r(4);
        for (int f = 0; f < 4; ++f)
            r[static_cast<std::size_t>(f)] =
                emb->table().value[static_cast<std::size_t>(idx * 4 + f)];
        return r;
    };
    EXPECT_EQ(row(2), (std::vector<double>{1, 2, 3, 4}));    // w0 -> index 2
    EXPECT_EQ(row(5), (std::vector<double>{-1, -2, -3, -4}));  // w3 -> index 5
    EXPECT_EQ(row(11), (std::vector<double>{9, 9, 9, 9}));   // w9 -> index 11
    // Uncovered rows keep the uniform(-0.05, 0.05) init.
    for (int idx : {0, 1, 3}) {
        for (double v : row(idx)) {
            EXPECT_GE(v, -0.05);
            EXPECT_LE(v, 0.05);
        }
    }
}

TEST(BuildNetwork, SameSeedSameParameters) {
    auto vocab = vocab_of(6);
    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiRnf;
    cfg.embed_dim = 3;
    cfg.layer_units = {2, 2, 2};
    cfg.dense_units = {2, 2};
    cfg.num_classes = 3;
    cfg.seed = 42;
    auto a = dl::build_network(cfg, &vocab, nullptr);
    auto b = dl::build_network(cfg, &vocab, nullptr);
    auto pa = a.net.params(), pb = b.net.params();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value);
}

TEST(BiRecurrent, ReversalSymmetry) {
    // Swapping direction weights and reversing time swaps the two halves of
    // the concatenated state.
    nn::BiRecurrentLayer l1(nn::CellKind::Lstm, 2, 3, true, "a");
    Rng init_rng(31);
    l1.init(init_rng);
    auto p1 = l1.params();
    nn::BiRecurrentLayer l2(nn::CellKind::Lstm, 2, 3, true, "b");
    auto p2 = l2.params();
    const std::size_t half = p1.size() / 2;
    for (std::size_t i = 0; i < half; ++i) {
        p2[i]->value = p1[half + i]->value;  // fwd <- bwd
        p2[half + i]->value = p1[i]->value;  // bwd <- fwd
    }

    const std::vector<std::vector<double>> x = {{0.5, -1}, {0.25, 0.75}, {-0.5, 0.1}, {1, 1}};
    std::vector<std::vector<double>> x_rev(x.rbegin(), x.rend());
    Rng rng(0);
    auto out1 = l1.forward(seq_input({x}), false, rng);
    auto out2 = l2.forward(seq_input({x_rev}), false, rng);
    const std::size_t T = x.size(), u = 3;
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t k = 0; k < u; ++k) {
            EXPECT_NEAR(out2.seq.at(0, t, k), out1.seq.at(0, T - 1 - t, u + k), 1e-12);
            EXPECT_NEAR(out2.seq.at(0, t, u + k), out1.seq.at(0, T - 1 - t, k), 1e-12);
        }
}

TEST(Dropout, TrainAverageApproachesEvalOutput) {
    nn::Network net;
    net.add<nn::DropoutLayer>(0.4, "drop");
    net.add<nn::DenseLayer>(4, 3, false, "out");
    net.init(2);
    // Small weights keep softmax near-linear over the mask distribution.
    for (auto* p : net.params())
        for (auto& v : p->value) v *= 0.2;

    nn::Mat x(1, 4);
    x.at(0, 0) = 1.0;
    x.at(0, 1) = -0.5;
    x.at(0, 2) = 0.75;
    x.at(0, 3) = 0.25;
    auto input = nn::Activation::from_flat(x);

    auto [eval_probs, c0] = net.forward(input, false, 0);
    (void)c0;
    std::vector<double> avg(3, 0.0);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        auto [probs, c] = net.forward(input, true, static_cast<std::uint64_t>(i) + 1);
        (void)c;
        for (std::size_t j = 0; j < 3; ++j) avg[j] += probs.at(0, j);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        avg[j] /= draws;
        EXPECT_NEAR(avg[j], eval_probs.at(0, j), 0.02 * eval_probs.at(0, j) + 0.005);
    }
}

TEST(Train, KeywordCorpusReachesHighAccuracy) {
    auto data = keyword_corpus(300, 12, 3);
    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiLstm;
    cfg.input = dl::NetworkConfig::Input::Tokens;
    cfg.seq_len = 12;
    cfg.embed_dim = 8;
    cfg.layer_units = {8, 8, 8};
    cfg.dense_units = {16, 16};
    cfg.num_classes = 3;
    cfg.epochs = 60;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.005;
    cfg.seed = 7;
    auto vocab = vocab_of(9);
    auto model = dl::build_network(cfg, &vocab, nullptr);
    auto trace = dl::train(model, data, {});
    ASSERT_EQ(trace.size(), 60u);
    EXPECT_GE(trace.back().train_accuracy, 0.95);
}

TEST(Train, FixedSeedReproducesTrace) {
    auto data = keyword_corpus(60, 8, 5);
    auto make_cfg = [] {
        dl::NetworkConfig cfg;
        cfg.arch = dl::Arch::BiGru;
        cfg.seq_len = 8;
        cfg.embed_dim = 4;
        cfg.layer_units = {3, 3, 3};
        cfg.dense_units = {4};
        cfg.num_classes = 3;
        cfg.epochs = 5;
        cfg.batch_size = 8;
        cfg.seed = 11;
        return cfg;
    };
    auto vocab = vocab_of(9);
    auto m1 = dl::build_network(make_cfg(), &vocab, nullptr);
    auto t1 = dl::train(m1, data, data);
    auto m2 = dl::build_network(make_cfg(), &vocab, nullptr);
    auto t2 = dl::train(m2, data, data);
    ASSERT_EQ(t1.size(), t2.size());
    for (std::size_t i = 0; i < t1.size(); ++i) EXPECT_EQ(t1[i], t2[i]);
}

TEST(Train, ZeroEpochsKeepsInitialWeights) {
    auto data = keyword_corpus(30, 8, 6);
    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiLstm;
    cfg.seq_len = 8;
    cfg.embed_dim = 4;
    cfg.layer_units = {2, 2, 2};
    cfg.dense_units = {3, 3};
    cfg.num_classes = 3;
    cfg.epochs = 0;
    cfg.seed = 9;
    auto vocab = vocab_of(9);
    auto trained = dl::build_network(cfg, &vocab, nullptr);
    auto fresh = dl::build_network(cfg, &vocab, nullptr);
    auto trace = dl::train(trained, data, {});
    EXPECT_TRUE(trace.empty());
    auto pt = trained.net.params(), pf = fresh.net.params();
    for (std::size_t i = 0; i < pt.size(); ++i) EXPECT_EQ(pt[i]->value, pf[i]->value);
}

TEST(Train, EmptyDatasetRejected) {
    dl::NetworkConfig cfg;
    cfg.input = dl::NetworkConfig::Input::Vectors;
    cfg.input_dim = 4;
    cfg.num_classes = 2;
    auto model = dl::build_network(cfg, nullptr, nullptr);
    EXPECT_THROW(dl::train(model, {}, {}), EmptyDataset);
}

TEST(Predict, ArgmaxAndTieRules) {
    // Zero network: uniform probabilities -> lowest class index everywhere.
    dl::NetworkConfig cfg;
    cfg.input = dl::NetworkConfig::Input::Vectors;
    cfg.input_dim = 3;
    cfg.seq_len = 1;
    cfg.layer_units = {2, 2, 2};
    cfg.dense_units = {2, 2};
    cfg.num_classes = 3;
    cfg.seed = 4;
    auto model = dl::build_network(cfg, nullptr, nullptr);
    model.classes = {Label::Threat, Label::Neutral, Label::NonThreat};
    for (auto* p : model.net.params()) set_all(*p, 0.0);

    dl::DlDataset data;
    for (int i = 0; i < 7; ++i) {
        data.xs.push_back({0.1 * i, -0.2 * i, 0.3});
        data.labels.push_back(Label::Neutral);
    }
    auto pred = dl::predict(model, data);
    ASSERT_EQ(pred.labels.size(), 7u);
    for (const auto& l : pred.labels) EXPECT_EQ(l, Label::Threat);  // tie -> index 0
    for (const auto& row : pred.probs)
        for (double p : row) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(Persistence, WeightsRoundTripThroughContainer) {
    tltest::TempDir dir("dlw");
    auto data = keyword_corpus(60, 8, 12);
    dl::NetworkConfig cfg;
    cfg.arch = dl::Arch::BiRnf;
    cfg.seq_len = 8;
    cfg.embed_dim = 4;
    cfg.layer_units = {3, 3, 3};
    cfg.dense_units = {4, 4};
    cfg.num_classes = 3;
    cfg.epochs = 3;
    cfg.seed = 19;
    auto vocab = vocab_of(9);
    auto model = dl::build_network(cfg, &vocab, nullptr);
    dl::train(model, data, {});
    auto before = dl::predict(model, data);

    dl::save_weights(model, dir.file("m.tlw"));
    auto loaded = dl::load_weights(dir.file("m.tlw"));
    auto after = dl::predict(loaded, data);
    ASSERT_EQ(before.labels.size(), after.labels.size());
    std::size_t agree = 0;
    for (std::size_t i = 0; i < before.labels.size(); ++i) {
        if (before.labels[i] == after.labels[i]) ++agree;
        for (std::size_t c = 0; c < before.probs[i].size(); ++c)
            EXPECT_NEAR(before.probs[i][c], after.probs[i][c], 1e-5);  // float32 storage
    }
    EXPECT_EQ(agree, before.labels.size());
    EXPECT_EQ(loaded.classes, model.classes);
}
