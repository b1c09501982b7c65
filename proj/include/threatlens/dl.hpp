#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"
#include "threatlens/embedding.hpp"
#include "threatlens/nn.hpp"
#include "threatlens/preprocess.hpp"

namespace threatlens::dl {

enum class Arch { BiRnf, BiLstm, BiGru };

inline const char* to_string(Arch a) {
    switch (a) {
        case Arch::BiRnf: return "birnf";
        case Arch::BiLstm: return "bilstm";
        case Arch::BiGru: return "bigru";
    }
    return "?";
}

inline std::optional<Arch> parse_arch(const std::string& s) {
    if (s == "birnf" || s == "bi-rnf" || s == "birnn") return Arch::BiRnf;
    if (s == "bilstm" || s == "bi-lstm") return Arch::BiLstm;
    if (s == "bigru" || s == "bi-gru") return Arch::BiGru;
    return std::nullopt;
}

struct NetworkConfig {
    Arch arch = Arch::BiLstm;
    enum class Input { Tokens, Vectors } input = Input::Tokens;
    std::size_t seq_len = 100;
    std::size_t embed_dim = 300;
    std::size_t input_dim = 0;                // Vectors mode feature width
    std::vector<std::size_t> layer_units;     // empty -> per-arch default
    std::vector<std::size_t> dense_units;     // empty -> per-arch default
    double dropout_rate = 0.4;
    double learning_rate = 0.005;
    std::size_t num_classes = 3;
    int epochs = 10;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;

    std::vector<std::size_t> resolved_layer_units() const {
        if (!layer_units.empty()) return layer_units;
        if (arch == Arch::BiGru) return {128, 64, 32};
        return {32, 64, 128};
    }
    std::vector<std::size_t> resolved_dense_units() const {
        if (!dense_units.empty()) return dense_units;
        switch (arch) {
            case Arch::BiRnf: return {64, 64};
            case Arch::BiLstm: return {128, 128};
            case Arch::BiGru: return {32};
        }
        return {};
    }
};

using TraceRow = nn::TraceRow;
using TrainTrace = nn::TrainTrace;

inline void save_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    out << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    char buf[256];
    for (const auto& row : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", row.epoch,
                      row.train_loss, row.train_accuracy, row.val_loss, row.val_accuracy);
        out << buf;
    }
}

// Trained (or freshly built) recurrent classifier. Move-only: the network
// owns its layer caches.
struct RecurrentModel {
    NetworkConfig cfg;
    std::vector<Label> classes;     // model output order
    std::size_t vocab_rows = 0;     // embedding rows incl. pad and OOV
    nn::Network net;

    int class_index(Label l) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == l) return static_cast<int>(i);
        return -1;
    }
};

// ---------------------------------------------------------------------------
// Stack templates.
//   BiRNF:  Embed -> BiRNN(u0, seq) -> Dense+ReLU -> Drop -> BiGRU(u1, seq)
//           -> Dense+ReLU -> Drop -> BiLSTM(u2, last) -> Drop -> softmax
//   BiLSTM: Embed -> BiLSTM(u0, seq) -> Dense+ReLU -> Drop -> BiLSTM(u1, seq)
//           -> Dense+ReLU -> Drop -> BiLSTM(u2, last) -> Drop -> softmax
//   BiGRU:  Embed -> BiGRU(u0, seq) -> Dense+ReLU -> Drop -> BiGRU(u1, seq)
//           -> BiGRU(u2, last) -> softmax
// In Vectors mode the embedding layer is omitted and inputs are length-1
// sequences of pooled vectors.
// ---------------------------------------------------------------------------

inline RecurrentModel build_network(const NetworkConfig& cfg,
                                    const preprocess::Vocabulary* vocab = nullptr,
                                    const embedding::EmbeddingTable* init_table = nullptr) {
    RecurrentModel model;
    model.cfg = cfg;

    const auto units = cfg.resolved_layer_units();
    const auto dense = cfg.resolved_dense_units();
    if (units.size() != 3) throw ConfigError("layer_units must list exactly three unit counts");
    const std::size_t need_dense = cfg.arch == Arch::BiGru ? 1 : 2;
    if (dense.size() < need_dense)
        throw ConfigError("dense_units too short for the chosen architecture");
    if (cfg.num_classes < 2) throw ConfigError("num_classes must be >= 2");

    std::size_t width = 0;
    nn::EmbeddingLayer* embed = nullptr;
    if (cfg.input == NetworkConfig::Input::Tokens) {
        if (!vocab) throw ConfigError("token-input networks need a vocabulary");
        if (init_table && init_table->dim() != cfg.embed_dim)
            throw DimensionMismatch(cfg.embed_dim, init_table->dim());
        model.vocab_rows = vocab->size() + 2;
        embed = model.net.add<nn::EmbeddingLayer>(model.vocab_rows, cfg.embed_dim);
        width = cfg.embed_dim;
    } else {
        if (cfg.input_dim == 0) throw ConfigError("vector-input networks need input_dim");
        width = cfg.input_dim;
    }

    auto add_recurrent = [&](nn::CellKind cell, std::size_t u, bool ret_seq, int idx) {
        model.net.add<nn::BiRecurrentLayer>(cell, width, u, ret_seq,
                                            "l" + std::to_string(idx) + "." +
                                                nn::to_string(cell));
        width = 2 * u;
    };
    auto add_dense_relu = [&](std::size_t u, int idx) {
        model.net.add<nn::DenseLayer>(width, u, true, "l" + std::to_string(idx) + ".dense");
        width = u;
    };
    auto add_dropout = [&](int idx) {
        model.net.add<nn::DropoutLayer>(cfg.dropout_rate, "l" + std::to_string(idx) + ".drop");
    };

    int idx = 0;
    switch (cfg.arch) {
        case Arch::BiRnf:
            add_recurrent(nn::CellKind::Rnn, units[0], true, idx++);
            add_dense_relu(dense[0], idx++);
            add_dropout(idx++);
            add_recurrent(nn::CellKind::Gru, units[1], true, idx++);
            add_dense_relu(dense[1], idx++);
            add_dropout(idx++);
            add_recurrent(nn::CellKind::Lstm, units[2], false, idx++);
            add_dropout(idx++);
            break;
        case Arch::BiLstm:
            add_recurrent(nn::CellKind::Lstm, units[0], true, idx++);
            add_dense_relu(dense[0], idx++);
            add_dropout(idx++);
            add_recurrent(nn::CellKind::Lstm, units[1], true, idx++);
            add_dense_relu(dense[1], idx++);
            add_dropout(idx++);
            add_recurrent(nn::CellKind::Lstm, units[2], false, idx++);
            add_dropout(idx++);
            break;
        case Arch::BiGru:
            add_recurrent(nn::CellKind::Gru, units[0], true, idx++);
            add_dense_relu(dense[0], idx++);
            add_dropout(idx++);
            add_recurrent(nn::CellKind::Gru, units[1], true, idx++);
            add_recurrent(nn::CellKind::Gru, units[2], false, idx++);
            break;
    }
    model.net.add<nn::DenseLayer>(width, cfg.num_classes, false, "out.dense");
    model.net.init(cfg.seed);

    // Pretrained rows overwrite the random init for covered words.
    if (embed && init_table && vocab) {
        for (std::size_t rank = 0; rank < vocab->words_by_rank.size(); ++rank) {
            const std::string& word = vocab->words_by_rank[rank];
            if (const auto* vec = init_table->find(word)) {
                double* row = &embed->table().value[(rank + 2) * cfg.embed_dim];
                for (std::size_t f = 0; f < cfg.embed_dim; ++f)
                    row[f] = static_cast<double>((*vec)[f]);
            }
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Batching.
// ---------------------------------------------------------------------------

// Token sequences are truncated / zero-padded to the model's seq_len here.
inline nn::TokenBatch make_token_batch(const std::vector<std::vector<int>>& seqs,
                                       const std::vector<std::size_t>& order, std::size_t from,
                                       std::size_t to, std::size_t seq_len) {
    nn::TokenBatch batch(to - from, seq_len);
    for (std::size_t i = from; i < to; ++i) {
        const auto& seq = seqs[order[i]];
        for (std::size_t t = 0; t < seq_len; ++t)
            batch.at(i - from, t) = t < seq.size() ? seq[t] : preprocess::Vocabulary::pad_index;
    }
    return batch;
}

inline nn::Seq make_vector_batch(const std::vector<std::vector<double>>& xs,
                                 const std::vector<std::size_t>& order, std::size_t from,
                                 std::size_t to) {
    const std::size_t d = xs.empty() ? 0 : xs[order[from]].size();
    nn::Seq seq(to - from, 1, d);
    for (std::size_t i = from; i < to; ++i)
        for (std::size_t f = 0; f < d; ++f) seq.at(i - from, 0, f) = xs[order[i]][f];
    return seq;
}

struct DlDataset {
    // Tokens mode uses seqs; Vectors mode uses xs. Labels are shared.
    std::vector<std::vector<int>> seqs;
    std::vector<std::vector<double>> xs;
    std::vector<Label> labels;

    std::size_t size() const { return labels.size(); }
};

inline DlDataset dataset_from_processed(const preprocess::ProcessedDataset& ds) {
    DlDataset out;
    for (const auto& rec : ds.records) {
        if (!rec.label) throw MissingLabels();
        out.seqs.push_back(rec.seq.indices);
        out.labels.push_back(*rec.label);
    }
    return out;
}

inline DlDataset dataset_from_encoded(const corpus::EncodedDataset& ds) {
    DlDataset out;
    for (const auto& rec : ds.records) {
        out.xs.push_back(rec.vec);
        out.labels.push_back(rec.label);
    }
    return out;
}

namespace detail {

inline std::vector<Label> classes_of(const std::vector<Label>& labels) {
    std::set<int> seen;
    for (Label l : labels) seen.insert(label_index(l));
    std::vector<Label> out;
    for (int i : seen) out.push_back(label_from_index(i));
    return out;
}

inline nn::Activation slice_input(const RecurrentModel& model, const DlDataset& data,
                                  const std::vector<std::size_t>& order, std::size_t from,
                                  std::size_t to) {
    if (model.cfg.input == NetworkConfig::Input::Tokens)
        return nn::Activation::from_tokens(
            make_token_batch(data.seqs, order, from, to, model.cfg.seq_len));
    return nn::Activation::from_seq(make_vector_batch(data.xs, order, from, to));
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<Label> predictions;
    std::vector<std::vector<double>> probs;
};

inline EvalResult evaluate(RecurrentModel& model, const DlDataset& data,
                           std::size_t batch_size) {
    EvalResult res;
    if (data.size() == 0) return res;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t correct = 0;
    for (std::size_t from = 0; from < data.size(); from += batch_size) {
        std::size_t to = std::min(data.size(), from + batch_size);
        auto input = slice_input(model, data, order, from, to);
        auto [probs, cache] = model.net.forward(input, false, 0);
        (void)cache;
        for (std::size_t i = 0; i < probs.rows; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < probs.cols; ++j)
                if (probs.at(i, j) > probs.at(i, best)) best = j;
            Label pred = model.classes[best];
            res.predictions.push_back(pred);
            std::vector<double> row(probs.cols);
            for (std::size_t j = 0; j < probs.cols; ++j) row[j] = probs.at(i, j);
            res.probs.push_back(std::move(row));
            Label truth = data.labels[from + i];
            if (pred == truth) ++correct;
            int target = model.class_index(truth);
            if (target >= 0) {
                double p = std::max(probs.at(i, static_cast<std::size_t>(target)), 1e-12);
                loss_sum -= std::log(p);
                ++loss_count;
            }
        }
    }
    if (loss_count > 0) res.loss = loss_sum / static_cast<double>(loss_count);
    res.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return res;
}

}  // namespace detail

// Mini-batch Adam training with seeded shuffling. Returns the per-epoch
// trace; the model is updated in place.
inline TrainTrace train(RecurrentModel& model, const DlDataset& train_data,
                        const DlDataset& val_data) {
    if (train_data.size() == 0) throw EmptyDataset();
    if (model.classes.empty()) {
        model.classes = detail::classes_of(train_data.labels);
        if (model.classes.size() != model.cfg.num_classes)
            throw ConfigError("num_classes does not match the classes present in training data");
    }

    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = model.cfg.learning_rate;
    nn::Adam adam(adam_cfg);
    auto params = model.net.params();

    std::vector<int> targets_all(train_data.size());
    for (std::size_t i = 0; i < train_data.size(); ++i) {
        int t = model.class_index(train_data.labels[i]);
        if (t < 0) throw ShapeError("training label outside the model's class list");
        targets_all[i] = t;
    }

    TrainTrace trace;
    const std::size_t bs = std::max<std::size_t>(1, model.cfg.batch_size);
    for (int epoch = 1; epoch <= model.cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(train_data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = Rng(model.cfg.seed).fork(static_cast<std::uint64_t>(epoch));
        shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t from = 0; from < train_data.size(); from += bs) {
            std::size_t to = std::min(train_data.size(), from + bs);
            auto input = detail::slice_input(model, train_data, order, from, to);
            std::vector<int> targets;
            targets.reserve(to - from);
            for (std::size_t i = from; i < to; ++i) targets.push_back(targets_all[order[i]]);
            const std::uint64_t dropout_seed =
                model.cfg.seed ^ (static_cast<std::uint64_t>(epoch) * 0x100000001b3ULL) ^
                (static_cast<std::uint64_t>(batches) * 0x9e3779b97f4a7c15ULL);
            auto [probs, cache] = model.net.forward(input, true, dropout_seed);
            (void)probs;
            loss_sum += model.net.backward(targets, cache);
            adam.step(params);
            ++batches;
        }

        TraceRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        auto train_eval = detail::evaluate(model, train_data, bs);
        row.train_accuracy = train_eval.accuracy;
        if (val_data.size() > 0) {
            auto val_eval = detail::evaluate(model, val_data, bs);
            row.val_loss = val_eval.loss;
            row.val_accuracy = val_eval.accuracy;
        }
        trace.push_back(row);
    }
    return trace;
}

struct PredictResult {
    std::vector<Label> labels;
    std::vector<std::vector<double>> probs;  // aligned with model.classes
};

inline PredictResult predict(RecurrentModel& model, const DlDataset& data) {
    auto eval = detail::evaluate(model, data, std::max<std::size_t>(1, model.cfg.batch_size));
    return {std::move(eval.predictions), std::move(eval.probs)};
}

inline detail::EvalResult evaluate(RecurrentModel& model, const DlDataset& data) {
    return detail::evaluate(model, data, std::max<std::size_t>(1, model.cfg.batch_size));
}

// ---------------------------------------------------------------------------
// Persistence: magic "TLW1", u32 schema version, u64 JSON header length,
// JSON header (config, classes, tensor manifest), float32 little-endian
// tensor payload in manifest order.
// ---------------------------------------------------------------------------

inline constexpr char kWeightsMagic[4] = {'T', 'L', 'W', '1'};
inline constexpr std::uint32_t kWeightsVersion = 1;

inline nlohmann::json config_to_json(const NetworkConfig& cfg) {
    nlohmann::json j;
    j["arch"] = to_string(cfg.arch);
    j["input"] = cfg.input == NetworkConfig::Input::Tokens ? "tokens" : "vectors";
    j["seq_len"] = cfg.seq_len;
    j["embed_dim"] = cfg.embed_dim;
    j["input_dim"] = cfg.input_dim;
    j["layer_units"] = cfg.resolved_layer_units();
    j["dense_units"] = cfg.resolved_dense_units();
    j["dropout_rate"] = cfg.dropout_rate;
    j["learning_rate"] = cfg.learning_rate;
    j["num_classes"] = cfg.num_classes;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["seed"] = cfg.seed;
    return j;
}

inline NetworkConfig config_from_json(const nlohmann::json& j) {
    NetworkConfig cfg;
    cfg.arch = *parse_arch(j.at("arch").get<std::string>());
    cfg.input = j.at("input").get<std::string>() == "tokens" ? NetworkConfig::Input::Tokens
                                                             : NetworkConfig::Input::Vectors;
    cfg.seq_len = j.at("seq_len").get<std::size_t>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.input_dim = j.at("input_dim").get<std::size_t>();
    cfg.layer_units = j.at("layer_units").get<std::vector<std::size_t>>();
    cfg.dense_units = j.at("dense_units").get<std::vector<std::size_t>>();
    cfg.dropout_rate = j.at("dropout_rate").get<double>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.num_classes = j.at("num_classes").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<int>();
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

inline void save_weights(RecurrentModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);

    nlohmann::json header;
    header["model_type"] = "dl";
    header["config"] = config_to_json(model.cfg);
    header["vocab_rows"] = model.vocab_rows;
    for (Label c : model.classes) header["classes"].push_back(threatlens::to_string(c));
    nlohmann::json tensors = nlohmann::json::array();
    for (auto* p : model.net.params())
        tensors.push_back({{"name", p->name}, {"rows", p->rows}, {"cols", p->cols}});
    header["tensors"] = tensors;

    const std::string header_str = header.dump();
    out.write(kWeightsMagic, 4);
    std::uint32_t version = kWeightsVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::uint64_t len = header_str.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (auto* p : model.net.params()) {
        std::vector<float> buf(p->size());
        for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = static_cast<float>(p->value[k]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw IOError("write failed for " + path);
}

inline RecurrentModel load_weights(const std::string& path,
                                   const preprocess::Vocabulary* vocab = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0)
        throw ParseError(0, "bad weights magic");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kWeightsVersion) throw ParseError(4, "unsupported weights version");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError(16, "truncated header");
    nlohmann::json header = nlohmann::json::parse(header_str);

    NetworkConfig cfg = config_from_json(header.at("config"));
    RecurrentModel model;
    if (cfg.input == NetworkConfig::Input::Tokens) {
        // Rebuild the skeleton against a synthetic vocabulary of the right
        // size when none is supplied; the embedding rows come from the file.
        preprocess::Vocabulary tmp;
        const preprocess::Vocabulary* use = vocab;
        if (!use) {
            std::size_t rows = header.at("vocab_rows").get<std::size_t>();
            tmp.words_by_rank.assign(rows >= 2 ? rows - 2 : 0, std::string());
            use = &tmp;
        }
        model = build_network(cfg, use, nullptr);
    } else {
        model = build_network(cfg, nullptr, nullptr);
    }
    model.classes.clear();
    for (const auto& c : header.at("classes"))
        model.classes.push_back(*parse_label(c.get<std::string>()));

    auto params = model.net.params();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw ParseError(0, "tensor manifest size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != params[i]->name ||
            t.at("rows").get<std::size_t>() != params[i]->rows ||
            t.at("cols").get<std::size_t>() != params[i]->cols)
            throw ParseError(0, "tensor manifest mismatch at " + params[i]->name);
        std::vector<float> buf(params[i]->size());
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw ParseError(0, "truncated tensor payload");
        for (std::size_t k = 0; k < buf.size(); ++k)
            params[i]->value[k] = static_cast<double>(buf[k]);
    }
    return model;
}

}  // namespace threatlens::dl
