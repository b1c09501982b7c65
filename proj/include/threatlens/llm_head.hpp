#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/nn.hpp"

namespace threatlens::llm {

// Hidden states exported by an external transformer backbone: n records,
// max_len positions, h-wide vectors, with an attention mask and optional
// integer labels in the global class order.
struct HiddenStateBatch {
    std::size_t n = 0;
    std::size_t max_len = 0;
    std::size_t h = 0;
    std::vector<float> hidden;        // n * max_len * h, row-major
    std::vector<std::uint8_t> mask;   // n * max_len
    std::optional<std::vector<std::uint16_t>> labels;  // n

    float at(std::size_t i, std::size_t t, std::size_t f) const {
        return hidden[(i * max_len + t) * h + f];
    }
    std::uint8_t mask_at(std::size_t i, std::size_t t) const { return mask[i * max_len + t]; }

    void validate() const {
        if (hidden.size() != n * max_len * h) throw ShapeError("hidden tensor size mismatch");
        if (mask.size() != n * max_len) throw ShapeError("mask size mismatch");
        if (labels && labels->size() != n) throw ShapeError("label count mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            bool any = false;
            for (std::size_t t = 0; t < max_len; ++t)
                if (mask_at(i, t)) {
                    any = true;
                    break;
                }
            if (!any) throw ShapeError("mask row " + std::to_string(i) + " has no set position");
        }
        if (labels)
            for (std::uint16_t l : *labels)
                if (l >= kNumLabels) throw ShapeError("label value outside the class space");
    }
};

// ---------------------------------------------------------------------------
// Container: magic "HSB1", u32 LE header length, JSON header
// {n, max_len, h, has_labels}, float32 LE hidden states, uint8 masks,
// optional uint16 LE labels.
// ---------------------------------------------------------------------------

inline constexpr char kHsbMagic[4] = {'H', 'S', 'B', '1'};

inline void write_hidden_states(const HiddenStateBatch& batch, const std::string& path) {
    batch.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    nlohmann::json header;
    header["n"] = batch.n;
    header["max_len"] = batch.max_len;
    header["h"] = batch.h;
    header["has_labels"] = batch.labels.has_value();
    const std::string header_str = header.dump();
    out.write(kHsbMagic, 4);
    std::uint32_t len = static_cast<std::uint32_t>(header_str.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    out.write(reinterpret_cast<const char*>(batch.hidden.data()),
              static_cast<std::streamsize>(batch.hidden.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(batch.mask.data()),
              static_cast<std::streamsize>(batch.mask.size()));
    if (batch.labels)
        out.write(reinterpret_cast<const char*>(batch.labels->data()),
                  static_cast<std::streamsize>(batch.labels->size() * sizeof(std::uint16_t)));
    if (!out) throw IOError("write failed for " + path);
}

inline HiddenStateBatch load_hidden_states(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kHsbMagic, 4) != 0) throw ParseError(0, "bad HSB1 magic");
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError(8, "truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(8, std::string("bad header json: ") + e.what());
    }

    HiddenStateBatch batch;
    batch.n = header.at("n").get<std::size_t>();
    batch.max_len = header.at("max_len").get<std::size_t>();
    batch.h = header.at("h").get<std::size_t>();
    const bool has_labels = header.at("has_labels").get<bool>();

    batch.hidden.resize(batch.n * batch.max_len * batch.h);
    in.read(reinterpret_cast<char*>(batch.hidden.data()),
            static_cast<std::streamsize>(batch.hidden.size() * sizeof(float)));
    batch.mask.resize(batch.n * batch.max_len);
    in.read(reinterpret_cast<char*>(batch.mask.data()),
            static_cast<std::streamsize>(batch.mask.size()));
    if (has_labels) {
        std::vector<std::uint16_t> labels(batch.n);
        in.read(reinterpret_cast<char*>(labels.data()),
                static_cast<std::streamsize>(labels.size() * sizeof(std::uint16_t)));
        batch.labels = std::move(labels);
    }
    if (!in) throw ParseError(0, "truncated payload");
    batch.validate();
    return batch;
}

// Mean of hidden vectors over mask=1 positions (or over every position with
// include_padding).
inline nn::Mat global_average_pool(const HiddenStateBatch& batch, bool include_padding = false) {
    nn::Mat out(batch.n, batch.h);
    for (std::size_t i = 0; i < batch.n; ++i) {
        std::size_t count = 0;
        for (std::size_t t = 0; t < batch.max_len; ++t) {
            if (!include_padding && !batch.mask_at(i, t)) continue;
            ++count;
            for (std::size_t f = 0; f < batch.h; ++f)
                out.at(i, f) += static_cast<double>(batch.at(i, t, f));
        }
        if (count == 0) throw ShapeError("record " + std::to_string(i) + " pools over nothing");
        for (std::size_t f = 0; f < batch.h; ++f) out.at(i, f) /= static_cast<double>(count);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Classification head: GAP -> Dense(128)+ReLU -> Dropout -> Dense(64)+ReLU
// -> Dropout -> Dense(32)+ReLU -> Dropout -> softmax.
// ---------------------------------------------------------------------------

struct HeadConfig {
    std::vector<std::size_t> dense_units = {128, 64, 32};
    double dropout_rate = 0.4;
    double learning_rate = 0.0005;
    std::size_t batch_size = 16;
    int epochs = 50;
    std::uint64_t seed = 1;
    std::size_t num_classes = 3;
    bool include_padding = false;
};

struct HeadModel {
    HeadConfig cfg;
    std::size_t h = 0;
    std::vector<Label> classes;
    nn::Network net;

    int class_index(Label l) const {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == l) return static_cast<int>(i);
        return -1;
    }
};

inline HeadModel build_head(const HeadConfig& cfg, std::size_t h) {
    if (cfg.dense_units.empty()) throw ConfigError("head needs at least one dense layer");
    if (cfg.num_classes < 2) throw ConfigError("num_classes must be >= 2");
    HeadModel model;
    model.cfg = cfg;
    model.h = h;
    std::size_t width = h;
    int idx = 0;
    for (std::size_t units : cfg.dense_units) {
        model.net.add<nn::DenseLayer>(width, units, true, "d" + std::to_string(idx) + ".dense");
        model.net.add<nn::DropoutLayer>(cfg.dropout_rate, "d" + std::to_string(idx) + ".drop");
        width = units;
        ++idx;
    }
    model.net.add<nn::DenseLayer>(width, cfg.num_classes, false, "out.dense");
    model.net.init(cfg.seed);
    return model;
}

namespace detail {

inline nn::Mat slice_rows(const nn::Mat& xs, const std::vector<std::size_t>& order,
                          std::size_t from, std::size_t to) {
    nn::Mat out(to - from, xs.cols);
    for (std::size_t i = from; i < to; ++i)
        for (std::size_t f = 0; f < xs.cols; ++f) out.at(i - from, f) = xs.at(order[i], f);
    return out;
}

struct HeadEval {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<Label> predictions;
    std::vector<std::vector<double>> probs;
};

inline HeadEval evaluate(HeadModel& model, const nn::Mat& xs,
                         const std::vector<Label>* truth) {
    HeadEval res;
    const std::size_t bs = std::max<std::size_t>(1, model.cfg.batch_size);
    std::vector<std::size_t> order(xs.rows);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::size_t correct = 0;
    for (std::size_t from = 0; from < xs.rows; from += bs) {
        std::size_t to = std::min(xs.rows, from + bs);
        auto [probs, cache] = model.net.forward(
            nn::Activation::from_flat(slice_rows(xs, order, from, to)), false, 0);
        (void)cache;
        for (std::size_t i = 0; i < probs.rows; ++i) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < probs.cols; ++j)
                if (probs.at(i, j) > probs.at(i, best)) best = j;
            res.predictions.push_back(model.classes[best]);
            std::vector<double> row(probs.cols);
            for (std::size_t j = 0; j < probs.cols; ++j) row[j] = probs.at(i, j);
            res.probs.push_back(std::move(row));
            if (truth) {
                Label t = (*truth)[from + i];
                if (model.classes[best] == t) ++correct;
                int target = model.class_index(t);
                if (target >= 0) {
                    loss_sum -=
                        std::log(std::max(probs.at(i, static_cast<std::size_t>(target)), 1e-12));
                    ++loss_count;
                }
            }
        }
    }
    if (truth && xs.rows > 0) {
        if (loss_count > 0) res.loss = loss_sum / static_cast<double>(loss_count);
        res.accuracy = static_cast<double>(correct) / static_cast<double>(xs.rows);
    }
    return res;
}

}  // namespace detail

inline std::vector<Label> batch_labels(const HiddenStateBatch& batch) {
    if (!batch.labels) throw MissingLabels();
    std::vector<Label> out;
    out.reserve(batch.n);
    for (std::uint16_t l : *batch.labels) out.push_back(label_from_index(static_cast<int>(l)));
    return out;
}

// Adam + sparse categorical cross-entropy over mini-batches of pooled
// vectors; deterministic per seed.
inline std::pair<HeadModel, nn::TrainTrace> head_train(
    const HiddenStateBatch& batch, const HeadConfig& cfg,
    const HiddenStateBatch* val_batch = nullptr) {
    batch.validate();
    std::vector<Label> labels = batch_labels(batch);

    std::set<int> seen;
    for (Label l : labels) seen.insert(label_index(l));
    std::vector<Label> classes;
    for (int i : seen) classes.push_back(label_from_index(i));

    HeadConfig use_cfg = cfg;
    use_cfg.num_classes = classes.size();
    HeadModel model = build_head(use_cfg, batch.h);
    model.classes = classes;

    nn::Mat xs = global_average_pool(batch, cfg.include_padding);
    std::vector<int> targets_all(batch.n);
    for (std::size_t i = 0; i < batch.n; ++i) targets_all[i] = model.class_index(labels[i]);

    nn::Mat val_xs;
    std::vector<Label> val_labels;
    if (val_batch) {
        val_batch->validate();
        val_xs = global_average_pool(*val_batch, cfg.include_padding);
        val_labels = batch_labels(*val_batch);
    }

    nn::AdamConfig adam_cfg;
    adam_cfg.learning_rate = cfg.learning_rate;
    nn::Adam adam(adam_cfg);
    auto params = model.net.params();

    nn::TrainTrace trace;
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order(batch.n);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng = Rng(cfg.seed).fork(static_cast<std::uint64_t>(epoch));
        shuffle(order, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t from = 0; from < batch.n; from += bs) {
            std::size_t to = std::min(batch.n, from + bs);
            std::vector<int> targets;
            targets.reserve(to - from);
            for (std::size_t i = from; i < to; ++i) targets.push_back(targets_all[order[i]]);
            const std::uint64_t dropout_seed =
                cfg.seed ^ (static_cast<std::uint64_t>(epoch) * 0x100000001b3ULL) ^
                (static_cast<std::uint64_t>(batches) * 0x9e3779b97f4a7c15ULL);
            auto [probs, cache] = model.net.forward(
                nn::Activation::from_flat(detail::slice_rows(xs, order, from, to)), true,
                dropout_seed);
            (void)probs;
            loss_sum += model.net.backward(targets, cache);
            adam.step(params);
            ++batches;
        }

        nn::TraceRow row;
        row.epoch = epoch;
        row.train_loss = loss_sum / static_cast<double>(batches);
        auto train_eval = detail::evaluate(model, xs, &labels);
        row.train_accuracy = train_eval.accuracy;
        if (val_batch) {
            auto val_eval = detail::evaluate(model, val_xs, &val_labels);
            row.val_loss = val_eval.loss;
            row.val_accuracy = val_eval.accuracy;
        }
        trace.push_back(row);
    }
    return {std::move(model), std::move(trace)};
}

struct HeadPrediction {
    std::vector<Label> labels;
    std::vector<std::vector<double>> probs;
};

inline HeadPrediction head_predict(HeadModel& model, const HiddenStateBatch& batch) {
    batch.validate();
    if (batch.h != model.h) throw ShapeError("hidden width differs from the trained head");
    nn::Mat xs = global_average_pool(batch, model.cfg.include_padding);
    auto eval = detail::evaluate(model, xs, nullptr);
    return {std::move(eval.predictions), std::move(eval.probs)};
}

inline detail::HeadEval head_evaluate(HeadModel& model, const HiddenStateBatch& batch) {
    batch.validate();
    if (batch.h != model.h) throw ShapeError("hidden width differs from the trained head");
    nn::Mat xs = global_average_pool(batch, model.cfg.include_padding);
    std::vector<Label> labels = batch_labels(batch);
    return detail::evaluate(model, xs, &labels);
}

// ---------------------------------------------------------------------------
// Persistence: same container as the recurrent models, model_type llm_head.
// ---------------------------------------------------------------------------

inline void save_head(HeadModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write " + path);
    nlohmann::json header;
    header["model_type"] = "llm_head";
    header["config"] = {{"dense_units", model.cfg.dense_units},
                        {"dropout_rate", model.cfg.dropout_rate},
                        {"learning_rate", model.cfg.learning_rate},
                        {"batch_size", model.cfg.batch_size},
                        {"epochs", model.cfg.epochs},
                        {"seed", model.cfg.seed},
                        {"num_classes", model.cfg.num_classes},
                        {"include_padding", model.cfg.include_padding}};
    header["h"] = model.h;
    for (Label c : model.classes) header["classes"].push_back(threatlens::to_string(c));
    nlohmann::json tensors = nlohmann::json::array();
    for (auto* p : model.net.params())
        tensors.push_back({{"name", p->name}, {"rows", p->rows}, {"cols", p->cols}});
    header["tensors"] = tensors;

    const std::string header_str = header.dump();
    out.write("TLW1", 4);
    std::uint32_t version = 1;
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

inline HeadModel load_head(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TLW1", 4) != 0) throw ParseError(0, "bad weights magic");
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != 1) throw ParseError(4, "unsupported weights version");
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_str(len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(len));
    if (!in) throw ParseError(16, "truncated header");
    nlohmann::json header = nlohmann::json::parse(header_str);
    if (header.at("model_type") != "llm_head") throw DataError("not an llm_head weights file");

    HeadConfig cfg;
    const auto& jc = header.at("config");
    cfg.dense_units = jc.at("dense_units").get<std::vector<std::size_t>>();
    cfg.dropout_rate = jc.at("dropout_rate").get<double>();
    cfg.learning_rate = jc.at("learning_rate").get<double>();
    cfg.batch_size = jc.at("batch_size").get<std::size_t>();
    cfg.epochs = jc.at("epochs").get<int>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    cfg.num_classes = jc.at("num_classes").get<std::size_t>();
    cfg.include_padding = jc.at("include_padding").get<bool>();

    HeadModel model = build_head(cfg, header.at("h").get<std::size_t>());
    model.classes.clear();
    for (const auto& c : header.at("classes"))
        model.classes.push_back(*parse_label(c.get<std::string>()));

    auto params = model.net.params();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw ParseError(0, "tensor manifest size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != params[i]->name)
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

}  // namespace threatlens::llm
