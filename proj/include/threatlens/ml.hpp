#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"
#include "threatlens/corpus.hpp"

namespace threatlens::ml {

inline std::vector<Label> classes_present(const corpus::EncodedDataset& data) {
    std::set<int> seen;
    for (const auto& rec : data.records) seen.insert(label_index(rec.label));
    std::vector<Label> out;
    for (int idx : seen) out.push_back(label_from_index(idx));
    return out;
}

struct Prediction {
    Label label = Label::Neutral;
    std::vector<double> scores;  // aligned with the model's class list
};

// ---------------------------------------------------------------------------
// Logistic regression: one binary sigmoid classifier per class (one-vs-rest),
// full-batch gradient descent on mean log-loss. Features are standardized
// with train-split statistics; the scaler is part of the model.
// ---------------------------------------------------------------------------

struct Scaler {
    std::vector<double> mean;
    std::vector<double> stdev;

    static Scaler fit(const corpus::EncodedDataset& data) {
        Scaler s;
        const std::size_t d = data.dim;
        const double n = static_cast<double>(data.records.size());
        s.mean.assign(d, 0.0);
        s.stdev.assign(d, 0.0);
        for (const auto& rec : data.records)
            for (std::size_t i = 0; i < d; ++i) s.mean[i] += rec.vec[i];
        for (auto& m : s.mean) m /= n;
        for (const auto& rec : data.records)
            for (std::size_t i = 0; i < d; ++i) {
                double diff = rec.vec[i] - s.mean[i];
                s.stdev[i] += diff * diff;
            }
        for (auto& v : s.stdev) {
            v = std::sqrt(v / n);
            if (v < 1e-12) v = 1.0;  // constant feature
        }
        return s;
    }

    std::vector<double> transform(const std::vector<double>& x) const {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - mean[i]) / stdev[i];
        return out;
    }
};

struct LRConfig {
    double learning_rate = 0.1;
    int max_iterations = 1000;
    double grad_tolerance = 1e-6;
    bool standardize = true;
};

struct LRModel {
    std::size_t dim = 0;
    std::vector<Label> classes;
    std::vector<std::vector<double>> weights;  // one vector per class
    std::vector<double> biases;
    bool standardized = true;
    Scaler scaler;
    LRConfig cfg;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace detail {

struct BinaryGrad {
    double loss = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

// Mean log-loss of the binary sigmoid classifier and its exact gradient.
inline BinaryGrad binary_logloss_grad(const std::vector<std::vector<double>>& x,
                                      const std::vector<double>& y, const std::vector<double>& w,
                                      double b) {
    BinaryGrad out;
    const std::size_t n = x.size();
    const std::size_t d = w.size();
    out.grad_w.assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * x[i][k];
        double p = sigmoid(z);
        double pc = std::min(1.0 - 1e-15, std::max(1e-15, p));
        out.loss -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
        double err = p - y[i];
        for (std::size_t k = 0; k < d; ++k) out.grad_w[k] += err * x[i][k];
        out.grad_b += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    out.loss *= inv_n;
    for (auto& g : out.grad_w) g *= inv_n;
    out.grad_b *= inv_n;
    return out;
}

}  // namespace detail

inline LRModel lr_train(const corpus::EncodedDataset& data, const LRConfig& cfg = {}) {
    if (data.records.empty()) throw EmptyDataset();
    auto classes = classes_present(data);
    if (classes.size() < 2) throw SingleClassData();
    for (const auto& rec : data.records)
        if (rec.vec.size() != data.dim) throw DimensionMismatch(data.dim, rec.vec.size());

    LRModel model;
    model.dim = data.dim;
    model.classes = classes;
    model.cfg = cfg;
    model.standardized = cfg.standardize;
    if (cfg.standardize) model.scaler = Scaler::fit(data);

    const std::size_t n = data.records.size();
    const std::size_t d = data.dim;
    std::vector<std::vector<double>> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = cfg.standardize ? model.scaler.transform(data.records[i].vec)
                               : data.records[i].vec;

    for (Label cls : classes) {
        std::vector<double> targets(n);
        for (std::size_t i = 0; i < n; ++i)
            targets[i] = data.records[i].label == cls ? 1.0 : 0.0;
        std::vector<double> w(d, 0.0);
        double b = 0.0;
        for (int iter = 0; iter < cfg.max_iterations; ++iter) {
            auto grad = detail::binary_logloss_grad(x, targets, w, b);
            double inf_norm = std::abs(grad.grad_b);
            for (double g : grad.grad_w) inf_norm = std::max(inf_norm, std::abs(g));
            if (inf_norm < cfg.grad_tolerance) break;
            for (std::size_t k = 0; k < d; ++k) w[k] -= cfg.learning_rate * grad.grad_w[k];
            b -= cfg.learning_rate * grad.grad_b;
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(b);
    }
    return model;
}

inline Prediction lr_predict(const LRModel& model, const std::vector<double>& x) {
    if (x.size() != model.dim) throw DimensionMismatch(model.dim, x.size());
    std::vector<double> features = model.standardized ? model.scaler.transform(x) : x;
    Prediction pred;
    pred.scores.resize(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
        double z = model.biases[c];
        for (std::size_t k = 0; k < model.dim; ++k) z += model.weights[c][k] * features[k];
        pred.scores[c] = sigmoid(z);
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < pred.scores.size(); ++c)
        if (pred.scores[c] > pred.scores[best]) best = c;
    pred.label = model.classes[best];
    return pred;
}

// Mean binary log-loss of the one-vs-rest classifier for a given class.
inline double lr_class_loss(const LRModel& model, const corpus::EncodedDataset& data,
                            std::size_t class_idx) {
    double loss = 0.0;
    for (const auto& rec : data.records) {
        auto x = model.standardized ? model.scaler.transform(rec.vec) : rec.vec;
        double z = model.biases[class_idx];
        for (std::size_t k = 0; k < model.dim; ++k) z += model.weights[class_idx][k] * x[k];
        double p = std::min(1.0 - 1e-12, std::max(1e-12, sigmoid(z)));
        double y = rec.label == model.classes[class_idx] ? 1.0 : 0.0;
        loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return loss / static_cast<double>(data.records.size());
}

// ---------------------------------------------------------------------------
// Decision tree: greedy recursive partitioning, candidate thresholds at
// midpoints between consecutive sorted unique feature values, split chosen to
// minimize weighted child Gini. x[j] <= threshold routes left.
// ---------------------------------------------------------------------------

struct DTConfig {
    int max_depth = 12;  // < 0 means unbounded
    std::size_t min_samples_split = 2;
};

struct DTNode {
    bool is_leaf = true;
    Label cls = Label::Neutral;
    std::array<std::size_t, kNumLabels> class_counts{};
    int feature = -1;
    double threshold = 0.0;
    std::unique_ptr<DTNode> left;
    std::unique_ptr<DTNode> right;
};

struct DTModel {
    std::size_t dim = 0;
    DTConfig cfg;
    std::unique_ptr<DTNode> root;
};

namespace detail {

inline Label majority(const std::array<std::size_t, kNumLabels>& counts) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = c;
    return label_from_index(static_cast<int>(best));
}

inline double gini(const std::array<std::size_t, kNumLabels>& counts, std::size_t total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (std::size_t c : counts) {
        double p = static_cast<double>(c) / static_cast<double>(total);
        g -= p * p;
    }
    return g;
}

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

// Feature subset for one node: all features, or ceil(fraction*d) sampled
// without replacement when an RF sampler is active.
inline std::vector<std::size_t> node_features(std::size_t d, double fraction, Rng* rng) {
    std::vector<std::size_t> feats(d);
    for (std::size_t i = 0; i < d; ++i) feats[i] = i;
    if (!rng || fraction <= 0.0 || fraction >= 1.0) return feats;
    std::size_t k = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(d)));
    k = std::max<std::size_t>(1, std::min(k, d));
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng->below(d - i));
        std::swap(feats[i], feats[j]);
    }
    feats.resize(k);
    std::sort(feats.begin(), feats.end());  // deterministic evaluation order
    return feats;
}

inline SplitChoice best_split(const corpus::EncodedDataset& data,
                              const std::vector<std::size_t>& idx,
                              const std::vector<std::size_t>& features) {
    SplitChoice best;
    const std::size_t n = idx.size();
    std::vector<std::pair<double, int>> column(n);
    for (std::size_t j : features) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& rec = data.records[idx[i]];
            column[i] = {rec.vec[j], label_index(rec.label)};
        }
        std::sort(column.begin(), column.end());
        std::array<std::size_t, kNumLabels> left{}, right{};
        for (const auto& [v, c] : column) ++right[static_cast<std::size_t>(c)];
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& [v, c] = column[i];
            ++left[static_cast<std::size_t>(c)];
            --right[static_cast<std::size_t>(c)];
            if (v == column[i + 1].first) continue;
            const std::size_t nl = i + 1, nr = n - nl;
            double score = (static_cast<double>(nl) * gini(left, nl) +
                            static_cast<double>(nr) * gini(right, nr)) /
                           static_cast<double>(n);
            if (!best.found || score < best.score - 1e-15) {
                best.found = true;
                best.feature = static_cast<int>(j);
                best.threshold = (v + column[i + 1].first) / 2.0;
                best.score = score;
            }
        }
    }
    return best;
}

inline std::unique_ptr<DTNode> build_tree(const corpus::EncodedDataset& data,
                                          std::vector<std::size_t> idx, int depth,
                                          const DTConfig& cfg, double feature_fraction,
                                          Rng* rng) {
    auto node = std::make_unique<DTNode>();
    for (std::size_t i : idx)
        ++node->class_counts[static_cast<std::size_t>(label_index(data.records[i].label))];
    node->cls = majority(node->class_counts);

    const bool pure = gini(node->class_counts, idx.size()) == 0.0;
    const bool depth_stop = cfg.max_depth >= 0 && depth >= cfg.max_depth;
    if (pure || depth_stop || idx.size() < cfg.min_samples_split) return node;

    auto features = node_features(data.dim, feature_fraction, rng);
    SplitChoice split = best_split(data, idx, features);
    if (!split.found) return node;

    std::vector<std::size_t> left_idx, right_idx;
    for (std::size_t i : idx) {
        if (data.records[i].vec[static_cast<std::size_t>(split.feature)] <= split.threshold)
            left_idx.push_back(i);
        else
            right_idx.push_back(i);
    }
    node->is_leaf = false;
    node->feature = split.feature;
    node->threshold = split.threshold;
    node->left = build_tree(data, std::move(left_idx), depth + 1, cfg, feature_fraction, rng);
    node->right = build_tree(data, std::move(right_idx), depth + 1, cfg, feature_fraction, rng);
    return node;
}

}  // namespace detail

inline DTModel dt_train(const corpus::EncodedDataset& data, const DTConfig& cfg = {}) {
    if (data.records.empty()) throw EmptyDataset();
    for (const auto& rec : data.records)
        if (rec.vec.size() != data.dim) throw DimensionMismatch(data.dim, rec.vec.size());
    DTModel model;
    model.dim = data.dim;
    model.cfg = cfg;
    std::vector<std::size_t> idx(data.records.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    model.root = detail::build_tree(data, std::move(idx), 0, cfg, 0.0, nullptr);
    return model;
}

inline Label dt_predict(const DTModel& model, const std::vector<double>& x) {
    if (x.size() != model.dim) throw DimensionMismatch(model.dim, x.size());
    const DTNode* node = model.root.get();
    while (!node->is_leaf) {
        node = x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left.get()
                                                                             : node->right.get();
    }
    return node->cls;
}

// ---------------------------------------------------------------------------
// Random forest: per-tree bootstrap samples drawn from sub-PRNG seed+m, a
// random feature subset per node, majority vote with lowest-class-index ties.
// ---------------------------------------------------------------------------

struct RFConfig {
    int num_trees = 100;
    double feature_fraction = 0.0;  // 0 => sqrt(d)/d
    std::uint64_t seed = 0;
    DTConfig tree;
};

struct RFModel {
    std::size_t dim = 0;
    RFConfig cfg;
    std::vector<DTModel> trees;
    std::vector<std::vector<std::size_t>> bootstrap_indices;  // for out-of-bag analysis
};

inline RFModel rf_train(const corpus::EncodedDataset& data, const RFConfig& cfg = {}) {
    if (data.records.empty()) throw EmptyDataset();
    if (cfg.num_trees < 1) throw ConfigError("random forest needs at least one tree");
    for (const auto& rec : data.records)
        if (rec.vec.size() != data.dim) throw DimensionMismatch(data.dim, rec.vec.size());

    RFModel model;
    model.dim = data.dim;
    model.cfg = cfg;
    double fraction = cfg.feature_fraction;
    if (fraction <= 0.0)
        fraction = std::sqrt(static_cast<double>(data.dim)) / static_cast<double>(data.dim);

    const std::size_t n = data.records.size();
    for (int m = 1; m <= cfg.num_trees; ++m) {
        Rng rng(cfg.seed + static_cast<std::uint64_t>(m));
        corpus::EncodedDataset sample;
        sample.dim = data.dim;
        std::vector<std::size_t> chosen(n);
        for (std::size_t i = 0; i < n; ++i) {
            chosen[i] = static_cast<std::size_t>(rng.below(n));
            sample.records.push_back(data.records[chosen[i]]);
        }
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        DTModel tree;
        tree.dim = data.dim;
        tree.cfg = cfg.tree;
        tree.root = detail::build_tree(sample, std::move(idx), 0, cfg.tree, fraction, &rng);
        model.trees.push_back(std::move(tree));
        model.bootstrap_indices.push_back(std::move(chosen));
    }
    return model;
}

inline Label vote_majority(const std::vector<Label>& votes) {
    std::array<std::size_t, kNumLabels> counts{};
    for (Label v : votes) ++counts[static_cast<std::size_t>(label_index(v))];
    return detail::majority(counts);
}

inline Label rf_predict(const RFModel& model, const std::vector<double>& x) {
    if (x.size() != model.dim) throw DimensionMismatch(model.dim, x.size());
    std::vector<Label> votes;
    votes.reserve(model.trees.size());
    for (const auto& tree : model.trees) votes.push_back(dt_predict(tree, x));
    return vote_majority(votes);
}

// ---------------------------------------------------------------------------
// Persistence: versioned JSON envelope {schema_version, model_type, config,
// parameters}; trees serialized as nested node records.
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::json lr_to_json(const LRModel& model) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["model_type"] = "lr";
    j["config"] = {{"learning_rate", model.cfg.learning_rate},
                   {"max_iterations", model.cfg.max_iterations},
                   {"grad_tolerance", model.cfg.grad_tolerance},
                   {"standardize", model.cfg.standardize}};
    nlohmann::json params;
    params["dim"] = model.dim;
    for (Label c : model.classes) params["classes"].push_back(to_string(c));
    params["weights"] = model.weights;
    params["biases"] = model.biases;
    params["standardized"] = model.standardized;
    params["scaler_mean"] = model.scaler.mean;
    params["scaler_stdev"] = model.scaler.stdev;
    j["parameters"] = params;
    return j;
}

inline LRModel lr_from_json(const nlohmann::json& j) {
    if (j.at("model_type") != "lr") throw DataError("not an lr model file");
    LRModel model;
    model.cfg.learning_rate = j.at("config").at("learning_rate").get<double>();
    model.cfg.max_iterations = j.at("config").at("max_iterations").get<int>();
    model.cfg.grad_tolerance = j.at("config").at("grad_tolerance").get<double>();
    model.cfg.standardize = j.at("config").at("standardize").get<bool>();
    const auto& params = j.at("parameters");
    model.dim = params.at("dim").get<std::size_t>();
    for (const auto& c : params.at("classes"))
        model.classes.push_back(*parse_label(c.get<std::string>()));
    model.weights = params.at("weights").get<std::vector<std::vector<double>>>();
    model.biases = params.at("biases").get<std::vector<double>>();
    model.standardized = params.at("standardized").get<bool>();
    model.scaler.mean = params.at("scaler_mean").get<std::vector<double>>();
    model.scaler.stdev = params.at("scaler_stdev").get<std::vector<double>>();
    return model;
}

namespace detail {

inline nlohmann::json node_to_json(const DTNode& node) {
    nlohmann::json j;
    j["counts"] = node.class_counts;
    if (node.is_leaf) {
        j["leaf"] = to_string(node.cls);
    } else {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = node_to_json(*node.left);
        j["right"] = node_to_json(*node.right);
    }
    return j;
}

inline std::unique_ptr<DTNode> node_from_json(const nlohmann::json& j) {
    auto node = std::make_unique<DTNode>();
    auto counts = j.at("counts").get<std::vector<std::size_t>>();
    for (std::size_t i = 0; i < counts.size() && i < kNumLabels; ++i)
        node->class_counts[i] = counts[i];
    node->cls = majority(node->class_counts);
    if (j.contains("leaf")) {
        node->is_leaf = true;
        node->cls = *parse_label(j.at("leaf").get<std::string>());
    } else {
        node->is_leaf = false;
        node->feature = j.at("feature").get<int>();
        node->threshold = j.at("threshold").get<double>();
        node->left = node_from_json(j.at("left"));
        node->right = node_from_json(j.at("right"));
    }
    return node;
}

}  // namespace detail

inline nlohmann::json dt_to_json(const DTModel& model) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["model_type"] = "dt";
    j["config"] = {{"max_depth", model.cfg.max_depth},
                   {"min_samples_split", model.cfg.min_samples_split},
                   {"criterion", "gini"}};
    j["parameters"] = {{"dim", model.dim}, {"tree", detail::node_to_json(*model.root)}};
    return j;
}

inline DTModel dt_from_json(const nlohmann::json& j) {
    if (j.at("model_type") != "dt") throw DataError("not a dt model file");
    DTModel model;
    model.cfg.max_depth = j.at("config").at("max_depth").get<int>();
    model.cfg.min_samples_split = j.at("config").at("min_samples_split").get<std::size_t>();
    model.dim = j.at("parameters").at("dim").get<std::size_t>();
    model.root = detail::node_from_json(j.at("parameters").at("tree"));
    return model;
}

inline nlohmann::json rf_to_json(const RFModel& model) {
    nlohmann::json j;
    j["schema_version"] = kModelSchemaVersion;
    j["model_type"] = "rf";
    j["config"] = {{"num_trees", model.cfg.num_trees},
                   {"feature_fraction", model.cfg.feature_fraction},
                   {"seed", model.cfg.seed},
                   {"max_depth", model.cfg.tree.max_depth},
                   {"min_samples_split", model.cfg.tree.min_samples_split}};
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& tree : model.trees) trees.push_back(detail::node_to_json(*tree.root));
    j["parameters"] = {{"dim", model.dim}, {"trees", trees}};
    return j;
}

inline RFModel rf_from_json(const nlohmann::json& j) {
    if (j.at("model_type") != "rf") throw DataError("not an rf model file");
    RFModel model;
    model.cfg.num_trees = j.at("config").at("num_trees").get<int>();
    model.cfg.feature_fraction = j.at("config").at("feature_fraction").get<double>();
    model.cfg.seed = j.at("config").at("seed").get<std::uint64_t>();
    model.cfg.tree.max_depth = j.at("config").at("max_depth").get<int>();
    model.cfg.tree.min_samples_split = j.at("config").at("min_samples_split").get<std::size_t>();
    model.dim = j.at("parameters").at("dim").get<std::size_t>();
    for (const auto& t : j.at("parameters").at("trees")) {
        DTModel tree;
        tree.dim = model.dim;
        tree.cfg = model.cfg.tree;
        tree.root = detail::node_from_json(t);
        model.trees.push_back(std::move(tree));
    }
    return model;
}

inline void save_model_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IOError("cannot write model " + path);
    out << j.dump(2) << '\n';
}

inline nlohmann::json load_model_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open model " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    return j;
}

}  // namespace threatlens::ml
