#pragma once

#include <array>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "threatlens/common.hpp"

namespace threatlens::metrics {

// Rows are true classes, columns predicted, both in the fixed order
// Threat, Neutral, NonThreat.
struct ConfusionMatrix {
    std::array<std::array<std::size_t, kNumLabels>, kNumLabels> counts{};

    std::size_t total() const {
        std::size_t t = 0;
        for (const auto& row : counts)
            for (std::size_t c : row) t += c;
        return t;
    }

    std::size_t row_sum(int i) const {
        std::size_t t = 0;
        for (std::size_t c : counts[static_cast<std::size_t>(i)]) t += c;
        return t;
    }

    std::size_t col_sum(int j) const {
        std::size_t t = 0;
        for (const auto& row : counts) t += row[static_cast<std::size_t>(j)];
        return t;
    }

    bool operator==(const ConfusionMatrix&) const = default;
};

inline ConfusionMatrix confusion(const std::vector<Label>& y_true,
                                 const std::vector<Label>& y_pred) {
    if (y_true.size() != y_pred.size()) throw LengthMismatch(y_true.size(), y_pred.size());
    if (y_true.empty()) throw EmptyInput("no predictions to score");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i)
        ++cm.counts[static_cast<std::size_t>(label_index(y_true[i]))]
                   [static_cast<std::size_t>(label_index(y_pred[i]))];
    return cm;
}

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
    bool precision_zero_division = false;
    bool recall_zero_division = false;
};

struct EvalReport {
    std::array<ClassMetrics, kNumLabels> per_class{};
    double accuracy = 0.0;
    double precision_macro = 0.0;  // PMA
    double recall_macro = 0.0;     // RMA
    double f1_macro = 0.0;         // FMA
    double precision_weighted = 0.0;  // PWA
    double recall_weighted = 0.0;     // RWA
    double f1_weighted = 0.0;         // FWA
    std::optional<double> loss;
    ConfusionMatrix cm;
};

// Per-class precision/recall/F1 with zero-denominator classes scored 0 and
// flagged. Macro averages run over the classes present in y_true; weighted
// averages are support-weighted.
inline EvalReport report(const ConfusionMatrix& cm) {
    EvalReport rep;
    rep.cm = cm;
    const std::size_t total = cm.total();
    std::size_t diag = 0;
    std::size_t present = 0;

    for (int c = 0; c < kNumLabels; ++c) {
        auto& m = rep.per_class[static_cast<std::size_t>(c)];
        const std::size_t tp = cm.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        const std::size_t predicted = cm.col_sum(c);
        const std::size_t actual = cm.row_sum(c);
        m.support = actual;
        diag += tp;
        if (predicted == 0) {
            m.precision = 0.0;
            m.precision_zero_division = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(predicted);
        }
        if (actual == 0) {
            m.recall = 0.0;
            m.recall_zero_division = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(actual);
        }
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;

        if (actual > 0) {
            ++present;
            rep.precision_macro += m.precision;
            rep.recall_macro += m.recall;
            rep.f1_macro += m.f1;
            const double w = static_cast<double>(actual);
            rep.precision_weighted += w * m.precision;
            rep.recall_weighted += w * m.recall;
            rep.f1_weighted += w * m.f1;
        }
    }
    if (present > 0) {
        rep.precision_macro /= static_cast<double>(present);
        rep.recall_macro /= static_cast<double>(present);
        rep.f1_macro /= static_cast<double>(present);
    }
    if (total > 0) {
        rep.accuracy = static_cast<double>(diag) / static_cast<double>(total);
        rep.precision_weighted /= static_cast<double>(total);
        rep.recall_weighted /= static_cast<double>(total);
        rep.f1_weighted /= static_cast<double>(total);
    }
    return rep;
}

// Mean -log p(true class), probabilities clamped to [1e-12, 1].
inline double cross_entropy(const std::vector<std::vector<double>>& probs,
                            const std::vector<Label>& y_true) {
    if (probs.size() != y_true.size()) throw LengthMismatch(probs.size(), y_true.size());
    if (probs.empty()) throw EmptyInput("no probabilities to score");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const auto& row = probs[i];
        double row_sum = 0.0;
        for (double p : row) row_sum += p;
        if (std::abs(row_sum - 1.0) > 1e-6)
            throw DataError("probability row " + std::to_string(i) + " does not sum to 1");
        const std::size_t idx = static_cast<std::size_t>(label_index(y_true[i]));
        if (idx >= row.size()) throw ShapeError("true class outside probability row");
        double p = std::min(1.0, std::max(1e-12, row[idx]));
        sum -= std::log(p);
    }
    return sum / static_cast<double>(probs.size());
}

// ---------------------------------------------------------------------------
// Rendering.
// ---------------------------------------------------------------------------

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    static const char* names[] = {"threat", "neutral", "non-threat"};
    for (int c = 0; c < kNumLabels; ++c) {
        const auto& m = rep.per_class[static_cast<std::size_t>(c)];
        nlohmann::json cls;
        cls["precision"] = m.precision;
        cls["recall"] = m.recall;
        cls["f1"] = m.f1;
        cls["support"] = m.support;
        if (m.precision_zero_division) cls["precision_zero_division"] = true;
        if (m.recall_zero_division) cls["recall_zero_division"] = true;
        j["per_class"][names[c]] = cls;
    }
    j["accuracy"] = rep.accuracy;
    j["pma"] = rep.precision_macro;
    j["rma"] = rep.recall_macro;
    j["fma"] = rep.f1_macro;
    j["pwa"] = rep.precision_weighted;
    j["rwa"] = rep.recall_weighted;
    j["fwa"] = rep.f1_weighted;
    if (rep.loss) j["loss"] = *rep.loss;
    nlohmann::json cm = nlohmann::json::array();
    for (const auto& row : rep.cm.counts) cm.push_back(row);
    j["confusion"] = cm;
    return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
    EvalReport rep;
    static const char* names[] = {"threat", "neutral", "non-threat"};
    for (int c = 0; c < kNumLabels; ++c) {
        const auto& cls = j.at("per_class").at(names[c]);
        auto& m = rep.per_class[static_cast<std::size_t>(c)];
        m.precision = cls.at("precision").get<double>();
        m.recall = cls.at("recall").get<double>();
        m.f1 = cls.at("f1").get<double>();
        m.support = cls.at("support").get<std::size_t>();
        m.precision_zero_division = cls.value("precision_zero_division", false);
        m.recall_zero_division = cls.value("recall_zero_division", false);
    }
    rep.accuracy = j.at("accuracy").get<double>();
    rep.precision_macro = j.at("pma").get<double>();
    rep.recall_macro = j.at("rma").get<double>();
    rep.f1_macro = j.at("fma").get<double>();
    rep.precision_weighted = j.at("pwa").get<double>();
    rep.recall_weighted = j.at("rwa").get<double>();
    rep.f1_weighted = j.at("fwa").get<double>();
    if (j.contains("loss")) rep.loss = j.at("loss").get<double>();
    for (int r = 0; r < kNumLabels; ++r)
        for (int c = 0; c < kNumLabels; ++c)
            rep.cm.counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] =
                j.at("confusion").at(r).at(c).get<std::size_t>();
    return rep;
}

// Aligned text table: per-category precision,
// recall and F1 (Th/Neu/Non-Th), then Accuracy, PMA, RMA, FMA, PWA, RWA, FWA.
// Zero-support classes are omitted from the category columns.
inline std::string report_table(const EvalReport& rep, const std::string& row_name) {
    static const char* short_names[] = {"Th", "Neu", "Non-Th"};
    std::vector<int> present;
    for (int c = 0; c < kNumLabels; ++c)
        if (rep.per_class[static_cast<std::size_t>(c)].support > 0) present.push_back(c);
    if (present.empty())
        for (int c = 0; c < kNumLabels; ++c) present.push_back(c);

    std::ostringstream os;
    os << std::fixed << std::setprecision(2);
    os << std::left << std::setw(12) << "Model";
    for (const char* metric : {"P", "R", "F1"})
        for (int c : present) {
            std::string head = std::string(metric) + "(" + short_names[c] + ")";
            os << std::right << std::setw(10) << head;
        }
    for (const char* head : {"Accuracy", "PMA", "RMA", "FMA", "PWA", "RWA", "FWA"})
        os << std::right << std::setw(10) << head;
    os << '\n';

    os << std::left << std::setw(12) << row_name;
    for (int c : present)
        os << std::right << std::setw(10) << rep.per_class[static_cast<std::size_t>(c)].precision;
    for (int c : present)
        os << std::right << std::setw(10) << rep.per_class[static_cast<std::size_t>(c)].recall;
    for (int c : present)
        os << std::right << std::setw(10) << rep.per_class[static_cast<std::size_t>(c)].f1;
    os << std::right << std::setw(10) << rep.accuracy << std::setw(10) << rep.precision_macro
       << std::setw(10) << rep.recall_macro << std::setw(10) << rep.f1_macro << std::setw(10)
       << rep.precision_weighted << std::setw(10) << rep.recall_weighted << std::setw(10)
       << rep.f1_weighted << '\n';
    return os.str();
}

}  // namespace threatlens::metrics
