#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "threatlens/common.hpp"
#include "threatlens/unicode.hpp"

namespace threatlens::labeling {

// Word -> sentiment score in [-1, 1]. Keys are stored case-folded; lookups of
// absent words score 0 (neutral).
class SentimentLexicon {
public:
    SentimentLexicon() = default;
    explicit SentimentLexicon(Language lang) : lang_(lang) {}

    Language lang() const { return lang_; }
    std::size_t size() const { return entries_.size(); }

    void add(const std::string& word, double score) {
        if (!(score >= -1.0 && score <= 1.0))
            throw DataError("lexicon score out of [-1,1] for word: " + word);
        entries_[uni::fold_case(word)] = score;
    }

    double score(const std::string& word) const {
        auto it = entries_.find(uni::fold_case(word));
        return it == entries_.end() ? 0.0 : it->second;
    }

    bool contains(const std::string& word) const {
        return entries_.count(uni::fold_case(word)) > 0;
    }

private:
    Language lang_ = Language::En;
    std::unordered_map<std::string, double> entries_;
};

// TSV: word<TAB>score, one entry per line. Blank lines and lines starting
// with '#' are skipped.
inline SentimentLexicon load_lexicon_tsv(const std::string& path, Language lang) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IOError("cannot open lexicon " + path);
    SentimentLexicon lex(lang);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0)
            throw MalformedRecord(line_no, "lexicon line is not word<TAB>score");
        std::string word = line.substr(0, tab);
        double score = 0.0;
        try {
            std::size_t used = 0;
            score = std::stod(line.substr(tab + 1), &used);
            if (used == 0) throw std::invalid_argument("empty");
        } catch (const std::exception&) {
            throw MalformedRecord(line_no, "lexicon score is not a number");
        }
        if (!(score >= -1.0 && score <= 1.0))
            throw MalformedRecord(line_no, "lexicon score out of [-1,1]");
        lex.add(word, score);
    }
    return lex;
}

struct PolarityResult {
    double value = 0.0;
    std::size_t n = 0;
    Label label = Label::Neutral;
};

// Threat iff p <= -0.5; Non-threat iff p >= 0.5; Neutral on the open interval.
inline Label polarity_label(double p) {
    if (!std::isfinite(p)) throw NonFiniteInput();
    if (p <= -0.5) return Label::Threat;
    if (p >= 0.5) return Label::NonThreat;
    return Label::Neutral;
}

// P(T) = sum of word scores / word count.
inline PolarityResult polarity(const std::vector<std::string>& words,
                               const SentimentLexicon& lex) {
    if (words.empty()) throw EmptyTweet();
    double sum = 0.0;
    for (const auto& w : words) sum += lex.score(w);
    PolarityResult res;
    res.n = words.size();
    res.value = sum / static_cast<double>(res.n);
    res.label = polarity_label(res.value);
    return res;
}

// Manual annotation wins whenever it exists.
inline Label reconcile(std::optional<Label> manual, Label auto_label) {
    return manual ? *manual : auto_label;
}

}  // namespace threatlens::labeling
