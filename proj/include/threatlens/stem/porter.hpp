#pragma once

#include <string>

namespace threatlens::stem {

// Porter stemmer (1980), original rule tables. Operates on lowercase ASCII;
// words shorter than three letters or containing characters outside a-z are
// returned unchanged.
namespace porter_detail {

inline bool is_cons(const std::string& w, std::size_t i) {
    switch (w[i]) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return false;
        case 'y':
            return i == 0 ? true : !is_cons(w, i - 1);
        default:
            return true;
    }
}

// Number of VC sequences in w[0, end).
inline int measure(const std::string& w, std::size_t end) {
    int m = 0;
    std::size_t i = 0;
    while (i < end && is_cons(w, i)) ++i;
    while (i < end) {
        while (i < end && !is_cons(w, i)) ++i;
        if (i >= end) break;
        ++m;
        while (i < end && is_cons(w, i)) ++i;
    }
    return m;
}

inline bool has_vowel(const std::string& w, std::size_t end) {
    for (std::size_t i = 0; i < end; ++i)
        if (!is_cons(w, i)) return true;
    return false;
}

inline bool double_cons(const std::string& w) {
    std::size_t n = w.size();
    return n >= 2 && w[n - 1] == w[n - 2] && is_cons(w, n - 1);
}

// w[0, end) ends consonant-vowel-consonant, final consonant not w/x/y.
inline bool cvc(const std::string& w, std::size_t end) {
    if (end < 3) return false;
    if (!is_cons(w, end - 1) || is_cons(w, end - 2) || !is_cons(w, end - 3)) return false;
    char c = w[end - 1];
    return c != 'w' && c != 'x' && c != 'y';
}

inline bool ends(const std::string& w, const char* suffix, std::size_t& stem_len) {
    std::size_t sl = std::char_traits<char>::length(suffix);
    if (w.size() < sl) return false;
    if (w.compare(w.size() - sl, sl, suffix) != 0) return false;
    stem_len = w.size() - sl;
    return true;
}

// Replace the matched suffix if the stem's measure exceeds the threshold.
inline bool replace_if_m(std::string& w, std::size_t stem_len, const char* repl, int min_m) {
    if (measure(w, stem_len) > min_m) {
        w.resize(stem_len);
        w += repl;
        return true;
    }
    return false;
}

inline void step1(std::string& w) {
    std::size_t j = 0;
    if (ends(w, "sses", j)) {
        w.resize(w.size() - 2);
    } else if (ends(w, "ies", j)) {
        w.resize(w.size() - 2);
    } else if (ends(w, "ss", j)) {
        // keep
    } else if (ends(w, "s", j)) {
        w.pop_back();
    }

    bool cleanup = false;
    if (ends(w, "eed", j)) {
        if (measure(w, j) > 0) w.pop_back();
    } else if (ends(w, "ed", j) && has_vowel(w, j)) {
        w.resize(j);
        cleanup = true;
    } else if (ends(w, "ing", j) && has_vowel(w, j)) {
        w.resize(j);
        cleanup = true;
    }
    if (cleanup) {
        if (ends(w, "at", j) || ends(w, "bl", j) || ends(w, "iz", j)) {
            w += 'e';
        } else if (double_cons(w)) {
            char c = w.back();
            if (c != 'l' && c != 's' && c != 'z') w.pop_back();
        } else if (measure(w, w.size()) == 1 && cvc(w, w.size())) {
            w += 'e';
        }
    }

    if (!w.empty() && w.back() == 'y' && has_vowel(w, w.size() - 1)) w.back() = 'i';
}

struct Rule {
    const char* suffix;
    const char* repl;
};

// At most one candidate per step: the longest listed suffix that matches.
inline void apply_table(std::string& w, const Rule* rules, std::size_t count, int min_m) {
    for (std::size_t r = 0; r < count; ++r) {
        std::size_t j = 0;
        if (ends(w, rules[r].suffix, j)) {
            replace_if_m(w, j, rules[r].repl, min_m);
            return;
        }
    }
}

inline void step2(std::string& w) {
    static const Rule rules[] = {
        {"ational", "ate"}, {"ization", "ize"}, {"iveness", "ive"}, {"fulness", "ful"},
        {"ousness", "ous"}, {"tional", "tion"}, {"biliti", "ble"},  {"entli", "ent"},
        {"ousli", "ous"},   {"alism", "al"},    {"aliti", "al"},    {"iviti", "ive"},
        {"ation", "ate"},   {"enci", "ence"},   {"anci", "ance"},   {"izer", "ize"},
        {"abli", "able"},   {"alli", "al"},     {"ator", "ate"},    {"eli", "e"},
    };
    apply_table(w, rules, sizeof(rules) / sizeof(rules[0]), 0);
}

inline void step3(std::string& w) {
    static const Rule rules[] = {
        {"icate", "ic"}, {"ative", ""}, {"alize", "al"}, {"iciti", "ic"},
        {"ical", "ic"},  {"ness", ""},  {"ful", ""},
    };
    apply_table(w, rules, sizeof(rules) / sizeof(rules[0]), 0);
}

inline void step4(std::string& w) {
    static const char* suffixes[] = {"ement", "ance", "ence", "able", "ible", "ment",
                                     "ant",  "ent",  "ion",  "ism",  "ate",  "iti",
                                     "ous",  "ive",  "ize",  "al",   "er",   "ic",
                                     "ou"};
    for (const char* s : suffixes) {
        std::size_t j = 0;
        if (ends(w, s, j)) {
            bool ok = measure(w, j) > 1;
            if (ok && s[0] == 'i' && s[1] == 'o' && s[2] == 'n')
                ok = j > 0 && (w[j - 1] == 's' || w[j - 1] == 't');
            if (ok) w.resize(j);
            return;
        }
    }
}

inline void step5(std::string& w) {
    if (!w.empty() && w.back() == 'e') {
        int m = measure(w, w.size());
        if (m > 1 || (m == 1 && !cvc(w, w.size() - 1))) w.pop_back();
    }
    if (w.size() >= 2 && w.back() == 'l' && double_cons(w) && measure(w, w.size()) > 1)
        w.pop_back();
}

}  // namespace porter_detail

inline std::string porter_stem(const std::string& word) {
    if (word.size() <= 2) return word;
    for (char c : word)
        if (c < 'a' || c > 'z') return word;
    std::string w = word;
    porter_detail::step1(w);
    porter_detail::step2(w);
    porter_detail::step3(w);
    porter_detail::step4(w);
    porter_detail::step5(w);
    return w;
}

}  // namespace threatlens::stem
