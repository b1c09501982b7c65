#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "threatlens/unicode.hpp"

namespace threatlens::stem {

// Snowball Russian stemmer. Works on lowercase Cyrillic codepoints; words
// containing non-Cyrillic characters are returned unchanged.
namespace ru_detail {

inline bool is_vowel(char32_t c) {
    return c == U'а' || c == U'е' || c == U'и' || c == U'о' || c == U'у' || c == U'ы' ||
           c == U'э' || c == U'ю' || c == U'я';
}

inline bool is_cyrillic(char32_t c) { return (c >= 0x0430 && c <= 0x044F) || c == 0x0451; }

// RV: after the first vowel. R2: after the first non-vowel following a vowel
// inside R1 (itself after the first non-vowel following a vowel).
inline std::size_t rv_start(const std::u32string& w) {
    for (std::size_t i = 0; i < w.size(); ++i)
        if (is_vowel(w[i])) return i + 1;
    return w.size();
}

inline std::size_t region_after_vc(const std::u32string& w, std::size_t from) {
    for (std::size_t i = from; i + 1 < w.size(); ++i)
        if (is_vowel(w[i]) && !is_vowel(w[i + 1])) return i + 2;
    return w.size();
}

struct Ctx {
    std::u32string w;
    std::size_t rv = 0;
    std::size_t r2 = 0;
};

inline bool ends_in_rv(const Ctx& c, const std::u32string& suffix) {
    if (suffix.size() > c.w.size()) return false;
    if (c.w.size() - suffix.size() < c.rv) return false;
    return std::equal(suffix.begin(), suffix.end(), c.w.end() - suffix.size());
}

// Sorted longest-first so the first hit is the longest match.
inline std::vector<std::u32string> by_length(std::vector<std::u32string> v) {
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        return a.size() > b.size();
    });
    return v;
}

// Endings removed only when preceded by а or я; the preceding letter stays.
inline bool remove_group1(Ctx& c, const std::vector<std::u32string>& suffixes) {
    for (const auto& s : suffixes) {
        std::u32string a = U"а" + s;
        std::u32string ya = U"я" + s;
        if (ends_in_rv(c, a) || ends_in_rv(c, ya)) {
            c.w.resize(c.w.size() - s.size());
            return true;
        }
    }
    return false;
}

inline bool remove_plain(Ctx& c, const std::vector<std::u32string>& suffixes) {
    for (const auto& s : suffixes) {
        if (ends_in_rv(c, s)) {
            c.w.resize(c.w.size() - s.size());
            return true;
        }
    }
    return false;
}

inline const std::vector<std::u32string>& perfective1() {
    static const auto v = by_length({U"в", U"вши", U"вшись"});
    return v;
}
inline const std::vector<std::u32string>& perfective2() {
    static const auto v = by_length({U"ив", U"ивши", U"ившись", U"ыв", U"ывши", U"ывшись"});
    return v;
}
inline const std::vector<std::u32string>& adjective() {
    static const auto v = by_length({U"ее", U"ие", U"ые", U"ое", U"ими", U"ыми", U"ей", U"ий",
                                     U"ый", U"ой", U"ем", U"им", U"ым", U"ом", U"его", U"ого",
                                     U"ему", U"ому", U"их", U"ых", U"ую", U"юю", U"ая", U"яя",
                                     U"ою", U"ею"});
    return v;
}
inline const std::vector<std::u32string>& participle1() {
    static const auto v = by_length({U"ем", U"нн", U"вш", U"ющ", U"щ"});
    return v;
}
inline const std::vector<std::u32string>& participle2() {
    static const auto v = by_length({U"ивш", U"ывш", U"ующ"});
    return v;
}
inline const std::vector<std::u32string>& verb1() {
    static const auto v = by_length({U"ла", U"на", U"ете", U"йте", U"ли", U"й", U"л", U"ем",
                                     U"н", U"ло", U"но", U"ет", U"ют", U"ны", U"ть", U"ешь",
                                     U"нно"});
    return v;
}
inline const std::vector<std::u32string>& verb2() {
    static const auto v = by_length({U"ила", U"ыла", U"ена", U"ейте", U"уйте", U"ите", U"или",
                                     U"ыли", U"ей", U"уй", U"ил", U"ыл", U"им", U"ым", U"ен",
                                     U"ило", U"ыло", U"ено", U"ят", U"ует", U"уют", U"ит",
                                     U"ыт", U"ены", U"ить", U"ыть", U"ишь", U"ую", U"ю"});
    return v;
}
inline const std::vector<std::u32string>& noun() {
    static const auto v = by_length({U"а", U"ев", U"ов", U"ие", U"ье", U"е", U"иями", U"ями",
                                     U"ами", U"еи", U"ии", U"и", U"ией", U"ей", U"ой", U"ий",
                                     U"й", U"иям", U"ям", U"ием", U"ем", U"ам", U"ом", U"о",
                                     U"у", U"ах", U"иях", U"ях", U"ы", U"ь", U"ию", U"ью",
                                     U"ю", U"ия", U"ья", U"я"});
    return v;
}

inline bool perfective_gerund(Ctx& c) {
    // Longest overall match: group-2 endings checked first (they are the
    // group-1 endings prefixed with и/ы and therefore longer at equal tail).
    for (const auto& s : perfective2())
        if (ends_in_rv(c, s)) {
            c.w.resize(c.w.size() - s.size());
            return true;
        }
    return remove_group1(c, perfective1());
}

inline bool adjectival(Ctx& c) {
    if (!remove_plain(c, adjective())) return false;
    for (const auto& s : participle2())
        if (ends_in_rv(c, s)) {
            c.w.resize(c.w.size() - s.size());
            return true;
        }
    remove_group1(c, participle1());
    return true;
}

inline bool verb(Ctx& c) {
    for (const auto& s : verb2())
        if (ends_in_rv(c, s)) {
            c.w.resize(c.w.size() - s.size());
            return true;
        }
    return remove_group1(c, verb1());
}

}  // namespace ru_detail

inline std::string russian_stem(const std::string& word) {
    using namespace ru_detail;
    std::u32string cps = uni::decode_utf8(word);
    for (char32_t c : cps)
        if (!is_cyrillic(c)) return word;
    for (char32_t& c : cps)
        if (c == U'ё') c = U'е';

    Ctx c;
    c.w = cps;
    c.rv = rv_start(c.w);
    std::size_t r1 = region_after_vc(c.w, 0);
    c.r2 = region_after_vc(c.w, r1);

    // Step 1.
    if (!perfective_gerund(c)) {
        remove_plain(c, {U"ся", U"сь"});
        if (!adjectival(c)) {
            if (!verb(c)) remove_plain(c, noun());
        }
    }
    // Step 2.
    if (ends_in_rv(c, U"и")) c.w.pop_back();
    // Step 3: derivational, inside R2.
    for (const std::u32string& s : {std::u32string(U"ость"), std::u32string(U"ост")}) {
        if (s.size() <= c.w.size() && c.w.size() - s.size() >= c.r2 &&
            std::equal(s.begin(), s.end(), c.w.end() - s.size())) {
            c.w.resize(c.w.size() - s.size());
            break;
        }
    }
    // Step 4.
    if (c.w.size() >= 2 && c.w[c.w.size() - 1] == U'н' && c.w[c.w.size() - 2] == U'н') {
        c.w.pop_back();
    } else if (ends_in_rv(c, U"ейше") || ends_in_rv(c, U"ейш")) {
        c.w.resize(c.w.size() - (ends_in_rv(c, U"ейше") ? 4 : 3));
        if (c.w.size() >= 2 && c.w[c.w.size() - 1] == U'н' && c.w[c.w.size() - 2] == U'н')
            c.w.pop_back();
    } else if (!c.w.empty() && c.w.back() == U'ь') {
        c.w.pop_back();
    }
    return uni::encode_utf8(c.w);
}

}  // namespace threatlens::stem
