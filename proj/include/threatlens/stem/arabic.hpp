#pragma once

#include <string>
#include <vector>

#include "threatlens/unicode.hpp"

namespace threatlens::stem {

// Light Arabic stemmer: diacritic removal, alef normalization, then article/
// conjunction prefixes and common suffixes stripped to a fixpoint so the
// function is idempotent. Words with no Arabic-script characters pass through.
namespace ar_detail {

inline bool is_diacritic(char32_t c) {
    return (c >= 0x064B && c <= 0x0652) || c == 0x0670 || c == 0x0640;  // incl. tatweel
}

inline bool is_arabic(char32_t c) { return c >= 0x0600 && c <= 0x06FF; }

inline char32_t normalize_alef(char32_t c) {
    if (c == 0x0622 || c == 0x0623 || c == 0x0625 || c == 0x0671) return 0x0627;  // آأإٱ -> ا
    return c;
}

inline bool starts_with(const std::u32string& w, const std::u32string& p) {
    return w.size() >= p.size() && std::equal(p.begin(), p.end(), w.begin());
}

inline bool ends_with(const std::u32string& w, const std::u32string& s) {
    return w.size() >= s.size() && std::equal(s.begin(), s.end(), w.end() - s.size());
}

}  // namespace ar_detail

inline std::string arabic_stem(const std::string& word) {
    using namespace ar_detail;
    std::u32string cps;
    bool any_arabic = false;
    for (char32_t c : uni::decode_utf8(word)) {
        if (is_diacritic(c)) continue;
        c = normalize_alef(c);
        if (is_arabic(c)) any_arabic = true;
        cps.push_back(c);
    }
    if (!any_arabic) return word;

    static const std::vector<std::u32string> prefixes = {U"وال", U"فال", U"بال",
                                                         U"كال", U"لل",  U"ال"};
    static const std::vector<std::u32string> suffixes = {U"ها", U"ان", U"ات", U"ون", U"ين",
                                                         U"يه", U"ية", U"ه",  U"ة",  U"ي"};
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto& p : prefixes) {
            if (starts_with(cps, p) && cps.size() - p.size() >= 2) {
                cps.erase(0, p.size());
                changed = true;
                break;
            }
        }
        if (starts_with(cps, U"و") && cps.size() >= 4) {
            cps.erase(0, 1);
            changed = true;
        }
        for (const auto& s : suffixes) {
            if (ends_with(cps, s) && cps.size() - s.size() >= 2) {
                cps.resize(cps.size() - s.size());
                changed = true;
            }
        }
    }
    return uni::encode_utf8(cps);
}

}  // namespace threatlens::stem
