#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace threatlens::uni {

// Minimal UTF-8 handling: decode to codepoints, encode back, classify
// punctuation/symbols, and case-fold the scripts this toolkit deals with
// (Latin and Cyrillic; Arabic and Han have no case).

inline constexpr char32_t kReplacement = 0xFFFD;

inline std::u32string decode_utf8(const std::string& s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(s[i]);
        char32_t cp = kReplacement;
        std::size_t len = 1;
        if (c < 0x80) {
            cp = c;
        } else if ((c & 0xE0) == 0xC0 && i + 1 < n) {
            cp = static_cast<char32_t>(c & 0x1F) << 6 |
                 (static_cast<unsigned char>(s[i + 1]) & 0x3F);
            len = 2;
            if (cp < 0x80) cp = kReplacement;
        } else if ((c & 0xF0) == 0xE0 && i + 2 < n) {
            cp = static_cast<char32_t>(c & 0x0F) << 12 |
                 (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                 (static_cast<unsigned char>(s[i + 2]) & 0x3F);
            len = 3;
            if (cp < 0x800) cp = kReplacement;
        } else if ((c & 0xF8) == 0xF0 && i + 3 < n) {
            cp = static_cast<char32_t>(c & 0x07) << 18 |
                 (static_cast<char32_t>(static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
                 (static_cast<char32_t>(static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
                 (static_cast<unsigned char>(s[i + 3]) & 0x3F);
            len = 4;
            if (cp < 0x10000 || cp > 0x10FFFF) cp = kReplacement;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

inline std::string encode_utf8(const std::u32string& s) {
    std::string out;
    out.reserve(s.size() * 2);
    for (char32_t cp : s) append_utf8(out, cp);
    return out;
}

struct CpRange {
    char32_t lo;
    char32_t hi;
};

// Unicode general categories P* (punctuation) and S* (symbols).
inline bool is_punct_or_symbol(char32_t cp) {
    static const CpRange kRanges[] = {
#include "unicode_punct_ranges.inc"
    };
    static const std::size_t kCount = sizeof(kRanges) / sizeof(kRanges[0]);
    std::size_t lo = 0, hi = kCount;
    while (lo < hi) {
        std::size_t mid = (lo + hi) / 2;
        if (cp < kRanges[mid].lo) {
            hi = mid;
        } else if (cp > kRanges[mid].hi) {
            lo = mid + 1;
        } else {
            return true;
        }
    }
    return false;
}

inline bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' ||
           cp == U'\v' || cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200A) ||
           cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F;
}

// ASCII A-Z plus Cyrillic (incl. Ё); sufficient for en/ru, identity elsewhere.
inline char32_t fold_cp(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    if (cp >= 0x0410 && cp <= 0x042F) return cp + 0x20;  // А..Я -> а..я
    if (cp == 0x0401) return 0x0451;                     // Ё -> ё
    return cp;
}

inline std::string fold_case(const std::string& s) {
    // Fast path: pure ASCII.
    bool ascii = true;
    for (unsigned char c : s) {
        if (c >= 0x80) {
            ascii = false;
            break;
        }
    }
    if (ascii) {
        std::string out = s;
        for (char& c : out) {
            if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
        return out;
    }
    std::u32string cps = decode_utf8(s);
    for (char32_t& cp : cps) cp = fold_cp(cp);
    return encode_utf8(cps);
}

}  // namespace threatlens::uni
