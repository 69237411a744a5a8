#include "rvcheck/normalize.hpp"

#include <cstdint>
#include <vector>

namespace rvcheck {

namespace {

// Decodes one UTF-8 sequence starting at i; malformed bytes pass through as
// single code points so normalization stays total.
char32_t decode_utf8(std::string_view s, size_t& i) {
    unsigned char b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        ++i;
        return b0;
    }
    if (i + len > s.size()) {
        ++i;
        return b0;
    }
    for (int k = 1; k < len; ++k) {
        unsigned char bk = static_cast<unsigned char>(s[i + k]);
        if ((bk & 0xC0) != 0x80) {
            ++i;
            return b0;
        }
        cp = (cp << 6) | (bk & 0x3F);
    }
    i += len;
    return cp;
}

void encode_utf8(char32_t cp, std::string& out) {
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

bool is_unicode_space(char32_t cp) {
    if (cp == 0x00A0 || cp == 0x1680 || cp == 0x202F || cp == 0x205F || cp == 0x3000 || cp == 0xFEFF)
        return true;
    return cp >= 0x2000 && cp <= 0x200B;
}

char32_t lower_latin(char32_t cp) {
    if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
    // Latin-1 supplement, skipping the multiplication sign
    if (cp >= 0x00C0 && cp <= 0x00DE && cp != 0x00D7) return cp + 0x20;
    // Latin Extended-A: paired upper/lower code points. The pairing parity
    // flips between the kra sign (0x0138) and 0x0149, both unpaired.
    if (cp >= 0x0100 && cp <= 0x0137) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp >= 0x0139 && cp <= 0x0148) return (cp % 2 == 1) ? cp + 1 : cp;
    if (cp >= 0x014A && cp <= 0x0177) return (cp % 2 == 0) ? cp + 1 : cp;
    if (cp == 0x0178) return 0x00FF;
    if (cp == 0x0179 || cp == 0x017B || cp == 0x017D) return cp + 1;
    return cp;
}

// Compatibility fold for the scripts entity names actually use: fullwidth
// forms, typographic punctuation, unicode spaces, fi/fl ligatures. Other
// code points pass through unchanged.
void fold_codepoint(char32_t cp, std::u32string& out) {
    if (cp >= 0xFF01 && cp <= 0xFF5E) {
        out.push_back(lower_latin(cp - 0xFEE0));
        return;
    }
    if (is_unicode_space(cp)) {
        out.push_back(U' ');
        return;
    }
    switch (cp) {
        case 0x2018:
        case 0x2019:
        case 0x201A:
        case 0x201B:
            out.push_back(U'\'');
            return;
        case 0x201C:
        case 0x201D:
        case 0x201E:
        case 0x201F:
            out.push_back(U'"');
            return;
        case 0x2010:
        case 0x2011:
        case 0x2012:
        case 0x2013:
        case 0x2014:
        case 0x2015:
        case 0x2212:
            out.push_back(U'-');
            return;
        case 0x2026:
            out.append(U"...");
            return;
        case 0xFB00:
            out.append(U"ff");
            return;
        case 0xFB01:
            out.append(U"fi");
            return;
        case 0xFB02:
            out.append(U"fl");
            return;
        case 0xFB03:
            out.append(U"ffi");
            return;
        case 0xFB04:
            out.append(U"ffl");
            return;
        default:
            out.push_back(lower_latin(cp));
    }
}

bool is_ascii_ws(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminal_punct(char c) {
    return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':';
}

bool is_quote(char c) { return c == '"' || c == '\''; }

}  // namespace

std::string normalize(std::string_view text) {
    std::u32string folded;
    folded.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) fold_codepoint(decode_utf8(text, i), folded);

    std::string s;
    s.reserve(folded.size());
    for (char32_t cp : folded) encode_utf8(cp, s);

    // Trim and strip surrounding quotes / terminal punctuation to a fixed point.
    size_t begin = 0, end = s.size();
    bool changed = true;
    while (changed) {
        changed = false;
        while (begin < end && is_ascii_ws(s[begin])) ++begin, changed = true;
        while (end > begin && is_ascii_ws(s[end - 1])) --end, changed = true;
        while (end > begin && is_terminal_punct(s[end - 1])) --end, changed = true;
        while (begin < end && is_quote(s[begin])) ++begin, changed = true;
        while (end > begin && is_quote(s[end - 1])) --end, changed = true;
    }
    s = s.substr(begin, end - begin);

    std::string out;
    out.reserve(s.size());
    bool in_ws = false;
    for (char c : s) {
        if (is_ascii_ws(c)) {
            in_ws = true;
            continue;
        }
        if (in_ws && !out.empty()) out.push_back(' ');
        in_ws = false;
        out.push_back(c);
    }
    return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
    return normalize(haystack).find(normalize(needle)) != std::string::npos;
}

}  // namespace rvcheck
