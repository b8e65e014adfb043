#include "curator/unicode.hpp"

#include <algorithm>
#include <cctype>

namespace curator::uni {

std::u32string decode(std::string_view text) {
    std::u32string out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto n = text.size();
    while (i < n) {
        const auto b0 = static_cast<unsigned char>(text[i]);
        if (b0 < 0x80) {
            out.push_back(b0);
            ++i;
            continue;
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
            out.push_back(kReplacementChar);
            ++i;
            continue;
        }
        if (i + len > n) {
            out.push_back(kReplacementChar);
            ++i;
            continue;
        }
        bool ok = true;
        for (int j = 1; j < len; ++j) {
            const auto b = static_cast<unsigned char>(text[i + j]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (b & 0x3F);
        }
        // Reject overlong encodings, surrogates, and out-of-range values.
        if (ok) {
            if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
                (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) {
                ok = false;
            }
        }
        if (!ok) {
            out.push_back(kReplacementChar);
            ++i;
            continue;
        }
        out.push_back(cp);
        i += len;
    }
    return out;
}

std::string encode(char32_t cp) {
    std::string out;
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
    return out;
}

std::string encode(std::u32string_view cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) out += encode(cp);
    return out;
}

std::size_t codepoint_count(std::string_view text) {
    std::size_t count = 0;
    for (char c : text) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++count;
    }
    return count;
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) ||    // CJK Unified Ideographs
           (cp >= 0x3400 && cp <= 0x4DBF) ||    // Extension A
           (cp >= 0x20000 && cp <= 0x2A6DF) ||  // Extension B
           (cp >= 0x2A700 && cp <= 0x2EBEF) ||  // Extensions C-F
           (cp >= 0xF900 && cp <= 0xFAFF);      // Compatibility Ideographs
}

bool is_space(char32_t cp) {
    return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' || cp == U'\f' || cp == U'\v' ||
           cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200A);
}

bool is_ascii_digit(char32_t cp) { return cp >= U'0' && cp <= U'9'; }

bool is_ascii_alpha(char32_t cp) {
    return (cp >= U'a' && cp <= U'z') || (cp >= U'A' && cp <= U'Z');
}

Script script_of(char32_t cp) {
    if (is_cjk(cp)) return Script::cjk;
    if ((cp >= 0x3040 && cp <= 0x309F) || (cp >= 0x30A0 && cp <= 0x30FF)) return Script::kana;
    if ((cp >= 0xAC00 && cp <= 0xD7AF) || (cp >= 0x1100 && cp <= 0x11FF)) return Script::hangul;
    if (cp >= 0x0400 && cp <= 0x04FF) return Script::cyrillic;
    if ((cp >= 0x0600 && cp <= 0x06FF) || (cp >= 0x0750 && cp <= 0x077F)) return Script::arabic;
    if (cp >= 0x0370 && cp <= 0x03FF) return Script::greek;
    if (cp >= 0x0590 && cp <= 0x05FF) return Script::hebrew;
    if (cp >= 0x0900 && cp <= 0x097F) return Script::devanagari;
    if (is_ascii_alpha(cp) || (cp >= 0x00C0 && cp <= 0x024F)) return Script::latin;
    return Script::common;
}

double cjk_fraction(std::string_view text) {
    std::size_t cjk = 0;
    std::size_t total = 0;
    for (char32_t cp : decode(text)) {
        if (is_space(cp)) continue;
        ++total;
        if (is_cjk(cp)) ++cjk;
    }
    if (total == 0) return 0.0;
    return static_cast<double>(cjk) / static_cast<double>(total);
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto pos = text.find('\n', start);
        if (pos == std::string_view::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, pos - start));
        start = pos + 1;
        if (start == text.size()) break;  // trailing LF closes the last line
    }
    return lines;
}

namespace {

bool is_blank(std::string_view line) {
    for (char32_t cp : decode(line)) {
        if (!is_space(cp)) return false;
    }
    return true;
}

}  // namespace

std::vector<std::string> split_paragraphs(std::string_view text) {
    std::vector<std::string> paragraphs;
    std::string current;
    for (auto line : split_lines(text)) {
        if (is_blank(line)) {
            if (!current.empty()) {
                paragraphs.push_back(std::move(current));
                current.clear();
            }
        } else {
            if (!current.empty()) current.push_back('\n');
            current += std::string(line);
        }
    }
    if (!current.empty()) paragraphs.push_back(std::move(current));
    return paragraphs;
}

std::vector<std::string> split_sentences(std::string_view text, std::u32string_view terminals) {
    std::vector<std::string> sentences;
    const auto cps = decode(text);
    std::u32string current;
    for (char32_t cp : cps) {
        current.push_back(cp);
        if (terminals.find(cp) != std::u32string_view::npos) {
            auto s = trim(encode(current));
            if (!s.empty()) sentences.push_back(std::move(s));
            current.clear();
        }
    }
    auto s = trim(encode(current));
    if (!s.empty()) sentences.push_back(std::move(s));
    return sentences;
}

std::size_t word_count(std::string_view line) {
    std::size_t words = 0;
    bool in_word = false;
    for (char32_t cp : decode(line)) {
        if (is_space(cp)) {
            in_word = false;
        } else if (is_cjk(cp)) {
            ++words;
            in_word = false;
        } else {
            if (!in_word) ++words;
            in_word = true;
        }
    }
    return words;
}

std::string to_lower_ascii(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view text) {
    const auto cps = decode(text);
    std::size_t begin = 0;
    std::size_t end = cps.size();
    while (begin < end && is_space(cps[begin])) ++begin;
    while (end > begin && is_space(cps[end - 1])) --end;
    return encode(std::u32string_view(cps).substr(begin, end - begin));
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return 0;
    std::size_t count = 0;
    std::size_t pos = 0;
    while ((pos = haystack.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

}  // namespace curator::uni
