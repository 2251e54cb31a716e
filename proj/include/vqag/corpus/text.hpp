#pragma once

// UTF-8 handling and the word/punctuation tokenizer. All character offsets are
// code-point offsets, which is how SQuAD counts `answer_start`.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace vqag {

inline std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    std::size_t n = 0;
    if (c < 0x80) {
      cp = c;
      n = 1;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      n = 2;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      n = 3;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      n = 4;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    if (i + n > s.size()) {
      out.push_back(0xFFFD);
      break;
    }
    bool ok = true;
    for (std::size_t k = 1; k < n; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += n;
  }
  return out;
}

inline void utf8_append(std::string& out, char32_t cp) {
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

inline std::string utf8_encode(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) utf8_append(out, cp);
  return out;
}

/// Simple case folding for Latin, Greek and Cyrillic letters.
inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0x80) return c;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 32;
  if (c >= 0x100 && c <= 0x137 && (c % 2 == 0)) return c + 1;
  if (c >= 0x139 && c <= 0x148 && (c % 2 == 1)) return c + 1;
  if (c >= 0x14A && c <= 0x177 && (c % 2 == 0)) return c + 1;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E && (c % 2 == 1)) return c + 1;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  return c;
}

inline std::string lowercase(std::string_view s) {
  std::u32string cps = utf8_decode(s);
  for (char32_t& c : cps) c = to_lower(c);
  return utf8_encode(cps);
}

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' ||
         c == U'\v' || c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200B) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000 ||
         c == 0xFEFF;
}

inline bool is_digit(char32_t c) { return c >= U'0' && c <= U'9'; }

/// Letters, digits and non-punctuation code points outside ASCII.
inline bool is_word_char(char32_t c) {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || is_digit(c);
  if (c >= 0xA0 && c <= 0xBF) return false;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x206F) return false;
  if (c >= 0x20A0 && c <= 0x20CF) return false;
  if (c >= 0x2190 && c <= 0x2BFF) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c >= 0xFF00 && c <= 0xFF0F) return false;
  return !is_space(c);
}

inline bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

struct Token {
  std::string surface;  // lowercased
  int char_start = 0;   // code-point offsets into the original text
  int char_end = 0;     // exclusive
};

/// Lowercasing splitter. Words are maximal runs of word characters; digits
/// keep inner '.' and ',' ("3.5", "75,722"); an apostrophe glued to a
/// preceding word starts a clitic token ("beyoncé" "'s"); every other
/// non-space character is its own token.
inline std::vector<Token> tokenize(std::string_view text) {
  std::u32string cps = utf8_decode(text);
  std::vector<Token> out;
  const int n = static_cast<int>(cps.size());
  auto emit = [&](int b, int e) {
    std::u32string piece(cps.begin() + b, cps.begin() + e);
    for (char32_t& c : piece) c = to_lower(c);
    out.push_back(Token{utf8_encode(piece), b, e});
  };
  int i = 0;
  while (i < n) {
    char32_t c = cps[static_cast<std::size_t>(i)];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (is_word_char(c)) {
      int j = i + 1;
      while (j < n) {
        char32_t d = cps[static_cast<std::size_t>(j)];
        if (is_word_char(d)) {
          ++j;
        } else if ((d == U'.' || d == U',') && is_digit(cps[static_cast<std::size_t>(j - 1)]) &&
                   j + 1 < n && is_digit(cps[static_cast<std::size_t>(j + 1)])) {
          j += 2;
        } else {
          break;
        }
      }
      emit(i, j);
      i = j;
      continue;
    }
    if (is_apostrophe(c) && !out.empty() && out.back().char_end == i && i + 1 < n &&
        is_word_char(cps[static_cast<std::size_t>(i + 1)])) {
      int j = i + 1;
      while (j < n && is_word_char(cps[static_cast<std::size_t>(j)])) ++j;
      emit(i, j);
      i = j;
      continue;
    }
    emit(i, i + 1);
    ++i;
  }
  return out;
}

/// Characters of a (lowercased) token, one UTF-8 string per code point.
inline std::vector<std::string> split_chars(std::string_view word) {
  std::vector<std::string> out;
  for (char32_t cp : utf8_decode(word)) {
    std::string s;
    utf8_append(s, cp);
    out.push_back(std::move(s));
  }
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Substring by code-point offsets.
inline std::string cp_substr(std::string_view text, int start, int len) {
  std::u32string cps = utf8_decode(text);
  if (start < 0 || len < 0 || static_cast<std::size_t>(start + len) > cps.size()) return {};
  return utf8_encode(std::u32string_view(cps).substr(static_cast<std::size_t>(start),
                                                     static_cast<std::size_t>(len)));
}

inline int cp_length(std::string_view text) { return static_cast<int>(utf8_decode(text).size()); }

}  // namespace vqag
