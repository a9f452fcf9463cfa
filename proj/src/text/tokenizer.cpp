#include "mmkd/text/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>

namespace mmkd::text {

namespace {

// Longest first so greedy matching prefers ":-)" over ":-".
constexpr std::array<std::string_view, 26> kEmoticons = {
    ":'-(", ":'(", ":-)", ":-(", ":-d", ":-p", ";-)", "</3", "-_-", "t_t", "^_^",
    ":)",   ":(",  ":d",  ":p",  ":/",  ":|",  ";)",  "<3",  "xd",  ":o",  ":*",
    ":3",   ":@",  "=)",  "=("};

constexpr std::array<std::string_view, 2> kPlaceholders = {"_USER_", "_URL_"};

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::uint32_t decode(std::string_view s, std::size_t at, std::size_t len) {
  const auto b = [&](std::size_t i) { return static_cast<unsigned char>(s[at + i]); };
  switch (len) {
    case 2: return ((b(0) & 0x1Fu) << 6) | (b(1) & 0x3Fu);
    case 3: return ((b(0) & 0x0Fu) << 12) | ((b(1) & 0x3Fu) << 6) | (b(2) & 0x3Fu);
    case 4:
      return ((b(0) & 0x07u) << 18) | ((b(1) & 0x3Fu) << 12) | ((b(2) & 0x3Fu) << 6) |
             (b(3) & 0x3Fu);
    default: return b(0);
  }
}

bool is_emoji(std::uint32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) ||
         (cp >= 0x2B00 && cp <= 0x2BFF) || cp == 0x2764;
}

// Variation selectors and zero-width joiners glue onto the preceding emoji.
bool is_emoji_modifier(std::uint32_t cp) {
  return cp == 0xFE0F || cp == 0x200D || (cp >= 0x1F3FB && cp <= 0x1F3FF);
}

bool is_word_byte(unsigned char c) { return std::isalnum(c) != 0 || c == '_' || c >= 0x80; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool match_ci(std::string_view text, std::size_t at, std::string_view pattern) {
  if (at + pattern.size() > text.size()) return false;
  for (std::size_t i = 0; i < pattern.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[at + i])) != pattern[i]) return false;
  }
  return true;
}

}  // namespace

bool is_emoticon(std::string_view token) {
  const auto l = lower(token);
  return std::find(kEmoticons.begin(), kEmoticons.end(), l) != kEmoticons.end();
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  const auto at_token_start = [&](std::size_t pos) {
    return pos == 0 || std::isspace(static_cast<unsigned char>(text[pos - 1])) != 0;
  };
  const auto ends_token = [&](std::size_t pos) {
    return pos >= text.size() || !std::isalnum(static_cast<unsigned char>(text[pos]));
  };
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    bool matched = false;
    for (auto ph : kPlaceholders) {
      if (text.compare(i, ph.size(), ph) == 0) {
        tokens.emplace_back(ph);
        i += ph.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;

    // Emoticons only at a token boundary so "xd" inside words is left alone.
    if (at_token_start(i) || !std::isalnum(c)) {
      for (auto emo : kEmoticons) {
        const bool alpha_tail = std::isalpha(static_cast<unsigned char>(emo.back())) != 0;
        if (match_ci(text, i, emo) && (!alpha_tail || ends_token(i + emo.size())) &&
            (std::isalnum(static_cast<unsigned char>(emo.front())) == 0 || at_token_start(i))) {
          tokens.emplace_back(emo);
          i += emo.size();
          matched = true;
          break;
        }
      }
    }
    if (matched) continue;

    if (c >= 0x80) {
      const std::size_t len = std::min(utf8_length(c), text.size() - i);
      const std::uint32_t cp = decode(text, i, len);
      if (is_emoji(cp)) {
        std::size_t end = i + len;
        while (end < text.size()) {
          const std::size_t l2 =
              std::min(utf8_length(static_cast<unsigned char>(text[end])), text.size() - end);
          if (!is_emoji_modifier(decode(text, end, l2))) break;
          end += l2;
        }
        tokens.emplace_back(text.substr(i, end - i));
        i = end;
        continue;
      }
    }

    if (text.compare(i, 3, "...") == 0) {
      std::size_t end = i;
      while (end < text.size() && text[end] == '.') ++end;
      tokens.emplace_back("...");
      i = end;
      continue;
    }

    if (is_word_byte(c)) {
      std::size_t end = i;
      while (end < text.size()) {
        const auto b = static_cast<unsigned char>(text[end]);
        if (b >= 0x80) {
          const std::size_t len = std::min(utf8_length(b), text.size() - end);
          if (is_emoji(decode(text, end, len))) break;
          end += len;
          continue;
        }
        // Keep intra-word apostrophes ("don't").
        if (b == '\'' && end > i && end + 1 < text.size() &&
            std::isalpha(static_cast<unsigned char>(text[end + 1]))) {
          ++end;
          continue;
        }
        if (!is_word_byte(b)) break;
        ++end;
      }
      tokens.push_back(lower(text.substr(i, end - i)));
      i = end;
      continue;
    }

    tokens.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return tokens;
}

}  // namespace mmkd::text
