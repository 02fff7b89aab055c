#include "dstqa/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace dstqa {
namespace {

bool is_space(unsigned char c) { return std::isspace(c) != 0; }
bool is_alnum(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }
bool is_digit(unsigned char c) { return std::isdigit(c) != 0; }
bool is_alpha(unsigned char c) { return std::isalpha(c) != 0 || c >= 0x80; }

// Length of a clock time ("8:15", "08:15") starting at `i`, or 0.
size_t clock_time_length(std::string_view s, size_t i) {
  size_t j = i;
  while (j < s.size() && j - i < 2 && is_digit(s[j])) ++j;
  if (j == i || j + 2 >= s.size() || s[j] != ':') return 0;
  if (!is_digit(s[j + 1]) || !is_digit(s[j + 2])) return 0;
  const size_t end = j + 3;
  if (end < s.size() && is_alnum(s[end])) return 0;
  return end - i;
}

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// consonant-vowel-consonant ending, where the last consonant is not w/x/y:
// "pric" -> "price", "arriv" -> "arrive".
bool needs_silent_e(const std::string& stem) {
  if (stem.size() < 3) return false;
  const char a = stem[stem.size() - 3];
  const char b = stem[stem.size() - 2];
  const char c = stem[stem.size() - 1];
  if (!std::isalpha(static_cast<unsigned char>(a)) ||
      !std::isalpha(static_cast<unsigned char>(c)))
    return false;
  return !is_vowel(a) && is_vowel(b) && !is_vowel(c) && c != 'w' && c != 'x' &&
         c != 'y';
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string strip_past_or_progressive(std::string stem) {
  if (stem.size() >= 2 && stem[stem.size() - 1] == stem[stem.size() - 2] &&
      !is_vowel(stem.back()) && stem.back() != 'l' && stem.back() != 's' &&
      stem.back() != 'z') {
    stem.pop_back();  // "stopp" -> "stop"
  } else if (needs_silent_e(stem)) {
    stem += 'e';
  }
  return stem;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (const size_t n = clock_time_length(text, i); n > 0) {
      std::string tok(text.substr(i, n));
      tokens.push_back(std::move(tok));
      i += n;
      continue;
    }
    if (is_alnum(c)) {
      std::string tok;
      while (i < text.size()) {
        const auto d = static_cast<unsigned char>(text[i]);
        if (is_alnum(d)) {
          tok += static_cast<char>(std::tolower(d));
          ++i;
        } else if (d == '\'' && i + 1 < text.size() && !tok.empty() &&
                   is_alpha(static_cast<unsigned char>(tok.back())) &&
                   is_alpha(static_cast<unsigned char>(text[i + 1]))) {
          tok += '\'';
          ++i;
        } else {
          break;
        }
      }
      tokens.push_back(std::move(tok));
      continue;
    }
    tokens.emplace_back(1, static_cast<char>(c));
    ++i;
  }
  return tokens;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string normalize_value(std::string_view value) {
  return join(tokenize(value), " ");
}

std::string canonical_value(std::string_view value) {
  std::string norm = normalize_value(value);
  static const std::array<std::string_view, 8> dont_care = {
      "dontcare", "dont care", "don't care", "do n't care", "do not care",
      "doesn't care", "does not care", "dont care"};
  static const std::array<std::string_view, 5> not_mentioned = {
      "", "none", "not mentioned", "not given", "notmentioned"};
  if (std::find(dont_care.begin(), dont_care.end(), norm) != dont_care.end())
    return std::string(kDontCare);
  if (std::find(not_mentioned.begin(), not_mentioned.end(), norm) !=
      not_mentioned.end())
    return std::string(kNotMentioned);
  return norm;
}

bool is_special_value(std::string_view canonical) {
  return canonical == kNotMentioned || canonical == kDontCare;
}

std::vector<std::string> Lemmatizer::lemmatize(
    const std::vector<std::string>& tokens) const {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(lemma(t));
  return out;
}

SuffixLemmatizer::SuffixLemmatizer()
    : exceptions_{{"is", "be"},           {"are", "be"},
                  {"was", "be"},          {"were", "be"},
                  {"been", "be"},         {"am", "be"},
                  {"has", "have"},        {"had", "have"},
                  {"does", "do"},         {"did", "do"},
                  {"went", "go"},         {"gone", "go"},
                  {"left", "leave"},      {"children", "child"},
                  {"men", "man"},         {"women", "woman"},
                  {"people", "people"},   {"bus", "bus"},
                  {"this", "this"},       {"its", "its"},
                  {"booked", "book"},
                  {"centre", "centre"},   {"guesthouses", "guesthouse"},
                  {"needed", "need"},     {"wanted", "want"},
                  {"better", "good"},     {"best", "good"},
                  {"nights", "night"},    {"stayed", "stay"}} {}

std::string SuffixLemmatizer::lemma(std::string_view token) const {
  std::string t(token);
  if (auto it = exceptions_.find(t); it != exceptions_.end()) return it->second;
  if (t.size() <= 3 || !std::all_of(t.begin(), t.end(), [](char c) {
        return std::isalpha(static_cast<unsigned char>(c)) || c == '\'';
      }))
    return t;
  if (ends_with(t, "'s")) return t.substr(0, t.size() - 2);
  if (ends_with(t, "ily") && t.size() > 5) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "ly") && t.size() > 5) return t.substr(0, t.size() - 2);
  if (ends_with(t, "ies") && t.size() > 4) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "ied") && t.size() > 4) return t.substr(0, t.size() - 3) + "y";
  if (ends_with(t, "sses")) return t.substr(0, t.size() - 2);
  if (ends_with(t, "ing") && t.size() > 5)
    return strip_past_or_progressive(t.substr(0, t.size() - 3));
  if (ends_with(t, "ed") && t.size() > 4)
    return strip_past_or_progressive(t.substr(0, t.size() - 2));
  if (ends_with(t, "s") && !ends_with(t, "ss") && !ends_with(t, "us") &&
      !ends_with(t, "is"))
    return t.substr(0, t.size() - 1);
  return t;
}

}  // namespace dstqa
