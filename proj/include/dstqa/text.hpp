#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dstqa {

inline constexpr std::string_view kNotMentioned = "not mentioned";
inline constexpr std::string_view kDontCare = "don't care";

/// Lowercases and splits on whitespace and punctuation. Clock times such as
/// "08:15" stay single tokens, as do apostrophe contractions ("don't").
std::vector<std::string> tokenize(std::string_view text);

/// Canonical comparison form of a value string: tokens joined by one space.
/// Folds case and collapses whitespace.
std::string normalize_value(std::string_view value);

/// normalize_value plus the alias table that maps the various dataset
/// spellings of the two special answers ("dontcare", "none", "", ...) onto
/// kDontCare / kNotMentioned.
std::string canonical_value(std::string_view value);

bool is_special_value(std::string_view canonical);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Maps a token to its lemma. Implementations must be deterministic.
class Lemmatizer {
 public:
  virtual ~Lemmatizer() = default;
  virtual std::string lemma(std::string_view token) const = 0;

  std::vector<std::string> lemmatize(const std::vector<std::string>& tokens) const;
};

/// Rule-based English suffix stripper with an exceptions table.
class SuffixLemmatizer final : public Lemmatizer {
 public:
  SuffixLemmatizer();
  std::string lemma(std::string_view token) const override;

 private:
  std::unordered_map<std::string, std::string> exceptions_;
};

}  // namespace dstqa
