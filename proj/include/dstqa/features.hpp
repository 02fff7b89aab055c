#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

enum class Role : std::uint8_t { Agent = 0, User = 1 };

/// Answer type of a span-mode question, in classifier output order.
enum class SpanType : std::uint8_t { NotMentioned = 0, DontCare = 1, Span = 2 };

struct TokenSpan {
  size_t start = 0;
  size_t end = 0;  // inclusive
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

/// Gold answer for one question at one turn.
struct QuestionLabel {
  // Value mode: candidate index; empty when the annotated value is not a
  // candidate (the question is then left out of the loss).
  std::optional<size_t> value_index;
  // Span mode.
  SpanType span_type = SpanType::NotMentioned;
  std::optional<TokenSpan> span;  // empty for non-span types and for label misses
};

struct TurnExample {
  std::vector<std::string> tokens;
  std::vector<Role> roles;
  Eigen::MatrixXd exact_match;  // tokens x 2 * pair_count, entries in {0, 1}
  std::vector<QuestionLabel> labels;  // aligned with the question list
  DialogueState gold_state;           // canonical
};

/// Last occurrence of the tokenized `value` as a contiguous run of `tokens`.
std::optional<TokenSpan> build_span_label(const std::vector<std::string>& tokens,
                                          std::string_view value);

/// Precomputed value index for exact-match features over one ontology.
class ExactMatcher {
 public:
  ExactMatcher(const Ontology& ontology, const Lemmatizer& lemmatizer);

  size_t width() const { return 2 * pair_count_; }
  /// Column 2p flags tokens inside an occurrence of a value of pair p, column
  /// 2p+1 does the same on lemmatized tokens and values.
  Eigen::MatrixXd features(const std::vector<std::string>& tokens) const;

 private:
  struct Entry {
    size_t pair;
    std::vector<std::string> tokens;
  };
  void mark(const std::vector<std::string>& tokens,
            const std::unordered_map<std::string, std::vector<Entry>>& index, size_t column_offset,
            Eigen::MatrixXd& out) const;

  size_t pair_count_ = 0;
  const Lemmatizer* lemmatizer_;
  std::unordered_map<std::string, std::vector<Entry>> original_;
  std::unordered_map<std::string, std::vector<Entry>> lemmatized_;
};

Eigen::MatrixXd exact_match_features(const std::vector<std::string>& tokens,
                                     const Ontology& ontology, const Lemmatizer& lemmatizer);

struct ExampleOptions {
  /// Number of most recent turns in the context; 0 keeps the whole history.
  size_t context_window = 0;
};

/// One example per turn. Label misses are counted into `report` when given.
std::vector<TurnExample> build_turn_examples(const Dialogue& dialogue, const Ontology& ontology,
                                             const std::vector<Question>& questions,
                                             const ExactMatcher& matcher,
                                             const ExampleOptions& options = {},
                                             IngestionReport* report = nullptr);

/// Context tokens and roles for turn `t` of `turns` (no labels).
void build_context(const std::vector<Turn>& turns, size_t t, size_t context_window,
                   std::vector<std::string>& tokens, std::vector<Role>& roles);

/// Labels for one turn's state against `questions`.
std::vector<QuestionLabel> build_labels(const DialogueState& state,
                                        const std::vector<std::string>& tokens,
                                        const std::vector<Question>& questions,
                                        IngestionReport* report = nullptr);

}  // namespace dstqa
