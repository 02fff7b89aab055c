#include "dstqa/features.hpp"

#include <algorithm>

#include "dstqa/errors.hpp"

namespace dstqa {

std::optional<TokenSpan> build_span_label(const std::vector<std::string>& tokens,
                                          std::string_view value) {
  const auto needle = tokenize(value);
  if (needle.empty() || needle.size() > tokens.size()) return std::nullopt;
  for (size_t s = tokens.size() - needle.size() + 1; s-- > 0;) {
    if (std::equal(needle.begin(), needle.end(), tokens.begin() + static_cast<long>(s)))
      return TokenSpan{s, s + needle.size() - 1};
  }
  return std::nullopt;
}

ExactMatcher::ExactMatcher(const Ontology& ontology, const Lemmatizer& lemmatizer)
    : pair_count_(ontology.pair_count()), lemmatizer_(&lemmatizer) {
  for (size_t p = 0; p < ontology.pair_count(); ++p) {
    const SlotSpec& slot = ontology.slot_at(p);
    if (slot.mode != SlotMode::Value) continue;
    for (const auto& v : slot.values) {
      auto toks = tokenize(v);
      if (toks.empty()) continue;
      auto lemmas = lemmatizer.lemmatize(toks);
      original_[toks.front()].push_back({p, std::move(toks)});
      lemmatized_[lemmas.front()].push_back({p, std::move(lemmas)});
    }
  }
}

void ExactMatcher::mark(const std::vector<std::string>& tokens,
                        const std::unordered_map<std::string, std::vector<Entry>>& index,
                        size_t column_offset, Eigen::MatrixXd& out) const {
  for (size_t i = 0; i < tokens.size(); ++i) {
    auto it = index.find(tokens[i]);
    if (it == index.end()) continue;
    for (const Entry& e : it->second) {
      if (i + e.tokens.size() > tokens.size()) continue;
      if (!std::equal(e.tokens.begin(), e.tokens.end(), tokens.begin() + static_cast<long>(i)))
        continue;
      for (size_t k = 0; k < e.tokens.size(); ++k)
        out(static_cast<long>(i + k), static_cast<long>(2 * e.pair + column_offset)) = 1.0;
    }
  }
}

Eigen::MatrixXd ExactMatcher::features(const std::vector<std::string>& tokens) const {
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(static_cast<long>(tokens.size()), static_cast<long>(width()));
  mark(tokens, original_, 0, out);
  mark(lemmatizer_->lemmatize(tokens), lemmatized_, 1, out);
  return out;
}

Eigen::MatrixXd exact_match_features(const std::vector<std::string>& tokens,
                                     const Ontology& ontology, const Lemmatizer& lemmatizer) {
  return ExactMatcher(ontology, lemmatizer).features(tokens);
}

void build_context(const std::vector<Turn>& turns, size_t t, size_t context_window,
                   std::vector<std::string>& tokens, std::vector<Role>& roles) {
  tokens.clear();
  roles.clear();
  const size_t first = (context_window == 0 || t + 1 <= context_window) ? 0 : t + 1 - context_window;
  for (size_t k = first; k <= t; ++k) {
    for (auto& tok : tokenize(turns[k].agent)) {
      tokens.push_back(std::move(tok));
      roles.push_back(Role::Agent);
    }
    for (auto& tok : tokenize(turns[k].user)) {
      tokens.push_back(std::move(tok));
      roles.push_back(Role::User);
    }
  }
}

std::vector<QuestionLabel> build_labels(const DialogueState& state,
                                        const std::vector<std::string>& tokens,
                                        const std::vector<Question>& questions,
                                        IngestionReport* report) {
  std::vector<QuestionLabel> labels(questions.size());
  for (size_t q = 0; q < questions.size(); ++q) {
    const Question& question = questions[q];
    std::string value(kNotMentioned);
    for (const auto& tr : state)
      if (tr.domain == question.domain && tr.slot == question.slot)
        value = canonical_value(tr.value);
    QuestionLabel& label = labels[q];
    if (question.mode == SlotMode::Value) {
      label.value_index = question.find_candidate(value);
      if (!label.value_index && report) {
        ++report->value_label_misses;
        report->note("value not a candidate: " + question.domain + "/" + question.slot + "=" +
                     value);
      }
      continue;
    }
    if (value == kNotMentioned) {
      label.span_type = SpanType::NotMentioned;
    } else if (value == kDontCare) {
      label.span_type = SpanType::DontCare;
    } else {
      label.span_type = SpanType::Span;
      label.span = build_span_label(tokens, value);
      if (!label.span && report) {
        ++report->span_label_misses;
        report->note("span not found: " + question.domain + "/" + question.slot + "=" + value);
      }
    }
  }
  return labels;
}

std::vector<TurnExample> build_turn_examples(const Dialogue& dialogue, const Ontology& ontology,
                                             const std::vector<Question>& questions,
                                             const ExactMatcher& matcher,
                                             const ExampleOptions& options,
                                             IngestionReport* report) {
  validate_dialogue(dialogue, ontology);
  std::vector<TurnExample> out;
  out.reserve(dialogue.turns.size());
  for (size_t t = 0; t < dialogue.turns.size(); ++t) {
    TurnExample ex;
    build_context(dialogue.turns, t, options.context_window, ex.tokens, ex.roles);
    ex.exact_match = matcher.features(ex.tokens);
    ex.gold_state = canonical_state(dialogue.turns[t].state);
    ex.labels = build_labels(ex.gold_state, ex.tokens, questions, report);
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace dstqa
