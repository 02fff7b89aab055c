#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dstqa {

enum class SlotMode { Value, Span };

std::string_view to_string(SlotMode mode);
SlotMode parse_slot_mode(std::string_view text);

struct SlotSpec {
  std::string name;
  SlotMode mode = SlotMode::Value;
  std::vector<std::string> values;  // ontology-file order; empty in span mode
};

struct DomainSpec {
  std::string name;
  std::vector<SlotSpec> slots;
};

/// A (domain, slot) pair.
struct SlotRef {
  std::string domain;
  std::string slot;

  std::string key() const { return domain + "-" + slot; }
  friend bool operator==(const SlotRef&, const SlotRef&) = default;
  friend auto operator<=>(const SlotRef&, const SlotRef&) = default;
};

/// Domains, their slots and the value sets of enumerable slots. Immutable once
/// validated; ordering follows the source document.
class Ontology {
 public:
  Ontology() = default;
  /// Validates; throws ValidationError naming the offending slot.
  explicit Ontology(std::vector<DomainSpec> domains);

  static Ontology from_json_text(std::string_view text);
  std::string to_json_text() const;
  /// SHA-256 over the canonical JSON form.
  std::string hash() const;

  const std::vector<DomainSpec>& domains() const { return domains_; }
  const DomainSpec* find_domain(std::string_view domain) const;
  const SlotSpec* find_slot(std::string_view domain, std::string_view slot) const;

  /// All (domain, slot) pairs in document order.
  const std::vector<SlotRef>& pairs() const { return pairs_; }
  size_t pair_count() const { return pairs_.size(); }
  std::optional<size_t> pair_index(std::string_view domain, std::string_view slot) const;
  const SlotSpec& slot_at(size_t pair) const;

  /// Returns a copy whose span slots are switched to value mode, taking their
  /// value lists from `values_by_pair` (keyed by SlotRef::key()).
  Ontology with_span_slots_as_values(
      const std::vector<std::pair<std::string, std::vector<std::string>>>& values_by_pair) const;

  /// Returns a copy with `new_values` appended to the slot's value list.
  Ontology with_extra_values(std::string_view domain, std::string_view slot,
                             const std::vector<std::string>& new_values) const;

 private:
  std::vector<DomainSpec> domains_;
  std::vector<SlotRef> pairs_;
};

Ontology load_ontology(const std::filesystem::path& path);
void save_ontology(const Ontology& ontology, const std::filesystem::path& path);

/// The set form of one (domain, slot) question. In value mode the candidate
/// list is `values` followed by "not mentioned" and "don't care"; span-mode
/// questions carry only the two specials as candidates.
struct Question {
  std::string domain;
  std::string slot;
  SlotMode mode = SlotMode::Value;
  std::vector<std::string> values;

  SlotRef ref() const { return {domain, slot}; }
  size_t candidate_count() const { return values.size() + 2; }
  size_t not_mentioned_index() const { return values.size(); }
  size_t dont_care_index() const { return values.size() + 1; }
  const std::string& candidate(size_t i) const;
  std::vector<std::string> candidates() const;
  /// Index of a canonical value among the candidates, if present.
  std::optional<size_t> find_candidate(std::string_view value) const;
  bool operator==(const Question&) const = default;
};

std::vector<Question> build_questions(const Ontology& ontology);

/// Inserts `new_values` ahead of the two special candidates.
Question extend_question(const Question& question,
                         const std::vector<std::string>& new_values);

struct RelationshipSet {
  /// Unordered pairs (stored first < second in ontology order) with equal value sets.
  std::vector<std::pair<SlotRef, SlotRef>> same_values;
  /// Ordered pairs whose first value set is a strict subset of the second.
  std::vector<std::pair<SlotRef, SlotRef>> subset_of;
};

RelationshipSet derive_relationships(const Ontology& ontology);

}  // namespace dstqa
