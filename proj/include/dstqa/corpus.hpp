#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dstqa/ontology.hpp"

namespace dstqa {

struct Triple {
  std::string domain;
  std::string slot;
  std::string value;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Set of (domain, slot, value) triples; at most one triple per (domain, slot).
using DialogueState = std::vector<Triple>;

/// Canonical form: values passed through canonical_value, "not mentioned"
/// triples removed, sorted.
DialogueState canonical_state(const DialogueState& state);

struct Turn {
  std::string agent;
  std::string user;
  DialogueState state;
};

struct Dialogue {
  std::string id;
  std::vector<Turn> turns;
};

enum class Split { Train, Dev, Test };
std::string_view to_string(Split split);

/// Token to integer id map. Id 0 is padding and id 1 the unknown token.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnknownToken = "<unk>";

  Vocabulary();
  int add(const std::string& token);
  int id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

/// Tokens of training-split utterances, ontology names and values, and the
/// two special answers, in first-seen order.
Vocabulary build_vocabulary(const std::vector<Dialogue>& train, const Ontology& ontology);

/// Character inventory for the character CNN, built from a word vocabulary.
/// Id 0 is padding, id 1 the unknown character.
Vocabulary build_char_vocabulary(const Vocabulary& words);

struct Corpus {
  std::vector<Dialogue> train;
  std::vector<Dialogue> dev;
  std::vector<Dialogue> test;
  Vocabulary vocabulary;

  const std::vector<Dialogue>& split(Split s) const;
  std::vector<Dialogue>& split(Split s);
  size_t size() const { return train.size() + dev.size() + test.size(); }
};

/// Counts kept by ingestion and example construction.
struct IngestionReport {
  size_t dialogues_kept = 0;
  size_t dialogues_dropped = 0;
  size_t triples_kept = 0;
  size_t triples_dropped_domain = 0;
  size_t triples_dropped_unknown_slot = 0;
  size_t triples_dropped_unknown_value = 0;
  size_t span_label_misses = 0;
  size_t value_label_misses = 0;
  std::vector<std::string> notes;  // first few dropped triples, for inspection

  void note(std::string message);
  std::string to_json_text() const;
};

/// Checks every triple against the ontology; unknown (domain, slot) pairs
/// throw ValidationError.
void validate_dialogue(const Dialogue& dialogue, const Ontology& ontology);

std::vector<Dialogue> dialogues_from_json_text(std::string_view text);
std::string dialogues_to_json_text(const std::vector<Dialogue>& dialogues);
std::vector<Dialogue> load_dialogues(const std::filesystem::path& path);
void save_dialogues(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path);

/// Writes train.json, dev.json, test.json and vocab.txt into `dir`.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
/// Reads a directory written by save_corpus; a missing vocab.txt is rebuilt
/// from the train split and `ontology`.
Corpus load_corpus(const std::filesystem::path& dir, const Ontology& ontology);

/// Distinct canonical values of each span slot in `dialogues`, in first-seen
/// order, keyed by SlotRef::key(). Used to build value lists when span slots
/// are switched to value mode.
std::vector<std::pair<std::string, std::vector<std::string>>> collect_span_slot_values(
    const std::vector<Dialogue>& dialogues, const Ontology& ontology);

}  // namespace dstqa
