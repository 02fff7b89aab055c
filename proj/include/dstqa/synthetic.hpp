#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <utility>

#include "dstqa/corpus.hpp"
#include "dstqa/ontology.hpp"

namespace dstqa {

/// Template-driven dialogue generator for desk-scale experiments. Every
/// labelled value is uttered verbatim by the user; span slots take clock-time
/// values.
struct SyntheticConfig {
  Ontology ontology;
  size_t train_dialogues = 50;
  size_t dev_dialogues = 20;
  size_t test_dialogues = 20;
  size_t min_turns = 2;
  size_t max_turns = 5;
  double multi_domain_prob = 0.5;
  double dont_care_prob = 0.08;
  double change_prob = 0.1;
  double chatter_prob = 0.2;
  double confirm_prob = 0.3;
  double null_dialogue_prob = 0.05;

  /// Throws ValidationError for unusable settings.
  void validate() const;

  /// Same document shape as the ontology file with the counts and
  /// probabilities as extra top-level keys.
  static SyntheticConfig from_json_text(std::string_view text);
  std::string to_json_text() const;

  /// restaurant {food, price range} and taxi {destination, leave at (span)}.
  static SyntheticConfig two_domain_default();
};

SyntheticConfig load_synthetic_config(const std::filesystem::path& path);

/// Deterministic in (config, seed).
std::pair<Corpus, Ontology> generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

}  // namespace dstqa
