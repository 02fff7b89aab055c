#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "dstqa/corpus.hpp"
#include "dstqa/ontology.hpp"

namespace dstqa {

/// Ontology slot name for a MultiWOZ metadata key ("pricerange" -> "price
/// range", book "people" -> "book people"). `section` is "semi" or "book".
std::optional<std::string> multiwoz_slot_name(std::string_view domain, std::string_view section,
                                              std::string_view key);

struct IngestOptions {
  /// Append value-mode values seen in the train split that the ontology
  /// lacks, instead of dropping those triples.
  bool extend_values = false;
};

struct IngestResult {
  Corpus corpus;
  Ontology ontology;  // the input ontology, or its extension
  IngestionReport report;
};

/// Reads a MultiWOZ 2.0/2.1 distribution directory (data.json plus the
/// valListFile / testListFile id lists). Hospital and police triples are
/// dropped, as are dialogues that touch no ontology domain.
IngestResult ingest_multiwoz(const std::filesystem::path& raw_dir, const Ontology& ontology,
                             const IngestOptions& options = {});

}  // namespace dstqa
