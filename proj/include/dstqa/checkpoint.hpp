#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "dstqa/model.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/trainer.hpp"

namespace dstqa {

inline constexpr int kCheckpointFormatVersion = 1;

/// A checkpoint directory holds manifest.json, params.bin, vocab.txt and
/// chars.txt. The manifest records the config, the ontology and its hash,
/// the embedding provider identity, a metric snapshot and the SHA-256 of
/// params.bin.
void save_checkpoint(const DstqaModel& model, const TrainConfig& config,
                     const std::filesystem::path& dir, const std::string& metrics_json = "{}");

struct LoadedCheckpoint {
  std::unique_ptr<DstqaModel> model;
  TrainConfig config;
  std::string ontology_hash;
  std::string provider_identity;
  std::string metrics_json;
};

/// Refuses (CheckpointError) a corrupted blob, a format it does not know,
/// or, when `expected` is given, an ontology whose hash differs.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir,
                                 const Ontology* expected = nullptr);

void write_parameters(const ParameterStore& params, const std::filesystem::path& path);
/// Copies stored values into `params`; every stored name must exist with the
/// same shape and every parameter must be stored.
void read_parameters(ParameterStore& params, const std::filesystem::path& path);

}  // namespace dstqa
