#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/model.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/tape.hpp"

namespace dstqa {

/// Every training and model hyper-parameter. Serialized as flat
/// "key = value" text; each key is also a command-line flag.
struct TrainConfig {
  double learning_rate = 0.001;
  double dropout = 0.5;
  double word_dropout = 0.1;
  std::string provider = "static";  // static | pretrained
  std::string word_vectors;         // vector file for the pretrained provider
  size_t word_dim = 300;
  size_t char_dim = 100;
  size_t char_embedding_dim = 16;
  size_t char_kernel = 5;
  size_t role_dim = 128;
  bool graph = true;
  bool gated_graph = false;
  double eta = 0.5;
  std::string span_mode = "span";  // span | value
  size_t context_window = 0;
  size_t max_span_length = 10;
  size_t epochs = 50;
  size_t batch_size = 16;
  size_t patience = 10;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
  std::uint64_t seed = 1;

  static const std::vector<std::string>& keys();
  /// Throws ValidationError on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  void validate() const;

  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
  std::string to_json_text() const;
  static TrainConfig from_json_text(std::string_view text);

  ModelConfig model_config() const;
};

TrainConfig load_train_config(const std::filesystem::path& path);

/// Each token independently replaced by the unknown token with probability p.
std::vector<std::string> word_dropout(const std::vector<std::string>& tokens, double p,
                                      std::mt19937_64& rng);

/// Adam with bias correction over the trainable parameters of a store.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(ParameterStore& params);
  long steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  long t_ = 0;
  std::unordered_map<const Parameter*, std::pair<Matrix, Matrix>> moments_;
};

/// Scales all trainable gradients so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
double clip_gradients(ParameterStore& params, double max_norm);

/// Frozen embedder for the pretrained provider, or nullptr when the config
/// asks for static embeddings or names no vector file.
std::shared_ptr<const ContextualEmbedder> make_embedder(const TrainConfig& config);

/// Ontology actually modelled under the config's span mode.
Ontology effective_ontology(const TrainConfig& config, const Ontology& ontology,
                            const std::vector<Dialogue>& train);

std::unique_ptr<DstqaModel> make_model(const TrainConfig& config, const Ontology& ontology,
                                       const Vocabulary& words,
                                       std::shared_ptr<const ContextualEmbedder> pretrained);

struct EpochRecord {
  size_t epoch = 0;
  double loss_v = 0.0;
  double loss_st = 0.0;
  double loss_span = 0.0;
  double dev_joint = 0.0;
  double dev_slot = 0.0;
  double seconds = 0.0;
  std::string to_json_text() const;
};

struct TrainOptions {
  std::vector<std::string> domains;         // question domains; empty = all
  const DstqaModel* init_from = nullptr;    // warm start (fine-tuning)
  std::ostream* log = nullptr;              // one JSON record per epoch
  std::filesystem::path divergence_dump;    // diagnostics on non-finite loss
  /// Called after each epoch; returning false stops training.
  std::function<bool(const EpochRecord&, const DstqaModel&)> on_epoch;
  ModelHooks hooks;  // installed on the trained model
};

struct TrainResult {
  std::unique_ptr<DstqaModel> model;  // best-dev parameters
  TrainConfig config;                 // effective config
  std::vector<EpochRecord> history;
  size_t best_epoch = 0;
  double best_dev_joint = 0.0;
  std::uint64_t graph_updates = 0;  // graph operations seen during training
};

/// Dialogue-batched training with the per-turn graph schedule, Adam,
/// best-dev selection and early stopping. Uses corpus.dev for selection.
TrainResult train(const TrainConfig& config, const Corpus& corpus, const Ontology& ontology,
                  const TrainOptions& options = {});

/// Sequential per-turn states from the model's own predictions.
std::vector<DialogueState> predict_dialogue(const DstqaModel& model, const Dialogue& dialogue);

/// Turn-by-turn tracking for interactive use; matches predict_dialogue on
/// the turns fed so far.
class Tracker {
 public:
  explicit Tracker(const DstqaModel& model) : model_(&model) {}
  void reset() { dialogue_.turns.clear(); }
  DialogueState add_turn(std::string agent, std::string user);
  const std::vector<Turn>& turns() const { return dialogue_.turns; }

 private:
  const DstqaModel* model_;
  Dialogue dialogue_{"interactive", {}};
};

}  // namespace dstqa
