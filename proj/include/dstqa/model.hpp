#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/encoding.hpp"
#include "dstqa/features.hpp"
#include "dstqa/graph.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/reader.hpp"
#include "dstqa/tape.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

struct ModelConfig {
  EmbeddingConfig embedding;
  bool use_graph = true;
  GraphConfig graph;
  size_t max_span_length = kDefaultMaxSpanLength;
  size_t context_window = 0;  // 0 = whole history
  double dropout = 0.5;       // on encoder inputs, training only
};

/// Test and debugging hooks. Not part of the learned function.
struct ModelHooks {
  bool force_gamma_zero = false;
  /// Called by predict_dialogue with the graph used for each turn.
  std::function<void(size_t turn, const DialogueGraph& graph)> on_turn_graph;
};

struct ForwardOptions {
  bool training = false;            // dropout on
  bool compute_loss = false;        // uses example.labels
  std::mt19937_64* rng = nullptr;   // required when training
};

struct TurnOutput {
  TurnPrediction prediction;
  Var loss;  // 1 x 1, valid when compute_loss and some question is labelled
  LossBreakdown losses;
};

/// The question-answering tracker: encoder, attention and answer heads, and
/// the optional dialogue graph.
class DstqaModel {
 public:
  DstqaModel(ModelConfig config, Ontology ontology, Vocabulary words, std::uint64_t seed,
             std::shared_ptr<const ContextualEmbedder> pretrained = nullptr);
  DstqaModel(const DstqaModel&) = delete;
  DstqaModel& operator=(const DstqaModel&) = delete;

  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }
  const Ontology& ontology() const { return ontology_; }
  const std::vector<Question>& questions() const { return questions_; }
  const Vocabulary& words() const { return words_; }
  const Vocabulary& chars() const { return chars_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  const Encoder& encoder() const { return *encoder_; }
  const ExactMatcher& matcher() const { return *matcher_; }
  const Lemmatizer& lemmatizer() const { return lemmatizer_; }
  const std::shared_ptr<const ContextualEmbedder>& pretrained() const { return pretrained_; }
  ModelHooks& hooks() { return hooks_; }
  const ModelHooks& hooks() const { return hooks_; }

  /// Questions restricted to the given domains, in ontology order.
  std::vector<Question> questions_for(const std::vector<std::string>& domains) const;

  /// Adds unseen values to a value-mode slot without retraining.
  void extend_values(const std::string& domain, const std::string& slot,
                     const std::vector<std::string>& values);

  /// Copies every parameter value of `other` whose name and shape match.
  /// Returns the number copied.
  size_t copy_parameters_from(const DstqaModel& other);

  std::vector<TurnExample> examples(const Dialogue& dialogue,
                                    const std::vector<Question>& questions,
                                    IngestionReport* report = nullptr) const;

  TurnOutput forward(Tape& tape, const TurnExample& example,
                     const std::vector<Question>& questions, const DialogueGraph* graph,
                     const ForwardOptions& options) const;

  /// Sequential prediction; each turn's graph comes from the previous turn's
  /// own prediction.
  std::vector<TurnPrediction> predict_dialogue(const Dialogue& dialogue,
                                               const std::vector<Question>& questions) const;
  std::vector<TurnPrediction> predict_dialogue(const Dialogue& dialogue) const {
    return predict_dialogue(dialogue, questions_);
  }

 private:
  void rebuild_derived();

  ModelConfig config_;
  Ontology ontology_;
  std::vector<Question> questions_;
  Vocabulary words_;
  Vocabulary chars_;
  std::shared_ptr<const ContextualEmbedder> pretrained_;
  SuffixLemmatizer lemmatizer_;
  ParameterStore params_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<ExactMatcher> matcher_;
  ModelHooks hooks_;
};

/// Register names of the reader and graph parameter groups.
inline constexpr const char* kReaderParameterNames[] = {
    "reader.beta1", "reader.beta2", "reader.beta3", "reader.beta4", "reader.phi1",
    "reader.phi2",  "reader.phi3",  "reader.theta1", "reader.theta2", "reader.theta3"};
inline constexpr const char* kGraphTheta4 = "graph.theta4";

/// Predicted states of a dialogue, one per turn.
std::vector<DialogueState> states_of(const std::vector<TurnPrediction>& predictions);

}  // namespace dstqa
