#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/features.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/tape.hpp"

namespace dstqa {

enum class EmbeddingProvider { StaticTrainable, ContextualPretrained };

std::string_view to_string(EmbeddingProvider provider);
EmbeddingProvider parse_embedding_provider(std::string_view text);

struct EmbeddingConfig {
  EmbeddingProvider provider = EmbeddingProvider::StaticTrainable;
  size_t word_dim = 300;  // 512 for the contextual provider
  size_t char_dim = 100;
  size_t char_embedding_dim = 16;
  size_t char_kernel = 5;
  size_t role_dim = 128;

  /// Width of every token, question element and encoder output row.
  size_t model_dim() const { return word_dim + char_dim; }
  size_t hidden_dim() const { return model_dim() / 2; }
  void validate() const;
};

/// Word-level embeddings from an external, frozen model. Implementations map
/// a whole token sequence at once so contextual models can be plugged in.
class ContextualEmbedder {
 public:
  virtual ~ContextualEmbedder() = default;
  virtual size_t dim() const = 0;
  /// tokens.size() x dim() matrix.
  virtual Matrix embed(const std::vector<std::string>& tokens) const = 0;
  /// Recorded in checkpoint manifests.
  virtual std::string identity() const = 0;
};

/// Reads "word v1 v2 ..." lines (GloVe/word2vec text format).
std::unordered_map<std::string, std::vector<double>> read_word_vectors(
    const std::filesystem::path& path, size_t expected_dim = 0);

/// Frozen lookup table adapter over a vector file; unknown words map to zeros.
class VectorFileEmbedder final : public ContextualEmbedder {
 public:
  explicit VectorFileEmbedder(const std::filesystem::path& path);
  size_t dim() const override { return dim_; }
  Matrix embed(const std::vector<std::string>& tokens) const override;
  std::string identity() const override { return identity_; }

 private:
  size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::string identity_;
};

/// Per-question embedding on a tape.
struct QuestionEmbedding {
  Var domain;       // w_d, 1 x D
  Var slot;         // w_s, 1 x D
  Var domain_slot;  // w_d + w_s
  Var values;       // W_vbar, candidates x D
  Var question;     // W_q, row j = w_d + w_s + W_vbar[j]
};

/// Word embedding layer and context encoder. Parameters live in the
/// ParameterStore passed at construction under the "enc." prefix.
class Encoder {
 public:
  Encoder(const EmbeddingConfig& config, ParameterStore& params, const Vocabulary& words,
          const Vocabulary& chars, size_t exact_match_width,
          std::shared_ptr<const ContextualEmbedder> pretrained = nullptr);

  static void register_parameters(ParameterStore& params, const EmbeddingConfig& config,
                                  size_t vocabulary_size, size_t char_vocabulary_size,
                                  size_t exact_match_width, std::mt19937_64& rng);

  const EmbeddingConfig& config() const { return config_; }
  size_t exact_match_width() const { return exact_match_width_; }
  const Vocabulary& words() const { return *words_; }

  std::vector<std::vector<int>> char_ids(const std::vector<std::string>& tokens) const;

  /// tokens x char_dim.
  Var char_cnn_embed(Tape& tape, const std::vector<std::string>& tokens) const;
  /// W_c: tokens x model_dim, word-level part then character part.
  Var embed_context(Tape& tape, const std::vector<std::string>& tokens) const;
  /// Mean-pooled embeddings of several phrases (one output row per phrase).
  /// Each phrase is embedded as its own sentence.
  Var embed_phrases(Tape& tape, const std::vector<std::string>& phrases) const;
  QuestionEmbedding embed_question(Tape& tape, const Question& question) const;
  std::vector<QuestionEmbedding> embed_questions(Tape& tape,
                                                 const std::vector<Question>& questions) const;

  /// biGRU over [W_c; role embedding; exact-match row]. When `input_mask`
  /// is given it multiplies the concatenated inputs (dropout). Output:
  /// tokens x model_dim, forward states then backward states.
  Var encode_context(Tape& tape, Var w_c, const std::vector<Role>& roles,
                     const Matrix& exact_match, const Matrix* input_mask = nullptr) const;

  size_t encoder_input_dim() const {
    return config_.model_dim() + config_.role_dim + exact_match_width_;
  }

 private:
  Var word_level(Tape& tape, const std::vector<std::string>& tokens) const;

  EmbeddingConfig config_;
  ParameterStore* params_;
  const Vocabulary* words_;
  const Vocabulary* chars_;
  size_t exact_match_width_;
  std::shared_ptr<const ContextualEmbedder> pretrained_;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) matrix.
Matrix fan_in_uniform(long rows, long cols, long fan_in, std::mt19937_64& rng);

}  // namespace dstqa
