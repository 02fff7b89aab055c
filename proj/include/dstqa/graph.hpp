#pragma once

#include <atomic>
#include <functional>
#include <string>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/encoding.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/tape.hpp"

namespace dstqa {

enum class LinkKind { NotMentioned, DontCare, Value, SpanText };

/// Value node currently attached to a (domain, slot) node.
struct ValueLink {
  LinkKind kind = LinkKind::NotMentioned;
  size_t value_index = 0;  // LinkKind::Value
  std::string text;        // canonical value string (Value, SpanText, DontCare)
  friend bool operator==(const ValueLink&, const ValueLink&) = default;
};

/// One node per question; every node carries exactly one value link and all
/// nodes are mutually connected.
class DialogueGraph {
 public:
  DialogueGraph() = default;
  explicit DialogueGraph(std::vector<Question> questions);

  size_t size() const { return questions_.size(); }
  const std::vector<Question>& questions() const { return questions_; }
  const ValueLink& link(size_t node) const { return links_.at(node); }
  const std::vector<ValueLink>& links() const { return links_; }

  /// Back to the initial state: every node linked to "not mentioned".
  void reset();
  /// Relinks every node from a predicted state; pairs absent from the state
  /// go to "not mentioned". Depends only on `predicted`.
  void update(const DialogueState& predicted);

  /// JSON text of the links, optionally with one alpha_g row per node.
  std::string dump(const std::vector<RowVector>* alpha_g = nullptr) const;

  friend bool operator==(const DialogueGraph&, const DialogueGraph&) = default;

 private:
  std::vector<Question> questions_;
  std::vector<ValueLink> links_;
};

DialogueGraph update_graph(DialogueGraph graph, const DialogueState& predicted);

struct GraphConfig {
  bool gated = false;  // eta / Theta4 propagation instead of the plain sum
  double eta = 0.5;
};

/// Incremented by every graph operation; lets callers audit that the graph
/// path was (not) taken.
std::atomic<size_t>& graph_op_counter();

/// Embedding of a decoded span string as a 1 x D row on the tape.
using TextEmbedder = std::function<Var(const std::string&)>;

/// G: one row per node. Default: w_d + w_s + W_vbar[link]. Gated:
/// eta (w_d + w_s) + (1 - eta) sigmoid(W_vbar[link] Theta4^T).
Var node_embeddings(Tape& tape, const DialogueGraph& graph,
                    const std::vector<QuestionEmbedding>& embeddings,
                    const TextEmbedder& embed_text, const GraphConfig& config,
                    Var theta4 = {});

namespace ops {

struct GraphFusion {
  Var alpha_g;  // 1 x |M|
  Var z;        // 1 x D
  Var gamma;    // 1 x D
  Var fused;    // 1 x D
};

/// alpha_g = att(G, u, beta4), z = alpha_g G, gamma = sigmoid(u + z),
/// fused = (1 - gamma) u + gamma z. `force_gamma_zero` pins gamma to 0.
GraphFusion graph_fuse(Tape& tape, Var g, Var u, Var beta4, bool force_gamma_zero = false);

Var gate_fuse(Tape& tape, Var u, Var z, Var gamma);

}  // namespace ops

struct GraphEmbeddingResult {
  RowVector alpha_g;
  RowVector z;
};
GraphEmbeddingResult graph_embedding(const Matrix& g, const RowVector& u, const RowVector& beta4);

struct GateResult {
  RowVector gamma;
  RowVector fused;
};
GateResult gate_fuse(const RowVector& u, const RowVector& z);

}  // namespace dstqa
