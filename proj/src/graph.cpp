#include "dstqa/graph.hpp"

#include <nlohmann/json.hpp>

#include "dstqa/errors.hpp"
#include "dstqa/reader.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

std::atomic<size_t>& graph_op_counter() {
  static std::atomic<size_t> counter{0};
  return counter;
}

DialogueGraph::DialogueGraph(std::vector<Question> questions)
    : questions_(std::move(questions)), links_(questions_.size()) {}

void DialogueGraph::reset() { links_.assign(questions_.size(), ValueLink{}); }

void DialogueGraph::update(const DialogueState& predicted) {
  ++graph_op_counter();
  reset();
  for (const auto& triple : predicted) {
    for (size_t n = 0; n < questions_.size(); ++n) {
      const auto& q = questions_[n];
      if (q.domain != triple.domain || q.slot != triple.slot) continue;
      const std::string value = canonical_value(triple.value);
      ValueLink link;
      if (value == kNotMentioned) {
        link = {};
      } else if (value == kDontCare) {
        link = {LinkKind::DontCare, q.dont_care_index(), value};
      } else if (q.mode == SlotMode::Span) {
        link = {LinkKind::SpanText, 0, value};
      } else if (auto idx = q.find_candidate(value)) {
        link = {LinkKind::Value, *idx, value};
      }
      links_[n] = std::move(link);
    }
  }
}

std::string DialogueGraph::dump(const std::vector<RowVector>* alpha_g) const {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (size_t n = 0; n < questions_.size(); ++n) {
    nlohmann::ordered_json node;
    node["node"] = questions_[n].ref().key();
    const auto& l = links_[n];
    switch (l.kind) {
      case LinkKind::NotMentioned: node["link"] = std::string(kNotMentioned); break;
      case LinkKind::DontCare: node["link"] = std::string(kDontCare); break;
      case LinkKind::Value: node["link"] = l.text; break;
      case LinkKind::SpanText:
        node["link"] = l.text;
        node["span"] = true;
        break;
    }
    if (alpha_g && n < alpha_g->size() && (*alpha_g)[n].size() > 0)
      node["alpha_g"] = std::vector<double>((*alpha_g)[n].data(),
                                            (*alpha_g)[n].data() + (*alpha_g)[n].size());
    nodes.push_back(std::move(node));
  }
  return nodes.dump(1);
}

DialogueGraph update_graph(DialogueGraph graph, const DialogueState& predicted) {
  graph.update(predicted);
  return graph;
}

Var node_embeddings(Tape& tape, const DialogueGraph& graph,
                    const std::vector<QuestionEmbedding>& embeddings,
                    const TextEmbedder& embed_text, const GraphConfig& config, Var theta4) {
  ++graph_op_counter();
  if (embeddings.size() != graph.size())
    throw ShapeError("node_embeddings: " + std::to_string(embeddings.size()) +
                     " question embeddings for " + std::to_string(graph.size()) + " nodes");
  if (graph.size() == 0) throw ShapeError("node_embeddings: empty graph");
  if (config.gated && !theta4.valid()) throw ShapeError("node_embeddings: gated mode needs Theta4");
  std::vector<Var> rows;
  rows.reserve(graph.size());
  for (size_t n = 0; n < graph.size(); ++n) {
    const auto& q = graph.questions()[n];
    const auto& e = embeddings[n];
    const auto& l = graph.link(n);
    Var value;
    switch (l.kind) {
      case LinkKind::NotMentioned:
        value = tape.row(e.values, static_cast<long>(q.not_mentioned_index()));
        break;
      case LinkKind::DontCare:
        value = tape.row(e.values, static_cast<long>(q.dont_care_index()));
        break;
      case LinkKind::Value: value = tape.row(e.values, static_cast<long>(l.value_index)); break;
      case LinkKind::SpanText:
        if (!embed_text) throw Error("node_embeddings: span link without a text embedder");
        value = embed_text(l.text);
        break;
    }
    if (!config.gated) {
      rows.push_back(tape.add(e.domain_slot, value));
    } else {
      const Var propagated = tape.sigmoid(tape.matmul_nt(value, theta4));
      rows.push_back(tape.add(tape.scale(e.domain_slot, config.eta),
                              tape.scale(propagated, 1.0 - config.eta)));
    }
  }
  return tape.concat_rows(rows);
}

namespace ops {

Var gate_fuse(Tape& tape, Var u, Var z, Var gamma) {
  return tape.add(u, tape.mul(gamma, tape.sub(z, u)));
}

GraphFusion graph_fuse(Tape& tape, Var g, Var u, Var beta4, bool force_gamma_zero) {
  ++graph_op_counter();
  if (tape.value(g).cols() != tape.value(u).cols())
    throw ShapeError("graph_fuse: node and summary widths differ");
  GraphFusion f;
  f.alpha_g = att(tape, g, u, beta4);
  f.z = tape.matmul(f.alpha_g, g);
  f.gamma = force_gamma_zero ? tape.constant(Matrix::Zero(1, tape.value(u).cols()))
                             : tape.sigmoid(tape.add(u, f.z));
  f.fused = gate_fuse(tape, u, f.z, f.gamma);
  return f;
}

}  // namespace ops

GraphEmbeddingResult graph_embedding(const Matrix& g, const RowVector& u, const RowVector& beta4) {
  Tape tape(false);
  auto f = ops::graph_fuse(tape, tape.constant(g), tape.constant(u), tape.constant(beta4));
  return {tape.value(f.alpha_g), tape.value(f.z)};
}

GateResult gate_fuse(const RowVector& u, const RowVector& z) {
  if (u.size() != z.size()) throw ShapeError("gate_fuse: lengths differ");
  Tape tape(false);
  const Var uv = tape.constant(u);
  const Var zv = tape.constant(z);
  const Var gamma = tape.sigmoid(tape.add(uv, zv));
  return {tape.value(gamma), tape.value(ops::gate_fuse(tape, uv, zv, gamma))};
}

}  // namespace dstqa
