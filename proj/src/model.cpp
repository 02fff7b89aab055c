#include "dstqa/model.hpp"

#include <algorithm>
#include <unordered_map>

#include "dstqa/errors.hpp"

namespace dstqa {

namespace {

RowVector softmax_row(const Matrix& logits) {
  const double mx = logits.maxCoeff();
  RowVector e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

RowVector to_row(const Matrix& m) { return Eigen::Map<const RowVector>(m.data(), m.size()); }

}  // namespace

DstqaModel::DstqaModel(ModelConfig config, Ontology ontology, Vocabulary words,
                       std::uint64_t seed, std::shared_ptr<const ContextualEmbedder> pretrained)
    : config_(std::move(config)),
      ontology_(std::move(ontology)),
      words_(std::move(words)),
      chars_(build_char_vocabulary(words_)),
      pretrained_(std::move(pretrained)) {
  config_.embedding.validate();
  if (config_.dropout < 0.0 || config_.dropout >= 1.0)
    throw ValidationError("dropout must lie in [0, 1)");
  if (config_.graph.eta < 0.0 || config_.graph.eta > 1.0)
    throw ValidationError("eta must lie in [0, 1]");
  if (config_.max_span_length == 0) throw ValidationError("max_span_length must be positive");
  std::mt19937_64 rng(seed);
  const size_t exact_width = 2 * ontology_.pair_count();
  Encoder::register_parameters(params_, config_.embedding, words_.size(), chars_.size(),
                               exact_width, rng);
  const long d = static_cast<long>(config_.embedding.model_dim());
  for (int i = 1; i <= 4; ++i)
    params_.add("reader.beta" + std::to_string(i), fan_in_uniform(1, 3 * d, 3 * d, rng));
  for (int i = 1; i <= 3; ++i)
    params_.add("reader.phi" + std::to_string(i), fan_in_uniform(d, d, d, rng));
  params_.add("reader.theta1", fan_in_uniform(3, d, d, rng));
  params_.add("reader.theta2", fan_in_uniform(d, d, d, rng));
  params_.add("reader.theta3", fan_in_uniform(d, d, d, rng));
  if (config_.graph.gated) params_.add(kGraphTheta4, fan_in_uniform(d, d, d, rng));
  encoder_ = std::make_unique<Encoder>(config_.embedding, params_, words_, chars_, exact_width,
                                       pretrained_);
  rebuild_derived();
}

void DstqaModel::rebuild_derived() {
  questions_ = build_questions(ontology_);
  matcher_ = std::make_unique<ExactMatcher>(ontology_, lemmatizer_);
}

std::vector<Question> DstqaModel::questions_for(const std::vector<std::string>& domains) const {
  for (const auto& d : domains)
    if (!ontology_.find_domain(d)) throw ValidationError("unknown domain '" + d + "'");
  std::vector<Question> out;
  for (const auto& q : questions_)
    if (std::find(domains.begin(), domains.end(), q.domain) != domains.end()) out.push_back(q);
  return out;
}

void DstqaModel::extend_values(const std::string& domain, const std::string& slot,
                               const std::vector<std::string>& values) {
  ontology_ = ontology_.with_extra_values(domain, slot, values);
  rebuild_derived();
}

size_t DstqaModel::copy_parameters_from(const DstqaModel& other) {
  size_t copied = 0;
  for (const Parameter* src : other.params_.all()) {
    Parameter* dst = params_.find(src->name);
    if (!dst || dst->value.rows() != src->value.rows() || dst->value.cols() != src->value.cols())
      continue;
    dst->value = src->value;
    ++copied;
  }
  return copied;
}

std::vector<TurnExample> DstqaModel::examples(const Dialogue& dialogue,
                                              const std::vector<Question>& questions,
                                              IngestionReport* report) const {
  ExampleOptions options;
  options.context_window = config_.context_window;
  return build_turn_examples(dialogue, ontology_, questions, *matcher_, options, report);
}

TurnOutput DstqaModel::forward(Tape& tape, const TurnExample& example,
                               const std::vector<Question>& questions, const DialogueGraph* graph,
                               const ForwardOptions& options) const {
  if (options.compute_loss && example.labels.size() != questions.size())
    throw AlignmentError("forward: " + std::to_string(example.labels.size()) + " labels for " +
                         std::to_string(questions.size()) + " questions");
  if (graph && graph->size() != questions.size())
    throw AlignmentError("forward: graph nodes do not match the question list");
  if (options.training && !options.rng) throw Error("forward: training needs an rng");

  // An empty context (first turn, nothing said) is read as one padding token.
  const bool empty = example.tokens.empty();
  const std::vector<std::string> pad_tokens{std::string(Vocabulary::kPadToken)};
  const std::vector<Role> pad_roles{Role::User};
  const auto& tokens = empty ? pad_tokens : example.tokens;
  const auto& roles = empty ? pad_roles : example.roles;
  const Matrix pad_exact = Matrix::Zero(1, static_cast<long>(encoder_->exact_match_width()));
  const Matrix& exact = empty ? pad_exact : example.exact_match;

  auto p = [&](const char* name) { return tape.param(const_cast<Parameter&>(params_.at(name))); };

  const Var w_c = encoder_->embed_context(tape, tokens);
  Matrix mask;
  if (options.training && config_.dropout > 0.0) {
    const double keep = 1.0 - config_.dropout;
    std::bernoulli_distribution bern(keep);
    mask.resize(static_cast<long>(tokens.size()), static_cast<long>(encoder_->encoder_input_dim()));
    for (long r = 0; r < mask.rows(); ++r)
      for (long c = 0; c < mask.cols(); ++c) mask(r, c) = bern(*options.rng) ? 1.0 / keep : 0.0;
  }
  const Var e_c = encoder_->encode_context(tape, w_c, roles, exact, mask.size() ? &mask : nullptr);
  const auto q_emb = encoder_->embed_questions(tape, questions);

  Var g;
  const bool use_graph = config_.use_graph && graph;
  if (use_graph) {
    std::unordered_map<std::string, Var> text_cache;
    TextEmbedder embed_text = [&](const std::string& text) {
      auto it = text_cache.find(text);
      if (it != text_cache.end()) return it->second;
      const Var v = encoder_->embed_phrases(tape, {text});
      text_cache.emplace(text, v);
      return v;
    };
    g = node_embeddings(tape, *graph, q_emb, embed_text, config_.graph,
                        config_.graph.gated ? p(kGraphTheta4) : Var{});
  }

  TurnOutput out;
  out.prediction.questions.resize(questions.size());
  std::vector<Var> loss_terms;
  for (size_t qi = 0; qi < questions.size(); ++qi) {
    const auto& q = questions[qi];
    const auto& e = q_emb[qi];
    auto& pred = out.prediction.questions[qi];
    pred.mode = q.mode;
    const QuestionLabel* label = options.compute_loss ? &example.labels[qi] : nullptr;
    if (q.mode == SlotMode::Value) {
      const auto bi = ops::bidirectional_attention(tape, e_c, e.question, p("reader.beta1"));
      const auto s = ops::context_summary(tape, bi.b_c, e.domain_slot, p("reader.beta2"));
      Var summary = s.u;
      if (use_graph) {
        const auto f = ops::graph_fuse(tape, g, s.u, p("reader.beta4"), hooks_.force_gamma_zero);
        summary = f.fused;
        pred.alpha_g = to_row(tape.value(f.alpha_g));
        pred.gamma = to_row(tape.value(f.gamma));
      }
      const Var logits = ops::value_logits(tape, bi.b_q, summary, p("reader.phi1"));
      pred.p_v = softmax_row(tape.value(logits));
      pred.alpha_b = to_row(tape.value(s.alpha_b));
      if (label && label->value_index) {
        const Var ce = tape.cross_entropy(logits, static_cast<long>(*label->value_index));
        out.losses.loss_v += tape.value(ce)(0, 0);
        loss_terms.push_back(ce);
      }
    } else {
      const auto h = ops::span_heads(tape, e_c, e.domain_slot, p("reader.beta3"),
                                     p("reader.theta1"), p("reader.theta2"), p("reader.theta3"),
                                     p("reader.phi2"), p("reader.phi3"));
      pred.p_st = softmax_row(tape.value(h.type_logits));
      pred.p_ss = softmax_row(tape.value(h.start_logits));
      pred.p_se = softmax_row(tape.value(h.end_logits));
      if (label) {
        const Var ce = tape.cross_entropy(h.type_logits, static_cast<long>(label->span_type));
        out.losses.loss_st += tape.value(ce)(0, 0);
        loss_terms.push_back(ce);
        if (label->span_type == SpanType::Span && label->span) {
          const Var cs = tape.cross_entropy(h.start_logits, static_cast<long>(label->span->start));
          const Var cend = tape.cross_entropy(h.end_logits, static_cast<long>(label->span->end));
          out.losses.loss_span += tape.value(cs)(0, 0) + tape.value(cend)(0, 0);
          loss_terms.push_back(cs);
          loss_terms.push_back(cend);
        }
      }
    }
  }
  if (!loss_terms.empty()) out.loss = tape.sum(loss_terms);
  resolve_answers(out.prediction, questions, empty ? std::vector<std::string>{} : tokens,
                  config_.max_span_length);
  return out;
}

std::vector<TurnPrediction> DstqaModel::predict_dialogue(
    const Dialogue& dialogue, const std::vector<Question>& questions) const {
  std::vector<TurnPrediction> out;
  if (dialogue.turns.empty()) return out;
  const auto exs = examples(dialogue, questions);
  DialogueGraph graph(questions);
  DialogueState previous;
  for (size_t t = 0; t < exs.size(); ++t) {
    if (config_.use_graph) {
      graph.update(previous);
      if (hooks_.on_turn_graph) hooks_.on_turn_graph(t, graph);
    }
    Tape tape(false);
    auto result = forward(tape, exs[t], questions, config_.use_graph ? &graph : nullptr, {});
    previous = result.prediction.state;
    out.push_back(std::move(result.prediction));
  }
  return out;
}

std::vector<DialogueState> states_of(const std::vector<TurnPrediction>& predictions) {
  std::vector<DialogueState> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) out.push_back(p.state);
  return out;
}

}  // namespace dstqa
