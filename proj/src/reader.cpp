#include "dstqa/reader.hpp"

#include <cmath>

#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"

namespace dstqa {
namespace ops {

Var att(Tape& tape, Var keys, Var query, Var beta) {
  if (tape.value(query).rows() != 1) throw ShapeError("att: query must be a single row");
  return tape.attention(keys, query, beta);
}

Var bilinear(Tape& tape, Var x, Var y, Var phi) {
  const auto& xv = tape.value(x);
  const auto& pv = tape.value(phi);
  if (tape.value(y).rows() != 1 || pv.rows() != pv.cols() || xv.cols() != pv.rows() ||
      tape.value(y).cols() != pv.cols())
    throw ShapeError("bilinear: shapes do not conform");
  return tape.matmul_nt(y, tape.matmul(x, phi));
}

BiAttention bidirectional_attention(Tape& tape, Var e_c, Var w_q, Var beta1) {
  BiAttention out;
  out.alpha_v = tape.attention(w_q, e_c, beta1);
  out.alpha_w = tape.attention(e_c, w_q, beta1);
  out.b_c = tape.add(e_c, tape.matmul(out.alpha_v, w_q));
  out.b_q = tape.add(w_q, tape.matmul(out.alpha_w, e_c));
  return out;
}

Summary context_summary(Tape& tape, Var b_c, Var domain_slot, Var beta2) {
  Summary s;
  s.alpha_b = att(tape, b_c, domain_slot, beta2);
  s.u = tape.matmul(s.alpha_b, b_c);
  return s;
}

Var value_logits(Tape& tape, Var b_q, Var summary, Var phi1) {
  return bilinear(tape, b_q, summary, phi1);
}

SpanHeads span_heads(Tape& tape, Var e_c, Var domain_slot, Var beta3, Var theta1, Var theta2,
                     Var theta3, Var phi2, Var phi3) {
  SpanHeads h;
  h.alpha_e = att(tape, e_c, domain_slot, beta3);
  h.c = tape.add(domain_slot, tape.matmul(h.alpha_e, e_c));
  h.type_logits = tape.matmul_nt(h.c, theta1);
  const Var start_repr = tape.matmul(e_c, theta2);
  const Var end_repr = tape.matmul(start_repr, theta3);
  h.start_logits = bilinear(tape, tape.relu(start_repr), h.c, phi2);
  h.end_logits = bilinear(tape, tape.relu(end_repr), h.c, phi3);
  return h;
}

}  // namespace ops

namespace {

RowVector as_row(const Matrix& m) { return Eigen::Map<const RowVector>(m.data(), m.size()); }

Matrix softmax(const Matrix& logits) {
  Tape tape(false);
  return tape.value(tape.softmax_rows(tape.constant(logits)));
}

}  // namespace

RowVector att(const Matrix& keys, const RowVector& query, const RowVector& beta) {
  Tape tape(false);
  return as_row(tape.value(ops::att(tape, tape.constant(keys), tape.constant(query),
                                    tape.constant(beta))));
}

RowVector bilinear(const Matrix& x, const RowVector& y, const Matrix& phi) {
  Tape tape(false);
  return as_row(
      tape.value(ops::bilinear(tape, tape.constant(x), tape.constant(y), tape.constant(phi))));
}

BiAttentionResult bidirectional_attention(const Matrix& e_c, const Matrix& w_q,
                                          const RowVector& beta1) {
  Tape tape(false);
  auto r = ops::bidirectional_attention(tape, tape.constant(e_c), tape.constant(w_q),
                                        tape.constant(beta1));
  return {tape.value(r.alpha_v), tape.value(r.alpha_w), tape.value(r.b_c), tape.value(r.b_q)};
}

ValueScoreResult value_scores(const Matrix& b_c, const Matrix& b_q, const RowVector& w_d,
                              const RowVector& w_s, const RowVector& beta2, const Matrix& phi1,
                              const RowVector* fused_summary) {
  Tape tape(false);
  const Var ds = tape.constant(w_d + w_s);
  auto s = ops::context_summary(tape, tape.constant(b_c), ds, tape.constant(beta2));
  const Var summary = fused_summary ? tape.constant(*fused_summary) : s.u;
  const Var logits = ops::value_logits(tape, tape.constant(b_q), summary, tape.constant(phi1));
  return {as_row(tape.value(s.alpha_b)), as_row(tape.value(s.u)),
          as_row(softmax(tape.value(logits)))};
}

SpanTypeResult span_type(const Matrix& e_c, const RowVector& w_d, const RowVector& w_s,
                         const RowVector& beta3, const Matrix& theta1) {
  if (theta1.rows() != 3) throw ShapeError("span_type: theta1 must have 3 rows");
  Tape tape(false);
  const Var ds = tape.constant(w_d + w_s);
  const Var e = tape.constant(e_c);
  const Var alpha = ops::att(tape, e, ds, tape.constant(beta3));
  const Var c = tape.add(ds, tape.matmul(alpha, e));
  const Var logits = tape.matmul_nt(c, tape.constant(theta1));
  return {as_row(tape.value(alpha)), as_row(tape.value(c)), as_row(softmax(tape.value(logits)))};
}

SpanBoundsResult span_bounds(const Matrix& e_c, const RowVector& w_d, const RowVector& w_s,
                             const RowVector& beta3, const Matrix& theta2, const Matrix& theta3,
                             const Matrix& phi2, const Matrix& phi3) {
  Tape tape(false);
  const Matrix theta1 = Matrix::Zero(3, e_c.cols());
  auto h = ops::span_heads(tape, tape.constant(e_c), tape.constant(w_d + w_s),
                           tape.constant(beta3), tape.constant(theta1), tape.constant(theta2),
                           tape.constant(theta3), tape.constant(phi2), tape.constant(phi3));
  return {as_row(softmax(tape.value(h.start_logits))), as_row(softmax(tape.value(h.end_logits)))};
}

DecodedSpan decode_span(const RowVector& p_ss, const RowVector& p_se,
                        const std::vector<std::string>& tokens, size_t max_len) {
  if (p_ss.size() != p_se.size() || p_ss.size() == 0)
    throw ShapeError("decode_span: probability vectors must be non-empty and of equal length");
  if (max_len == 0) throw ValidationError("decode_span: max_len must be positive");
  const size_t n = static_cast<size_t>(p_ss.size());
  DecodedSpan best;
  best.score = -1.0;
  for (size_t i = 0; i < n; ++i) {
    const size_t last = std::min(n - 1, i + max_len - 1);
    for (size_t j = i; j <= last; ++j) {
      const double s = p_ss[static_cast<long>(i)] * p_se[static_cast<long>(j)];
      if (s > best.score) {
        best.start = i;
        best.end = j;
        best.score = s;
      }
    }
  }
  if (!tokens.empty()) {
    if (tokens.size() != n) throw ShapeError("decode_span: token count differs from L_c");
    best.text = join(std::vector<std::string>(tokens.begin() + static_cast<long>(best.start),
                                              tokens.begin() + static_cast<long>(best.end) + 1),
                     " ");
  }
  return best;
}

size_t argmax(const RowVector& v) {
  if (v.size() == 0) throw ShapeError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<size_t>(best);
}

void resolve_answers(TurnPrediction& prediction, const std::vector<Question>& questions,
                     const std::vector<std::string>& tokens, size_t max_span_length) {
  if (prediction.questions.size() != questions.size())
    throw AlignmentError("resolve_answers: " + std::to_string(prediction.questions.size()) +
                         " predictions for " + std::to_string(questions.size()) + " questions");
  DialogueState state;
  for (size_t q = 0; q < questions.size(); ++q) {
    auto& p = prediction.questions[q];
    const auto& question = questions[q];
    p.span.reset();
    if (question.mode == SlotMode::Value) {
      p.answer = question.candidate(argmax(p.p_v));
    } else {
      switch (static_cast<SpanType>(argmax(p.p_st))) {
        case SpanType::NotMentioned: p.answer = std::string(kNotMentioned); break;
        case SpanType::DontCare: p.answer = std::string(kDontCare); break;
        case SpanType::Span:
          p.span = decode_span(p.p_ss, p.p_se, tokens, max_span_length);
          p.answer = canonical_value(p.span->text);
          break;
      }
    }
    p.answer = canonical_value(p.answer);
    if (p.answer != kNotMentioned && !p.answer.empty())
      state.push_back({question.domain, question.slot, p.answer});
  }
  prediction.state = canonical_state(state);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& other) {
  loss_v += other.loss_v;
  loss_st += other.loss_st;
  loss_span += other.loss_span;
  return *this;
}

namespace {

double nll(const RowVector& p, size_t index, const char* what) {
  if (index >= static_cast<size_t>(p.size()))
    throw LabelError(std::string(what) + " label " + std::to_string(index) + " out of range " +
                     std::to_string(p.size()));
  return -std::log(p[static_cast<long>(index)]);
}

}  // namespace

LossBreakdown compute_loss(const std::vector<TurnPrediction>& predictions,
                           const std::vector<std::vector<QuestionLabel>>& labels) {
  if (predictions.size() != labels.size())
    throw AlignmentError("compute_loss: turn counts differ");
  LossBreakdown out;
  for (size_t t = 0; t < predictions.size(); ++t) {
    const auto& preds = predictions[t].questions;
    if (preds.size() != labels[t].size())
      throw AlignmentError("compute_loss: question counts differ at turn " + std::to_string(t));
    for (size_t q = 0; q < preds.size(); ++q) {
      const auto& p = preds[q];
      const auto& l = labels[t][q];
      if (p.mode == SlotMode::Value) {
        if (l.value_index) out.loss_v += nll(p.p_v, *l.value_index, "value");
        continue;
      }
      out.loss_st += nll(p.p_st, static_cast<size_t>(l.span_type), "span type");
      if (l.span_type == SpanType::Span && l.span) {
        out.loss_span += nll(p.p_ss, l.span->start, "span start");
        out.loss_span += nll(p.p_se, l.span->end, "span end");
      }
    }
  }
  return out;
}

}  // namespace dstqa
