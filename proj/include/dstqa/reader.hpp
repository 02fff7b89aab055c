#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/features.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/tape.hpp"

namespace dstqa {

// Tape-level building blocks. Vectors are 1 x n rows.
namespace ops {

/// softmax_i([K_i; q; K_i * q] . beta); K: m x n, q: 1 x n, beta: 1 x 3n. Result 1 x m.
Var att(Tape& tape, Var keys, Var query, Var beta);
/// out_i = X_i Phi y^T; X: m x n, y: 1 x n, Phi: n x n. Result 1 x m.
Var bilinear(Tape& tape, Var x, Var y, Var phi);

struct BiAttention {
  Var alpha_v;  // L_c x L_v, row i attends over candidates
  Var alpha_w;  // L_v x L_c, row j attends over context tokens
  Var b_c;      // L_c x D
  Var b_q;      // L_v x D
};
BiAttention bidirectional_attention(Tape& tape, Var e_c, Var w_q, Var beta1);

struct Summary {
  Var alpha_b;  // 1 x L_c
  Var u;        // 1 x D
};
Summary context_summary(Tape& tape, Var b_c, Var domain_slot, Var beta2);
/// Unnormalized value scores: bilinear(B_q, summary, Phi1).
Var value_logits(Tape& tape, Var b_q, Var summary, Var phi1);

struct SpanHeads {
  Var alpha_e;      // 1 x L_c
  Var c;            // 1 x D
  Var type_logits;  // 1 x 3
  Var start_logits; // 1 x L_c
  Var end_logits;   // 1 x L_c
};
SpanHeads span_heads(Tape& tape, Var e_c, Var domain_slot, Var beta3, Var theta1, Var theta2,
                     Var theta3, Var phi2, Var phi3);

}  // namespace ops

// Plain-matrix forms of the same computations.
RowVector att(const Matrix& keys, const RowVector& query, const RowVector& beta);
RowVector bilinear(const Matrix& x, const RowVector& y, const Matrix& phi);

struct BiAttentionResult {
  Matrix alpha_v, alpha_w, b_c, b_q;
};
BiAttentionResult bidirectional_attention(const Matrix& e_c, const Matrix& w_q,
                                          const RowVector& beta1);

struct ValueScoreResult {
  RowVector alpha_b;
  RowVector u;
  RowVector p_v;
};
/// When `fused_summary` is given it replaces u in the bilinear scoring.
ValueScoreResult value_scores(const Matrix& b_c, const Matrix& b_q, const RowVector& w_d,
                              const RowVector& w_s, const RowVector& beta2, const Matrix& phi1,
                              const RowVector* fused_summary = nullptr);

struct SpanTypeResult {
  RowVector alpha_e;
  RowVector c;
  RowVector p_st;
};
SpanTypeResult span_type(const Matrix& e_c, const RowVector& w_d, const RowVector& w_s,
                         const RowVector& beta3, const Matrix& theta1);

struct SpanBoundsResult {
  RowVector p_ss;
  RowVector p_se;
};
SpanBoundsResult span_bounds(const Matrix& e_c, const RowVector& w_d, const RowVector& w_s,
                             const RowVector& beta3, const Matrix& theta2, const Matrix& theta3,
                             const Matrix& phi2, const Matrix& phi3);

struct DecodedSpan {
  size_t start = 0;
  size_t end = 0;  // inclusive
  double score = 0.0;
  std::string text;
};

constexpr size_t kDefaultMaxSpanLength = 10;

/// Best (i, j) with i <= j <= i + max_len - 1 by p_ss[i] * p_se[j]; ties go
/// to the smaller i, then the smaller j. `tokens` may be empty (text left blank).
DecodedSpan decode_span(const RowVector& p_ss, const RowVector& p_se,
                        const std::vector<std::string>& tokens,
                        size_t max_len = kDefaultMaxSpanLength);

/// Index of the largest entry; the lowest index wins ties.
size_t argmax(const RowVector& v);

/// Output for one question at one turn.
struct QuestionPrediction {
  SlotMode mode = SlotMode::Value;
  RowVector p_v;                      // value mode
  RowVector p_st, p_ss, p_se;         // span mode
  std::optional<DecodedSpan> span;    // span mode with type = span
  std::string answer;                 // canonical value, or "not mentioned"
  // Diagnostics.
  RowVector alpha_b, alpha_g, gamma;
};

struct TurnPrediction {
  std::vector<QuestionPrediction> questions;  // aligned with the question list
  DialogueState state;                        // canonical, "not mentioned" omitted
};

/// Fills `answer` of each prediction from its probabilities and assembles
/// the emitted state.
void resolve_answers(TurnPrediction& prediction, const std::vector<Question>& questions,
                     const std::vector<std::string>& tokens,
                     size_t max_span_length = kDefaultMaxSpanLength);

struct LossBreakdown {
  double loss_v = 0.0;
  double loss_st = 0.0;
  double loss_span = 0.0;
  double total() const { return loss_v + loss_st + loss_span; }
  LossBreakdown& operator+=(const LossBreakdown& other);
};

/// Cross-entropy of predicted distributions against labels, summed over turns
/// and questions. Value questions without a candidate label and span
/// boundaries without a span label are skipped.
LossBreakdown compute_loss(const std::vector<TurnPrediction>& predictions,
                           const std::vector<std::vector<QuestionLabel>>& labels);

}  // namespace dstqa
