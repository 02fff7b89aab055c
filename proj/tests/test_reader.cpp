#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dstqa/errors.hpp"
#include "dstqa/reader.hpp"
#include "oracles.hpp"

using namespace dstqa;
using oracle::max_abs_diff;
using oracle::random_matrix;

namespace {

RowVector rv(std::initializer_list<double> xs) {
  RowVector v(static_cast<long>(xs.size()));
  long i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

oracle::Vec V(const RowVector& v) { return oracle::row(v, 0); }

RowVector rand_row(long n, std::mt19937_64& rng) { return random_matrix(1, n, rng); }

long dim(std::mt19937_64& rng) { return 1 + static_cast<long>(rng() % 8); }

}  // namespace

TEST(Att, Examples) {
  Matrix k(2, 2);
  k << 1, 0, 0, 1;
  const RowVector p = att(k, rv({1, 0}), rv({1, 1, 0, 0, 2, 2}));
  EXPECT_NEAR(p(0), std::exp(2) / (std::exp(2) + 1), 1e-12);
  EXPECT_NEAR(p(0), 0.8808, 1e-4);
  EXPECT_NEAR(p(1), 0.1192, 1e-4);
  const RowVector u = att(Matrix::Ones(4, 3), rv({1, 2, 3}), RowVector::Zero(9));
  for (long i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(u(i), 0.25);
  EXPECT_DOUBLE_EQ(att(Matrix::Ones(1, 2), rv({5, 5}), rv({1, 2, 3, 4, 5, 6}))(0), 1.0);
  EXPECT_THROW(att(Matrix::Ones(2, 2), rv({1, 2}), rv({1, 2, 3})), ShapeError);
}

TEST(Bilinear, Examples) {
  std::mt19937_64 rng(1);
  const Matrix x = random_matrix(3, 4, rng);
  const RowVector y = rand_row(4, rng);
  const RowVector id = bilinear(x, y, Matrix::Identity(4, 4));
  for (long i = 0; i < 3; ++i) EXPECT_NEAR(id(i), x.row(i).dot(y), 1e-12);
  EXPECT_EQ(bilinear(x, RowVector::Zero(4), random_matrix(4, 4, rng)).cwiseAbs().sum(), 0.0);
  const Matrix x2 = random_matrix(2, 3, rng), phi = random_matrix(3, 3, rng);
  const RowVector y2 = rand_row(3, rng);
  EXPECT_LT(max_abs_diff(V(bilinear(x2, y2, phi)), oracle::bilinear(x2, V(y2), phi)), 1e-12);
  EXPECT_THROW(bilinear(x2, y2, Matrix::Identity(4, 4)), ShapeError);
}

TEST(BidirectionalAttention, Examples) {
  std::mt19937_64 rng(2);
  const Matrix e = random_matrix(3, 4, rng);
  const Matrix wq1 = random_matrix(1, 4, rng);
  const auto one = bidirectional_attention(e, wq1, rand_row(12, rng));
  for (long i = 0; i < 3; ++i) EXPECT_LT((one.b_c.row(i) - e.row(i) - wq1.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix wq = random_matrix(5, 4, rng);
  const auto zero = bidirectional_attention(e, wq, RowVector::Zero(12));
  const RowVector mean = wq.colwise().mean();
  for (long i = 0; i < 3; ++i) EXPECT_LT((zero.b_c.row(i) - e.row(i) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ValueScores, Examples) {
  std::mt19937_64 rng(3);
  const Matrix bc = random_matrix(4, 3, rng), bq = random_matrix(5, 3, rng);
  const auto r = value_scores(bc, bq, rand_row(3, rng), rand_row(3, rng), rand_row(9, rng), Matrix::Zero(3, 3));
  EXPECT_EQ(r.p_v.size(), 5);
  for (long i = 0; i < 5; ++i) EXPECT_NEAR(r.p_v(i), 0.2, 1e-12);
  EXPECT_NEAR(r.p_v.sum(), 1.0, 1e-12);
}

TEST(SpanType, Examples) {
  std::mt19937_64 rng(4);
  const Matrix e = random_matrix(4, 3, rng);
  const auto r = span_type(e, rand_row(3, rng), rand_row(3, rng), rand_row(9, rng), Matrix::Zero(3, 3));
  for (long i = 0; i < 3; ++i) EXPECT_NEAR(r.p_st(i), 1.0 / 3.0, 1e-12);
}

TEST(SpanBounds, Examples) {
  std::mt19937_64 rng(5);
  const auto wd = rand_row(3, rng), ws = rand_row(3, rng), b = rand_row(9, rng);
  const auto t2 = random_matrix(3, 3, rng), t3 = random_matrix(3, 3, rng);
  const auto one = span_bounds(random_matrix(1, 3, rng), wd, ws, b, t2, t3, random_matrix(3, 3, rng),
                               random_matrix(3, 3, rng));
  EXPECT_DOUBLE_EQ(one.p_ss(0), 1.0);
  EXPECT_DOUBLE_EQ(one.p_se(0), 1.0);
  const auto flat = span_bounds(random_matrix(5, 3, rng), wd, ws, b, t2, t3, Matrix::Zero(3, 3), Matrix::Zero(3, 3));
  for (long i = 0; i < 5; ++i) {
    EXPECT_NEAR(flat.p_ss(i), 0.2, 1e-12);
    EXPECT_NEAR(flat.p_se(i), 0.2, 1e-12);
  }
}

// At least 100 random instances per operation, dims <= 8, against loop oracles.
TEST(OracleEquivalence, AllReaderOps) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 150; ++trial) {
    const long n = dim(rng), m = dim(rng), lv = dim(rng);
    const Matrix k = random_matrix(m, n, rng);
    const RowVector q = rand_row(n, rng), beta = rand_row(3 * n, rng);
    worst = std::max(worst, max_abs_diff(V(att(k, q, beta)), oracle::att(k, V(q), V(beta))));

    const Matrix phi = random_matrix(n, n, rng);
    worst = std::max(worst, max_abs_diff(V(bilinear(k, q, phi)), oracle::bilinear(k, V(q), phi)));

    const Matrix wq = random_matrix(lv, n, rng);
    const auto bi = bidirectional_attention(k, wq, beta);
    const auto ob = oracle::bidirectional(k, wq, V(beta));
    worst = std::max(worst, max_abs_diff(oracle::vec(bi.alpha_v), oracle::vec(ob.alpha_v)));
    worst = std::max(worst, max_abs_diff(oracle::vec(bi.alpha_w), oracle::vec(ob.alpha_w)));
    worst = std::max(worst, max_abs_diff(oracle::vec(bi.b_c), oracle::vec(ob.b_c)));
    worst = std::max(worst, max_abs_diff(oracle::vec(bi.b_q), oracle::vec(ob.b_q)));

    const RowVector wd = rand_row(n, rng), ws = rand_row(n, rng), b2 = rand_row(3 * n, rng);
    const RowVector fused = rand_row(n, rng);
    for (const RowVector* f : {static_cast<const RowVector*>(nullptr), &fused}) {
      const auto vs = value_scores(bi.b_c, bi.b_q, wd, ws, b2, phi, f);
      const oracle::Vec fv = V(fused);
      const auto ov = oracle::value_scores(ob.b_c, ob.b_q, V(wd), V(ws), V(b2), phi, f ? &fv : nullptr);
      worst = std::max(worst, max_abs_diff(V(vs.alpha_b), ov.alpha_b));
      worst = std::max(worst, max_abs_diff(V(vs.u), ov.u));
      worst = std::max(worst, max_abs_diff(V(vs.p_v), ov.p_v));
    }

    const Matrix t1 = random_matrix(3, n, rng), t2 = random_matrix(n, n, rng), t3 = random_matrix(n, n, rng);
    const Matrix p2 = random_matrix(n, n, rng), p3 = random_matrix(n, n, rng);
    worst = std::max(worst, max_abs_diff(V(span_type(k, wd, ws, beta, t1).p_st),
                                         oracle::span_type(k, V(wd), V(ws), V(beta), t1)));
    const auto sb = span_bounds(k, wd, ws, beta, t2, t3, p2, p3);
    const auto osb = oracle::span_bounds(k, V(wd), V(ws), V(beta), t2, t3, p2, p3);
    worst = std::max(worst, max_abs_diff(V(sb.p_ss), osb.first));
    worst = std::max(worst, max_abs_diff(V(sb.p_se), osb.second));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(DecodeSpan, Examples) {
  auto d = decode_span(rv({1, 0}), rv({0, 1}), {"a", "b"});
  EXPECT_EQ(d.start, 0u);
  EXPECT_EQ(d.end, 1u);
  EXPECT_EQ(d.text, "a b");
  d = decode_span(rv({0.6, 0.4}), rv({0.9, 0.1}), {});
  EXPECT_EQ(d.start, 0u);
  EXPECT_EQ(d.end, 0u);
  EXPECT_NEAR(d.score, 0.54, 1e-12);
  d = decode_span(RowVector::Constant(5, 0.2), RowVector::Constant(5, 0.2), {});
  EXPECT_EQ(d.start, 0u);
  EXPECT_EQ(d.end, 0u);
}

TEST(DecodeSpan, MatchesEnumerationOracle) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    const long n = 1 + static_cast<long>(rng() % 14);
    const size_t max_len = 1 + rng() % 6;
    RowVector ps(n), pe(n);
    for (long i = 0; i < n; ++i) {
      ps(i) = static_cast<double>(rng() % 4);
      pe(i) = static_cast<double>(rng() % 4);
    }
    size_t bi = 0, bj = 0;
    double best = -1;
    for (size_t i = 0; i < static_cast<size_t>(n); ++i)
      for (size_t j = i; j < static_cast<size_t>(n) && j < i + max_len; ++j)
        if (ps(static_cast<long>(i)) * pe(static_cast<long>(j)) > best) {
          best = ps(static_cast<long>(i)) * pe(static_cast<long>(j));
          bi = i;
          bj = j;
        }
    const auto d = decode_span(ps, pe, {}, max_len);
    EXPECT_EQ(d.start, bi);
    EXPECT_EQ(d.end, bj);
    EXPECT_LE(d.start, d.end);
    EXPECT_LT(d.end, static_cast<size_t>(n));
  }
}

TEST(Argmax, LowestIndexWinsTies) {
  EXPECT_EQ(argmax(rv({0.2, 0.4, 0.4})), 1u);
  EXPECT_EQ(argmax(rv({1, 1})), 0u);
}

namespace {

std::vector<Question> questions() {
  Question price{"restaurant", "price range", SlotMode::Value, {"cheap", "moderate", "expensive"}};
  Question time{"taxi", "leave at", SlotMode::Span, {}};
  return {price, time};
}

QuestionPrediction value_pred(RowVector p) {
  QuestionPrediction q;
  q.mode = SlotMode::Value;
  q.p_v = std::move(p);
  return q;
}

QuestionPrediction span_pred(RowVector st, RowVector ss, RowVector se) {
  QuestionPrediction q;
  q.mode = SlotMode::Span;
  q.p_st = std::move(st);
  q.p_ss = std::move(ss);
  q.p_se = std::move(se);
  return q;
}

}  // namespace

TEST(ResolveAnswers, Examples) {
  const auto qs = questions();
  const std::vector<std::string> toks = {"leave", "at", "08:15"};
  TurnPrediction nm;
  nm.questions = {value_pred(rv({0, 0, 0, 1, 0})), span_pred(rv({1, 0, 0}), rv({1, 0, 0}), rv({1, 0, 0}))};
  resolve_answers(nm, qs, toks);
  EXPECT_TRUE(nm.state.empty());

  TurnPrediction peaked;
  peaked.questions = {value_pred(rv({0.9, 0.05, 0.05, 0, 0})),
                      span_pred(rv({0.1, 0.8, 0.1}), rv({0, 0, 1}), rv({0, 0, 1}))};
  resolve_answers(peaked, qs, toks);
  EXPECT_EQ(peaked.state, (DialogueState{{"restaurant", "price range", "cheap"}, {"taxi", "leave at", "don't care"}}));
  EXPECT_FALSE(peaked.questions[1].span.has_value());

  TurnPrediction span;
  span.questions = {value_pred(rv({0, 0, 0, 0, 1})), span_pred(rv({0, 0, 1}), rv({0, 0, 1}), rv({0, 0, 1}))};
  resolve_answers(span, qs, toks);
  EXPECT_EQ(span.state, (DialogueState{{"restaurant", "price range", "don't care"}, {"taxi", "leave at", "08:15"}}));
}

TEST(ComputeLoss, PerfectAndUniform) {
  const auto qs = questions();
  TurnPrediction perfect;
  perfect.questions = {value_pred(rv({1, 0, 0, 0, 0})), span_pred(rv({0, 0, 1}), rv({0, 1}), rv({0, 1}))};
  QuestionLabel lv;
  lv.value_index = 0;
  QuestionLabel ls;
  ls.span_type = SpanType::Span;
  ls.span = TokenSpan{1, 1};
  EXPECT_DOUBLE_EQ(compute_loss({perfect}, {{lv, ls}}).total(), 0.0);

  TurnPrediction uniform;
  uniform.questions = {value_pred(RowVector::Constant(4, 0.25))};
  QuestionLabel l3;
  l3.value_index = 3;
  EXPECT_NEAR(compute_loss({uniform, uniform}, {{l3}, {lv}}).loss_v, 2 * std::log(4.0), 1e-12);
}

TEST(ComputeLoss, MixedBatchMatchesLoopOracle) {
  std::mt19937_64 rng(7);
  auto prob = [&](long n) {
    RowVector v = random_matrix(1, n, rng).array().exp().matrix();
    return RowVector(v / v.sum());
  };
  std::vector<TurnPrediction> preds;
  std::vector<std::vector<QuestionLabel>> labels;
  double want_v = 0, want_st = 0, want_span = 0;
  for (int t = 0; t < 6; ++t) {
    TurnPrediction p;
    std::vector<QuestionLabel> ls;
    p.questions.push_back(value_pred(prob(5)));
    QuestionLabel lv;
    if (t % 3 != 2) {
      lv.value_index = rng() % 5;
      want_v += -std::log(p.questions[0].p_v(static_cast<long>(*lv.value_index)));
    }
    ls.push_back(lv);
    p.questions.push_back(span_pred(prob(3), prob(6), prob(6)));
    QuestionLabel sl;
    sl.span_type = static_cast<SpanType>(rng() % 3);
    want_st += -std::log(p.questions[1].p_st(static_cast<long>(sl.span_type)));
    if (sl.span_type == SpanType::Span && t % 2 == 0) {
      sl.span = TokenSpan{rng() % 3, 3 + rng() % 3};
      want_span += -std::log(p.questions[1].p_ss(static_cast<long>(sl.span->start)));
      want_span += -std::log(p.questions[1].p_se(static_cast<long>(sl.span->end)));
    }
    ls.push_back(sl);
    preds.push_back(p);
    labels.push_back(ls);
  }
  const auto got = compute_loss(preds, labels);
  EXPECT_NEAR(got.loss_v, want_v, 1e-9);
  EXPECT_NEAR(got.loss_st, want_st, 1e-9);
  EXPECT_NEAR(got.loss_span, want_span, 1e-9);
  EXPECT_NEAR(got.total(), want_v + want_st + want_span, 1e-9);
}

TEST(ComputeLoss, Errors) {
  TurnPrediction p;
  p.questions = {value_pred(RowVector::Constant(4, 0.25))};
  QuestionLabel bad;
  bad.value_index = 9;
  EXPECT_THROW(compute_loss({p}, {{bad}}), LabelError);
  EXPECT_THROW(compute_loss({p}, {}), AlignmentError);
  EXPECT_THROW(compute_loss({p}, {{bad, bad}}), AlignmentError);
}

// Permuting non-special candidates permutes p_v the same way.
TEST(ValueScores, CandidateEquivariance) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const long n = 4, l = 5;
    const Matrix e = random_matrix(6, n, rng);
    const Matrix wq = random_matrix(l, n, rng);
    const RowVector b1 = rand_row(3 * n, rng), b2 = rand_row(3 * n, rng), wd = rand_row(n, rng), ws = rand_row(n, rng);
    const Matrix phi = random_matrix(n, n, rng);
    const std::vector<long> perm = {2, 0, 1, 3, 4};
    Matrix wp(l, n);
    for (long j = 0; j < l; ++j) wp.row(j) = wq.row(perm[static_cast<size_t>(j)]);
    const auto a = bidirectional_attention(e, wq, b1);
    const auto b = bidirectional_attention(e, wp, b1);
    const auto pa = value_scores(a.b_c, a.b_q, wd, ws, b2, phi).p_v;
    const auto pb = value_scores(b.b_c, b.b_q, wd, ws, b2, phi).p_v;
    for (long j = 0; j < l; ++j) EXPECT_NEAR(pb(j), pa(perm[static_cast<size_t>(j)]), 1e-12);
  }
}
