#include <gtest/gtest.h>

#include <random>
#include <set>

#include "dstqa/errors.hpp"
#include "dstqa/model.hpp"
#include "dstqa/synthetic.hpp"
#include "fixtures.hpp"

using namespace dstqa;

namespace {

void expect_all_groups_match(bool graph, bool gated) {
  auto model = fixtures::tiny_model(graph, gated);
  const auto results = fixtures::check_gradients(
      model->parameters(), [&](bool record) { return fixtures::tiny_turn_loss(*model, record); });
  std::set<std::string> seen;
  for (const auto& r : results) {
    EXPECT_LT(r.max_rel_error, 1e-3) << r.name;
    EXPECT_GT(r.checked, 0u) << r.name;
    seen.insert(r.name);
  }
  for (const char* name : kReaderParameterNames) EXPECT_TRUE(seen.count(name)) << name;
  for (const char* name : {"enc.word", "enc.char", "enc.cnn_w", "enc.cnn_b", "enc.role", "enc.gru_fw.w",
                           "enc.gru_fw.u", "enc.gru_fw.b", "enc.gru_bw.w", "enc.gru_bw.u", "enc.gru_bw.b"})
    EXPECT_TRUE(seen.count(name)) << name;
  EXPECT_EQ(seen.count(kGraphTheta4), gated ? 1u : 0u);
}

}  // namespace

TEST(GradientAudit, PlainModel) { expect_all_groups_match(false, false); }
TEST(GradientAudit, GraphModel) { expect_all_groups_match(true, false); }
TEST(GradientAudit, GatedGraphModel) { expect_all_groups_match(true, true); }

TEST(Model, DimensionsAndParameterShapes) {
  auto model = fixtures::tiny_model(true);
  const long d = static_cast<long>(model->config().embedding.model_dim());
  EXPECT_EQ(d, 8);
  for (const char* b : {"reader.beta1", "reader.beta2", "reader.beta3", "reader.beta4"}) {
    EXPECT_EQ(model->parameters().at(b).value.rows(), 1);
    EXPECT_EQ(model->parameters().at(b).value.cols(), 3 * d);
  }
  EXPECT_EQ(model->parameters().at("reader.theta1").value.rows(), 3);
  EXPECT_EQ(model->parameters().at("reader.phi1").value.rows(), d);
}

TEST(Model, TapeLossEqualsComputeLoss) {
  auto model = fixtures::tiny_model(true);
  const auto dialogue = fixtures::tiny_dialogue();
  const auto exs = model->examples(dialogue, model->questions());
  DialogueGraph graph(model->questions());
  std::vector<TurnPrediction> preds;
  std::vector<std::vector<QuestionLabel>> labels;
  double tape_total = 0;
  for (const auto& ex : exs) {
    Tape tape(false);
    ForwardOptions fo;
    fo.compute_loss = true;
    auto out = model->forward(tape, ex, model->questions(), &graph, fo);
    tape_total += tape.value(out.loss)(0, 0);
    EXPECT_NEAR(out.losses.total(), tape.value(out.loss)(0, 0), 1e-9);
    preds.push_back(out.prediction);
    labels.push_back(ex.labels);
  }
  EXPECT_NEAR(compute_loss(preds, labels).total(), tape_total, 1e-9);
}

// Every probability vector sums to one across many random forward passes.
TEST(Normalization, ThousandRandomForwardPasses) {
  auto cfg = SyntheticConfig::two_domain_default();
  cfg.train_dialogues = 20;
  cfg.dev_dialogues = cfg.test_dialogues = 0;
  const auto [corpus, ontology] = generate_synthetic(cfg, 5);
  auto tc = fixtures::tiny_config();
  double worst = 0;
  size_t passes = 0, vectors = 0;
  auto check = [&](const Matrix& m) {
    for (long r = 0; r < m.rows(); ++r) {
      EXPECT_GE(m.row(r).minCoeff(), 0.0);
      worst = std::max(worst, std::abs(m.row(r).sum() - 1.0));
      ++vectors;
    }
  };
  for (std::uint64_t seed = 0; passes < 1000; ++seed) {
    tc.seed = seed;
    tc.graph = seed % 2 == 0;
    tc.gated_graph = seed % 4 == 2;
    auto model = make_model(tc, ontology, corpus.vocabulary, nullptr);
    std::mt19937_64 rng(seed);
    for (const auto& d : corpus.train) {
      const auto exs = model->examples(d, model->questions());
      DialogueGraph graph(model->questions());
      for (size_t t = 0; t < exs.size() && passes < 1000; ++t) {
        Tape tape(false);
        ForwardOptions fo;
        fo.training = true;
        fo.rng = &rng;
        auto out = model->forward(tape, exs[t], model->questions(), &graph, fo);
        graph.update(out.prediction.state);
        for (const auto& q : out.prediction.questions) {
          if (q.mode == SlotMode::Value) {
            check(q.p_v);
            check(q.alpha_b);
            if (tc.graph) check(q.alpha_g);
            if (tc.graph) {
              EXPECT_GT(q.gamma.minCoeff(), 0.0);
              EXPECT_LT(q.gamma.maxCoeff(), 1.0);
            }
          } else {
            check(q.p_st);
            check(q.p_ss);
            check(q.p_se);
          }
        }
        // Attention maps internal to the reader, recomputed on the same encodings.
        const auto& toks = exs[t].tokens;
        Var e_c = model->encoder().encode_context(tape, model->encoder().embed_context(tape, toks),
                                                  exs[t].roles, exs[t].exact_match);
        const auto qe = model->encoder().embed_questions(tape, model->questions());
        auto& ps = const_cast<ParameterStore&>(model->parameters());
        for (size_t qi = 0; qi < qe.size(); ++qi) {
          if (model->questions()[qi].mode == SlotMode::Value) {
            const auto bi = ops::bidirectional_attention(tape, e_c, qe[qi].question, tape.param(ps.at("reader.beta1")));
            check(tape.value(bi.alpha_v));
            check(tape.value(bi.alpha_w));
          } else {
            const auto h = ops::span_heads(tape, e_c, qe[qi].domain_slot, tape.param(ps.at("reader.beta3")),
                                           tape.param(ps.at("reader.theta1")), tape.param(ps.at("reader.theta2")),
                                           tape.param(ps.at("reader.theta3")), tape.param(ps.at("reader.phi2")),
                                           tape.param(ps.at("reader.phi3")));
            check(tape.value(h.alpha_e));
          }
        }
        ++passes;
      }
      if (passes >= 1000) break;
    }
  }
  EXPECT_EQ(passes, 1000u);
  EXPECT_GT(vectors, 10000u);
  EXPECT_LE(worst, 1e-5);
}

TEST(GraphConsistency, GammaZeroEqualsGraphOff) {
  auto with_graph = fixtures::tiny_model(true);
  auto without = fixtures::tiny_model(false);
  with_graph->hooks().force_gamma_zero = true;
  const auto d = fixtures::tiny_dialogue();
  const auto a = with_graph->predict_dialogue(d);
  const auto b = without->predict_dialogue(d);
  ASSERT_EQ(a.size(), b.size());
  for (size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].state, b[t].state);
    for (size_t q = 0; q < a[t].questions.size(); ++q) {
      const auto& x = a[t].questions[q];
      const auto& y = b[t].questions[q];
      if (x.mode == SlotMode::Value) EXPECT_LT((x.p_v - y.p_v).cwiseAbs().maxCoeff(), 1e-6);
      else EXPECT_LT((x.p_st - y.p_st).cwiseAbs().maxCoeff(), 1e-6);
    }
  }
  // Losses agree as well.
  with_graph->hooks().force_gamma_zero = true;
  EXPECT_NEAR(fixtures::tiny_turn_loss(*with_graph, false), fixtures::tiny_turn_loss(*without, false), 1e-6);
}

TEST(Model, ExtendValuesGivesLongerDistribution) {
  auto model = fixtures::tiny_model(true);
  const size_t k = model->ontology().find_slot("restaurant", "food")->values.size();
  model->extend_values("restaurant", "food", {"korean"});
  EXPECT_EQ(model->questions()[0].candidate_count(), k + 3);
  const auto preds = model->predict_dialogue(fixtures::tiny_dialogue());
  EXPECT_EQ(preds[0].questions[0].p_v.size(), static_cast<long>(k + 3));
  EXPECT_NEAR(preds[0].questions[0].p_v.sum(), 1.0, 1e-9);
  EXPECT_THROW(model->extend_values("taxi", "leave at", {"08:00"}), ModeError);
  EXPECT_THROW(model->extend_values("restaurant", "food", {"korean"}), ValidationError);
}

TEST(Model, EmptyDialogueAndEmptyFirstTurn) {
  auto model = fixtures::tiny_model(true);
  EXPECT_TRUE(model->predict_dialogue(Dialogue{"e", {}}).empty());
  Dialogue silent{"s", {{"", "", {}}}};
  const auto p = model->predict_dialogue(silent);
  ASSERT_EQ(p.size(), 1u);
  for (const auto& q : p[0].questions)
    if (q.mode == SlotMode::Span) EXPECT_EQ(q.p_ss.size(), 1);
}

TEST(Model, ScheduleUsesPreviousPrediction) {
  auto model = fixtures::tiny_model(true);
  const auto d = fixtures::tiny_dialogue();
  std::vector<DialogueGraph> seen;
  model->hooks().on_turn_graph = [&](size_t, const DialogueGraph& g) { seen.push_back(g); };
  const auto preds = model->predict_dialogue(d);
  ASSERT_EQ(seen.size(), d.turns.size());
  EXPECT_EQ(seen[0], DialogueGraph(model->questions()));
  for (size_t t = 1; t < seen.size(); ++t)
    EXPECT_EQ(seen[t], update_graph(DialogueGraph(model->questions()), preds[t - 1].state));
}

TEST(Model, GraphOffNeverTouchesGraphOps) {
  auto model = fixtures::tiny_model(false);
  const size_t before = graph_op_counter().load();
  model->predict_dialogue(fixtures::tiny_dialogue());
  EXPECT_EQ(graph_op_counter().load(), before);
  auto on = fixtures::tiny_model(true);
  on->predict_dialogue(fixtures::tiny_dialogue());
  EXPECT_GT(graph_op_counter().load(), before);
}

TEST(Model, CopyParametersFrom) {
  auto a = fixtures::tiny_model(true, false, 1);
  auto b = fixtures::tiny_model(true, false, 2);
  EXPECT_NE(a->parameters().at("reader.phi1").value, b->parameters().at("reader.phi1").value);
  EXPECT_EQ(b->copy_parameters_from(*a), a->parameters().all().size());
  EXPECT_EQ(a->parameters().at("reader.phi1").value, b->parameters().at("reader.phi1").value);
}
