#include <gtest/gtest.h>

#include <nlohmann/json.hpp>
#include <random>

#include "dstqa/errors.hpp"
#include "dstqa/evaluation.hpp"
#include "dstqa/synthetic.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dstqa;

namespace {

oracle::State to_set(const DialogueState& s) {
  oracle::State out;
  for (const auto& t : s) out.insert({t.domain, t.slot, normalize_value(t.value)});
  return out;
}

// Random states over the tiny ontology, with case and order noise on the predicted side.
DialogueState random_state(std::mt19937_64& rng, const Ontology& o) {
  DialogueState s;
  for (size_t p = 0; p < o.pair_count(); ++p) {
    if (rng() % 2) continue;
    const auto& spec = o.slot_at(p);
    std::string v = spec.mode == SlotMode::Span ? (rng() % 2 ? "08:15" : "09:00")
                                                : spec.values[rng() % spec.values.size()];
    s.push_back({o.pairs()[p].domain, o.pairs()[p].slot, v});
  }
  return s;
}

DialogueState noisy(DialogueState s, std::mt19937_64& rng) {
  std::shuffle(s.begin(), s.end(), rng);
  for (auto& t : s)
    if (rng() % 3 == 0) t.value = " " + std::string(1, static_cast<char>(std::toupper(t.value[0]))) + t.value.substr(1);
  return s;
}

}  // namespace

TEST(Metrics, JointExamples) {
  const DialogueState a = {{"restaurant", "food", "thai"}};
  const DialogueState b = {{"restaurant", "food", "italian"}};
  EXPECT_DOUBLE_EQ(joint_accuracy({a, b}, {a, b}), 1.0);
  EXPECT_DOUBLE_EQ(joint_accuracy({a, a}, {a, b}), 0.5);
  EXPECT_THROW(joint_accuracy({a}, {a, b}), AlignmentError);
}

TEST(Metrics, SlotCounting) {
  // 30 pairs x 10 turns with one wrong cell.
  std::vector<DomainSpec> domains(1);
  domains[0].name = "d";
  for (int s = 0; s < 30; ++s) domains[0].slots.push_back({"s" + std::to_string(s), SlotMode::Value, {"x", "y"}});
  const Ontology o(domains);
  std::vector<DialogueState> gold(10), pred(10);
  pred[4] = {{"d", "s7", "x"}};
  EXPECT_DOUBLE_EQ(slot_accuracy(gold, gold, o), 1.0);
  EXPECT_DOUBLE_EQ(slot_accuracy(pred, gold, o), 299.0 / 300.0);
}

TEST(Metrics, MatchSetOracles) {
  const auto o = fixtures::tiny_ontology();
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& p : o.pairs()) pairs.emplace_back(p.domain, p.slot);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<DialogueState> pred, gold;
    std::vector<oracle::State> op, og;
    for (int t = 0; t < 100; ++t) {
      gold.push_back(random_state(rng, o));
      pred.push_back(rng() % 3 ? noisy(gold.back(), rng) : random_state(rng, o));
      op.push_back(to_set(pred.back()));
      og.push_back(to_set(gold.back()));
    }
    EXPECT_NEAR(joint_accuracy(pred, gold), oracle::joint(op, og), 1e-12);
    EXPECT_NEAR(slot_accuracy(pred, gold, o), oracle::slot(op, og, pairs), 1e-12);
    EXPECT_DOUBLE_EQ(joint_accuracy(gold, gold), 1.0);
    EXPECT_DOUBLE_EQ(slot_accuracy(gold, gold, o), 1.0);
  }
}

TEST(Metrics, JointOneImpliesSlotOne) {
  const auto o = fixtures::tiny_ontology();
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DialogueState> gold, pred;
    for (int t = 0; t < 5; ++t) {
      gold.push_back(random_state(rng, o));
      pred.push_back(noisy(gold.back(), rng));
    }
    if (joint_accuracy(pred, gold) == 1.0) EXPECT_DOUBLE_EQ(slot_accuracy(pred, gold, o), 1.0);
  }
}

TEST(PerDomain, FilteringMatchesHandRecomputation) {
  const auto o = fixtures::tiny_ontology();
  std::vector<Dialogue> gold(3);
  gold[0] = {"r", {{"", "x", {{"restaurant", "food", "thai"}}}, {"", "y", {{"restaurant", "food", "thai"}}}}};
  gold[1] = {"t", {{"", "x", {{"taxi", "leave at", "08:15"}}}}};
  gold[2] = {"n", {{"", "x", {}}}};
  std::vector<std::vector<DialogueState>> pred = {
      {{{"restaurant", "food", "thai"}, {"taxi", "leave at", "01:00"}}, {{"restaurant", "food", "greek"}}},
      {{{"taxi", "leave at", "08:15"}}},
      {{}}};
  const auto rest = per_domain_score(pred, gold, o, "restaurant");
  EXPECT_EQ(rest.dialogues, 1u);
  EXPECT_EQ(rest.turns, 2u);
  EXPECT_DOUBLE_EQ(rest.joint, 0.5);  // the taxi error is ignored
  EXPECT_DOUBLE_EQ(rest.slot, 3.0 / 4.0);
  const auto taxi = per_domain_score(pred, gold, o, "taxi");
  EXPECT_EQ(taxi.dialogues, 1u);
  EXPECT_DOUBLE_EQ(taxi.joint, 1.0);
  EXPECT_THROW(per_domain_score(pred, gold, o, "hotel"), ValidationError);
  EXPECT_EQ(per_domain_score({}, {}, o, "taxi").turns, 0u);
}

TEST(PerDomain, SingleDomainEqualsOverall) {
  auto cfg = SyntheticConfig::two_domain_default();
  cfg.ontology = Ontology::from_json_text(R"({"domains": {"restaurant": {
    "food": {"mode": "value", "values": ["thai", "greek", "italian"]},
    "price range": {"mode": "value", "values": ["cheap", "expensive"]}}}})");
  cfg.null_dialogue_prob = 0;
  cfg.train_dialogues = 4;
  cfg.dev_dialogues = 0;
  cfg.test_dialogues = 8;
  const auto [corpus, ontology] = generate_synthetic(cfg, 1);
  auto tc = fixtures::tiny_config();
  auto model = make_model(tc, ontology, corpus.vocabulary, nullptr);
  const auto overall = evaluate_model(*model, corpus.test);
  const auto dom = per_domain_eval(corpus.test, *model, "restaurant");
  EXPECT_DOUBLE_EQ(overall.joint, dom.joint);
  EXPECT_DOUBLE_EQ(overall.slot, dom.slot);
  EXPECT_EQ(overall.turns, dom.turns);
}

TEST(EvalReport, JsonShape) {
  const auto o = fixtures::tiny_ontology();
  const auto d = fixtures::tiny_dialogue();
  auto r = score_states(gold_states({d}), {d}, o, o.pairs());
  r.set_metadata("graph", "off");
  const auto j = nlohmann::json::parse(r.to_json_text());
  EXPECT_DOUBLE_EQ(j["joint"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["slot"].get<double>(), 1.0);
  EXPECT_EQ(j["turns"].get<int>(), 2);
  EXPECT_TRUE(j.contains("per_domain"));
  EXPECT_TRUE(j.contains("per_slot"));
  EXPECT_EQ(j["metadata"]["graph"], "off");
  EXPECT_EQ(j["per_slot"].size(), 3u);
}

TEST(Sampling, DeterministicStratifiedAndNonEmpty) {
  const auto [corpus, ontology] = generate_synthetic(SyntheticConfig::two_domain_default(), 4);
  const auto a = sample_dialogues(corpus.train, 0.2, 9);
  const auto b = sample_dialogues(corpus.train, 0.2, 9);
  ASSERT_EQ(a.size(), 10u);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  const auto c = sample_dialogues(corpus.train, 0.2, 10);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) differs = differs || a[i].id != c[i].id;
  EXPECT_TRUE(differs);
  EXPECT_EQ(sample_dialogues(corpus.train, 1.0, 1).size(), corpus.train.size());
  EXPECT_THROW(sample_dialogues(std::vector<Dialogue>(corpus.train.begin(), corpus.train.begin() + 5), 0.05, 1),
               ValidationError);
  EXPECT_THROW(sample_dialogues(corpus.train, 0.0, 1), ValidationError);
}

TEST(Expansion, FullFractionScratchEqualsOrdinaryTraining) {
  auto cfg = SyntheticConfig::two_domain_default();
  cfg.ontology = Ontology::from_json_text(R"({"domains": {"restaurant": {
    "food": {"mode": "value", "values": ["thai", "greek", "italian"]},
    "price range": {"mode": "value", "values": ["cheap", "expensive"]}}}})");
  cfg.null_dialogue_prob = 0;
  cfg.train_dialogues = 6;
  cfg.dev_dialogues = 3;
  cfg.test_dialogues = 4;
  const auto [corpus, ontology] = generate_synthetic(cfg, 2);
  auto tc = fixtures::tiny_config();
  tc.epochs = 2;
  tc.patience = 0;
  const auto r = domain_expansion_run(corpus, ontology, "restaurant", 1.0, ExpansionMode::Scratch, tc);
  const auto plain = train(tc, corpus, ontology);
  const auto ev = evaluate_model(*plain.model, corpus.test);
  EXPECT_DOUBLE_EQ(r.joint, ev.joint);
  EXPECT_DOUBLE_EQ(r.slot, ev.slot);
  EXPECT_EQ(r.sampled_ids.size(), corpus.train.size());
  EXPECT_THROW(domain_expansion_run(corpus, ontology, "hotel", 1.0, ExpansionMode::Scratch, tc), ValidationError);
  EXPECT_THROW(domain_expansion_run(corpus, ontology, "restaurant", 1.0, ExpansionMode::Finetune, tc), ValidationError);
}

TEST(Expansion, ModeNames) {
  EXPECT_EQ(parse_expansion_mode("finetune"), ExpansionMode::Finetune);
  EXPECT_EQ(to_string(ExpansionMode::Scratch), "scratch");
  EXPECT_THROW(parse_expansion_mode("warm"), ValidationError);
}
