// Small models and corpora shared by the test suites.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/model.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/trainer.hpp"

#ifndef DSTQA_TEST_DATA_DIR
#define DSTQA_TEST_DATA_DIR "tests/data"
#endif
#ifndef DSTQA_SOURCE_DIR
#define DSTQA_SOURCE_DIR "."
#endif

namespace fixtures {

inline dstqa::Ontology tiny_ontology() {
  return dstqa::Ontology::from_json_text(R"({"domains": {
    "restaurant": {
      "food": {"mode": "value", "values": ["italian", "chinese", "thai"]},
      "price range": {"mode": "value", "values": ["cheap", "moderate", "expensive"]}
    },
    "taxi": {"leave at": {"mode": "span"}}
  }})");
}

inline dstqa::Dialogue tiny_dialogue() {
  dstqa::Dialogue d;
  d.id = "tiny-0";
  d.turns.push_back({"", "i want cheap italian food",
                     {{"restaurant", "food", "italian"}, {"restaurant", "price range", "cheap"}}});
  d.turns.push_back({"when should the taxi leave ?", "leave at 08:15 please",
                     {{"restaurant", "food", "italian"},
                      {"restaurant", "price range", "cheap"},
                      {"taxi", "leave at", "08:15"}}});
  return d;
}

/// D_w = 8 desk model settings.
inline dstqa::TrainConfig tiny_config() {
  dstqa::TrainConfig c;
  c.word_dim = 4;
  c.char_dim = 4;
  c.char_embedding_dim = 3;
  c.char_kernel = 3;
  c.role_dim = 4;
  c.dropout = 0.0;
  c.word_dropout = 0.0;
  c.seed = 11;
  return c;
}

inline std::unique_ptr<dstqa::DstqaModel> tiny_model(bool graph, bool gated = false,
                                                     std::uint64_t seed = 11) {
  auto c = tiny_config();
  c.graph = graph;
  c.gated_graph = gated;
  c.seed = seed;
  const auto ontology = tiny_ontology();
  const auto words = dstqa::build_vocabulary({tiny_dialogue()}, ontology);
  return dstqa::make_model(c, ontology, words, nullptr);
}

/// Desk settings used for end-to-end runs on the synthetic corpus.
inline dstqa::TrainConfig desk_config() {
  dstqa::TrainConfig c;
  c.word_dim = 24;
  c.char_dim = 8;
  c.role_dim = 8;
  c.learning_rate = 0.005;
  c.dropout = 0.1;
  c.batch_size = 4;
  c.epochs = 200;
  c.patience = 10;
  return c;
}

struct GradResult {
  std::string name;
  double max_rel_error = 0.0;
  size_t checked = 0;
};

/// Central finite differences against analytic gradients. `loss` evaluates
/// the scalar loss on a fresh tape; when `record` is true it also runs
/// backward into the parameter gradients.
inline std::vector<GradResult> check_gradients(
    dstqa::ParameterStore& params, const std::function<double(bool record)>& loss,
    size_t max_entries = 120, double eps = 1e-5, std::uint64_t seed = 5) {
  params.zero_grad();
  loss(true);
  std::mt19937_64 rng(seed);
  std::vector<GradResult> out;
  for (dstqa::Parameter* p : params.all()) {
    if (!p->trainable) continue;
    GradResult r{p->name, 0.0, 0};
    std::vector<long> idx(static_cast<size_t>(p->value.size()));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<long>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    // Entries with a non-zero analytic gradient first, then a few zeros.
    std::stable_partition(idx.begin(), idx.end(),
                          [&](long i) { return p->grad.data()[i] != 0.0; });
    if (idx.size() > max_entries) idx.resize(max_entries);
    for (long i : idx) {
      double& x = p->value.data()[i];
      const double saved = x;
      x = saved + eps;
      const double up = loss(false);
      x = saved - eps;
      const double down = loss(false);
      x = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double an = p->grad.data()[i];
      const double denom = std::max(std::abs(fd) + std::abs(an), 1e-6);
      r.max_rel_error = std::max(r.max_rel_error, std::abs(fd - an) / denom);
      ++r.checked;
    }
    out.push_back(r);
  }
  return out;
}

/// Loss of one tiny-dialogue turn with a graph linked to the previous gold state.
inline double tiny_turn_loss(const dstqa::DstqaModel& model, bool record, size_t turn = 1) {
  const auto dialogue = tiny_dialogue();
  const auto examples = model.examples(dialogue, model.questions());
  dstqa::DialogueGraph graph(model.questions());
  if (turn > 0) graph.update(dialogue.turns[turn - 1].state);
  dstqa::Tape tape(record);
  dstqa::ForwardOptions fo;
  fo.compute_loss = true;
  auto out = model.forward(tape, examples[turn], model.questions(),
                           model.config().use_graph ? &graph : nullptr, fo);
  if (record) tape.backward(out.loss);
  return tape.value(out.loss)(0, 0);
}

}  // namespace fixtures
