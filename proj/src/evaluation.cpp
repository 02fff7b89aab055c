#include "dstqa/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

namespace {

using json = nlohmann::ordered_json;

std::vector<SlotRef> pairs_of(const std::vector<Question>& questions) {
  std::vector<SlotRef> out;
  for (const auto& q : questions) out.push_back(q.ref());
  return out;
}

std::vector<SlotRef> domain_pairs(const Ontology& ontology, const std::string& domain) {
  const DomainSpec* d = ontology.find_domain(domain);
  if (!d) throw ValidationError("unknown domain '" + domain + "'");
  std::vector<SlotRef> out;
  for (const auto& s : d->slots) out.push_back({domain, s.name});
  return out;
}

void check_aligned(size_t a, size_t b) {
  if (a != b)
    throw AlignmentError("predicted and gold turn lists differ in length (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
}

std::string value_of(const DialogueState& state, const SlotRef& pair) {
  for (const auto& t : state)
    if (t.domain == pair.domain && t.slot == pair.slot) return t.value;
  return std::string(kNotMentioned);
}

struct Counts {
  size_t joint_hits = 0, turns = 0, slot_hits = 0, cells = 0;
  std::map<std::string, std::pair<size_t, size_t>> per_slot;
};

void accumulate(Counts& c, const std::vector<DialogueState>& pred,
                const std::vector<DialogueState>& gold, const std::vector<SlotRef>& pairs) {
  check_aligned(pred.size(), gold.size());
  for (size_t t = 0; t < pred.size(); ++t) {
    const DialogueState p = canonical_state(restrict_state(pred[t], pairs));
    const DialogueState g = canonical_state(restrict_state(gold[t], pairs));
    c.joint_hits += p == g ? 1 : 0;
    ++c.turns;
    for (const auto& pair : pairs) {
      const bool hit = value_of(p, pair) == value_of(g, pair);
      c.slot_hits += hit ? 1 : 0;
      ++c.cells;
      auto& s = c.per_slot[pair.key()];
      s.first += hit ? 1 : 0;
      ++s.second;
    }
  }
}

double ratio(size_t a, size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / b; }

}  // namespace

void EvalReport::set_metadata(const std::string& key, const std::string& value) {
  for (auto& kv : metadata)
    if (kv.first == key) {
      kv.second = value;
      return;
    }
  metadata.emplace_back(key, value);
}

std::string EvalReport::to_json_text() const {
  json j;
  j["joint"] = joint;
  j["slot"] = slot;
  j["turns"] = turns;
  j["dialogues"] = dialogues;
  json pd = json::object();
  for (const auto& [d, s] : per_domain)
    pd[d] = {{"joint", s.joint}, {"slot", s.slot}, {"turns", s.turns}, {"dialogues", s.dialogues}};
  j["per_domain"] = pd;
  json ps = json::object();
  for (const auto& [k, v] : per_slot) ps[k] = v;
  j["per_slot"] = ps;
  json md = json::object();
  for (const auto& [k, v] : metadata) md[k] = v;
  j["metadata"] = md;
  if (!sampled_ids.empty()) j["sampled_ids"] = sampled_ids;
  if (!config_json.empty()) j["config"] = json::parse(config_json);
  return j.dump(1) + "\n";
}

double joint_accuracy(const std::vector<DialogueState>& predicted,
                      const std::vector<DialogueState>& gold) {
  check_aligned(predicted.size(), gold.size());
  size_t hits = 0;
  for (size_t t = 0; t < predicted.size(); ++t)
    hits += canonical_state(predicted[t]) == canonical_state(gold[t]) ? 1 : 0;
  return ratio(hits, predicted.size());
}

double slot_accuracy(const std::vector<DialogueState>& predicted,
                     const std::vector<DialogueState>& gold, const Ontology& ontology) {
  return slot_accuracy(predicted, gold, ontology.pairs());
}

double slot_accuracy(const std::vector<DialogueState>& predicted,
                     const std::vector<DialogueState>& gold, const std::vector<SlotRef>& pairs) {
  Counts c;
  accumulate(c, predicted, gold, pairs);
  return ratio(c.slot_hits, c.cells);
}

DialogueState restrict_state(const DialogueState& state, const std::vector<SlotRef>& pairs) {
  DialogueState out;
  for (const auto& t : state)
    if (std::find(pairs.begin(), pairs.end(), SlotRef{t.domain, t.slot}) != pairs.end())
      out.push_back(t);
  return out;
}

bool mentions_domain(const Dialogue& dialogue, const std::string& domain) {
  for (const auto& turn : dialogue.turns)
    for (const auto& t : turn.state)
      if (t.domain == domain && canonical_value(t.value) != kNotMentioned) return true;
  return false;
}

std::vector<std::vector<DialogueState>> gold_states(const std::vector<Dialogue>& dialogues) {
  std::vector<std::vector<DialogueState>> out;
  for (const auto& d : dialogues) {
    std::vector<DialogueState> states;
    for (const auto& t : d.turns) states.push_back(canonical_state(t.state));
    out.push_back(std::move(states));
  }
  return out;
}

DomainScore per_domain_score(const std::vector<std::vector<DialogueState>>& predicted,
                             const std::vector<Dialogue>& gold, const Ontology& ontology,
                             const std::string& domain) {
  check_aligned(predicted.size(), gold.size());
  const auto pairs = domain_pairs(ontology, domain);
  const auto gs = gold_states(gold);
  Counts c;
  DomainScore s;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (!mentions_domain(gold[i], domain)) continue;
    accumulate(c, predicted[i], gs[i], pairs);
    ++s.dialogues;
  }
  s.joint = ratio(c.joint_hits, c.turns);
  s.slot = ratio(c.slot_hits, c.cells);
  s.turns = c.turns;
  return s;
}

EvalReport score_states(const std::vector<std::vector<DialogueState>>& predicted,
                        const std::vector<Dialogue>& gold, const Ontology& ontology,
                        const std::vector<SlotRef>& pairs) {
  check_aligned(predicted.size(), gold.size());
  const auto gs = gold_states(gold);
  Counts c;
  for (size_t i = 0; i < gold.size(); ++i) accumulate(c, predicted[i], gs[i], pairs);
  EvalReport r;
  r.joint = ratio(c.joint_hits, c.turns);
  r.slot = ratio(c.slot_hits, c.cells);
  r.turns = c.turns;
  r.dialogues = gold.size();
  for (const auto& [k, v] : c.per_slot) r.per_slot[k] = ratio(v.first, v.second);
  std::vector<std::string> domains;
  for (const auto& p : pairs)
    if (std::find(domains.begin(), domains.end(), p.domain) == domains.end())
      domains.push_back(p.domain);
  for (const auto& d : domains) r.per_domain[d] = per_domain_score(predicted, gold, ontology, d);
  return r;
}

EvalReport evaluate_model(const DstqaModel& model, const std::vector<Dialogue>& dialogues,
                          const std::vector<Question>& questions) {
  std::vector<std::vector<DialogueState>> predicted;
  predicted.reserve(dialogues.size());
  for (const auto& d : dialogues) predicted.push_back(states_of(model.predict_dialogue(d, questions)));
  EvalReport r = score_states(predicted, dialogues, model.ontology(), pairs_of(questions));
  r.set_metadata("graph", model.config().use_graph ? "on" : "off");
  return r;
}

EvalReport evaluate_model(const DstqaModel& model, const std::vector<Dialogue>& dialogues) {
  return evaluate_model(model, dialogues, model.questions());
}

EvalReport per_domain_eval(const std::vector<Dialogue>& dialogues, const DstqaModel& model,
                           const std::string& domain) {
  const auto pairs = domain_pairs(model.ontology(), domain);
  std::vector<Dialogue> kept;
  for (const auto& d : dialogues)
    if (mentions_domain(d, domain)) kept.push_back(d);
  std::vector<std::vector<DialogueState>> predicted;
  for (const auto& d : kept) predicted.push_back(states_of(model.predict_dialogue(d)));
  EvalReport r = score_states(predicted, kept, model.ontology(), pairs);
  r.set_metadata("domain", domain);
  r.set_metadata("graph", model.config().use_graph ? "on" : "off");
  return r;
}

std::string_view to_string(ExpansionMode mode) {
  return mode == ExpansionMode::Scratch ? "scratch" : "finetune";
}

ExpansionMode parse_expansion_mode(std::string_view text) {
  if (text == "scratch") return ExpansionMode::Scratch;
  if (text == "finetune") return ExpansionMode::Finetune;
  throw ValidationError("mode must be 'scratch' or 'finetune'");
}

std::vector<Dialogue> sample_dialogues(const std::vector<Dialogue>& pool, double fraction,
                                       std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("fraction must lie in (0, 1]");
  const size_t total = static_cast<size_t>(std::llround(fraction * static_cast<double>(pool.size())));
  if (total == 0)
    throw ValidationError("sample of " + std::to_string(fraction) + " of " +
                          std::to_string(pool.size()) + " dialogues is empty");
  // Length quartiles over a stable order.
  std::vector<size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (pool[a].turns.size() != pool[b].turns.size())
      return pool[a].turns.size() < pool[b].turns.size();
    return pool[a].id < pool[b].id;
  });
  std::vector<std::vector<size_t>> strata(4);
  for (size_t r = 0; r < order.size(); ++r) strata[r * 4 / order.size()].push_back(order[r]);
  // Largest-remainder allocation of `total` over the strata.
  std::vector<size_t> take(4);
  std::vector<std::pair<double, size_t>> remainders;
  size_t allocated = 0;
  for (size_t s = 0; s < 4; ++s) {
    const double exact = static_cast<double>(total) * strata[s].size() / pool.size();
    take[s] = static_cast<size_t>(exact);
    allocated += take[s];
    remainders.emplace_back(exact - static_cast<double>(take[s]), s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (size_t i = 0; allocated < total; ++i, ++allocated) ++take[remainders[i % 4].second];
  std::mt19937_64 rng(seed);
  std::vector<size_t> chosen;
  for (size_t s = 0; s < 4; ++s) {
    auto members = strata[s];
    std::shuffle(members.begin(), members.end(), rng);
    for (size_t i = 0; i < std::min(take[s], members.size()); ++i) chosen.push_back(members[i]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Dialogue> out;
  for (size_t i : chosen) out.push_back(pool[i]);
  return out;
}

EvalReport domain_expansion_run(const Corpus& corpus, const Ontology& ontology,
                                const std::string& target_domain, double fraction,
                                ExpansionMode mode, const TrainConfig& config,
                                const ExpansionOptions& options) {
  if (!ontology.find_domain(target_domain))
    throw ValidationError("unknown domain '" + target_domain + "'");
  std::vector<std::string> sources;
  for (const auto& d : ontology.domains())
    if (d.name != target_domain) sources.push_back(d.name);

  auto split_by = [&](const std::vector<Dialogue>& in, bool with_target) {
    std::vector<Dialogue> out;
    for (const auto& d : in)
      if (mentions_domain(d, target_domain) == with_target) out.push_back(d);
    return out;
  };

  Corpus target;
  target.train = sample_dialogues(split_by(corpus.train, true), fraction, config.seed);
  target.dev = split_by(corpus.dev, true);
  target.vocabulary = corpus.vocabulary;

  TrainOptions to;
  to.domains = {target_domain};
  to.log = options.log;
  std::unique_ptr<DstqaModel> pretrained_model;
  if (mode == ExpansionMode::Finetune) {
    if (sources.empty()) throw ValidationError("fine-tuning needs at least one source domain");
    Corpus source;
    source.train = split_by(corpus.train, false);
    source.dev = split_by(corpus.dev, false);
    source.vocabulary = corpus.vocabulary;
    if (source.train.empty()) throw ValidationError("no source-domain dialogues to pretrain on");
    TrainOptions so;
    so.domains = sources;
    so.log = options.log;
    pretrained_model = train(config, source, ontology, so).model;
    to.init_from = pretrained_model.get();
  }
  TrainResult tuned = train(config, target, ontology, to);

  const auto questions = tuned.model->questions_for({target_domain});
  std::vector<Dialogue> test = split_by(corpus.test, true);
  std::vector<std::vector<DialogueState>> predicted;
  for (const auto& d : test) predicted.push_back(states_of(tuned.model->predict_dialogue(d, questions)));
  EvalReport r = score_states(predicted, test, tuned.model->ontology(), pairs_of(questions));
  r.set_metadata("target_domain", target_domain);
  r.set_metadata("mode", std::string(to_string(mode)));
  r.set_metadata("fraction", std::to_string(fraction));
  r.set_metadata("graph", config.graph ? "on" : "off");
  for (const auto& d : target.train) r.sampled_ids.push_back(d.id);
  r.config_json = tuned.config.to_json_text();
  return r;
}

}  // namespace dstqa
