#include "dstqa/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"
#include "json.hpp"

namespace dstqa {

using ojson = nlohmann::ordered_json;

namespace {

const char* const kCountKeys[] = {"train_dialogues", "dev_dialogues", "test_dialogues",
                                  "min_turns", "max_turns"};
const char* const kProbKeys[] = {"multi_domain_prob", "dont_care_prob", "change_prob",
                                 "chatter_prob",      "confirm_prob",   "null_dialogue_prob"};

size_t* count_field(SyntheticConfig& c, std::string_view key) {
  if (key == "train_dialogues") return &c.train_dialogues;
  if (key == "dev_dialogues") return &c.dev_dialogues;
  if (key == "test_dialogues") return &c.test_dialogues;
  if (key == "min_turns") return &c.min_turns;
  if (key == "max_turns") return &c.max_turns;
  return nullptr;
}

double* prob_field(SyntheticConfig& c, std::string_view key) {
  if (key == "multi_domain_prob") return &c.multi_domain_prob;
  if (key == "dont_care_prob") return &c.dont_care_prob;
  if (key == "change_prob") return &c.change_prob;
  if (key == "chatter_prob") return &c.chatter_prob;
  if (key == "confirm_prob") return &c.confirm_prob;
  if (key == "null_dialogue_prob") return &c.null_dialogue_prob;
  return nullptr;
}

class Generator {
 public:
  Generator(const SyntheticConfig& config, std::uint64_t seed) : config_(config), rng_(seed) {}

  Dialogue dialogue(std::string id);

 private:
  struct Item {
    std::string domain;
    std::string slot;
    std::string value;
  };

  size_t uniform(size_t lo, size_t hi) {  // inclusive
    return std::uniform_int_distribution<size_t>(lo, hi)(rng_);
  }
  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[uniform(0, v.size() - 1)];
  }

  std::string time_value() {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02zu:%02zu", uniform(0, 23), 5 * uniform(0, 11));
    return buf;
  }
  std::string value_for(const SlotSpec& slot) {
    return slot.mode == SlotMode::Span ? time_value() : pick(slot.values);
  }
  std::string inform(const Item& item);
  std::string chatter() {
    static const std::vector<std::string> lines = {
        "hello .", "thank you .", "that sounds good .", "can you help me ?", "ok , great .",
        "i need some help planning my day ."};
    return pick(lines);
  }

  const SyntheticConfig& config_;
  std::mt19937_64 rng_;
};

std::string Generator::inform(const Item& item) {
  if (item.value == kDontCare) {
    static const std::vector<std::string> t = {"i do not mind about the {s} .",
                                               "any {s} is fine .",
                                               "the {s} does not matter to me ."};
    std::string out = pick(t);
    out.replace(out.find("{s}"), 3, item.slot);
    return out;
  }
  static const std::vector<std::string> t = {
      "i am looking for a {d} with {v} {s} .", "i want {v} {s} .", "the {s} should be {v} .",
      "{s} {v} please .", "i need a {d} , {s} {v} .", "can i get {v} for the {s} ?"};
  std::string out = pick(t);
  auto sub = [&](const std::string& key, const std::string& val) {
    if (auto pos = out.find(key); pos != std::string::npos) out.replace(pos, key.size(), val);
  };
  sub("{d}", item.domain);
  sub("{v}", item.value);
  sub("{s}", item.slot);
  return out;
}

Dialogue Generator::dialogue(std::string id) {
  const Ontology& ont = config_.ontology;
  Dialogue dlg{std::move(id), {}};
  const size_t n_turns = uniform(config_.min_turns, config_.max_turns);

  std::vector<Item> items;
  if (!chance(config_.null_dialogue_prob)) {
    std::vector<size_t> domains(ont.domains().size());
    for (size_t i = 0; i < domains.size(); ++i) domains[i] = i;
    std::shuffle(domains.begin(), domains.end(), rng_);
    const size_t n_domains = (domains.size() > 1 && chance(config_.multi_domain_prob)) ? 2 : 1;
    for (size_t k = 0; k < n_domains; ++k) {
      const DomainSpec& d = ont.domains()[domains[k]];
      std::vector<size_t> slots(d.slots.size());
      for (size_t i = 0; i < slots.size(); ++i) slots[i] = i;
      std::shuffle(slots.begin(), slots.end(), rng_);
      const size_t n_slots = uniform(1, slots.size());
      for (size_t i = 0; i < n_slots; ++i) {
        const SlotSpec& s = d.slots[slots[i]];
        items.push_back({d.name, s.name,
                         chance(config_.dont_care_prob) ? std::string(kDontCare) : value_for(s)});
      }
    }
  }

  std::map<std::pair<std::string, std::string>, std::string> state;
  std::vector<Item> last_informed;
  size_t next = 0;
  for (size_t t = 0; t < n_turns; ++t) {
    Turn turn;
    if (t > 0) {
      if (!last_informed.empty() && last_informed.front().value != kDontCare &&
          chance(config_.confirm_prob)) {
        const Item& it = last_informed.front();
        turn.agent = "you would like " + it.value + " for the " + it.slot + " , right ?";
      } else if (next < items.size()) {
        turn.agent = "what " + items[next].slot + " would you like for the " +
                     items[next].domain + " ?";
      } else {
        turn.agent = "is there anything else i can help with ?";
      }
    }
    last_informed.clear();
    std::vector<std::string> parts;
    const size_t remaining_turns = n_turns - t;
    const size_t remaining_items = items.size() - next;
    const bool must_inform = remaining_items > 2 * (remaining_turns - 1);
    if (next < items.size() && (must_inform || !chance(config_.chatter_prob))) {
      const size_t take = std::min(remaining_items, (remaining_items > 1 && chance(0.4)) ? 2UL : 1UL);
      for (size_t k = 0; k < take; ++k, ++next) {
        parts.push_back(inform(items[next]));
        last_informed.push_back(items[next]);
        state[{items[next].domain, items[next].slot}] = items[next].value;
      }
    } else if (!state.empty() && chance(config_.change_prob)) {
      // Revise an earlier value-mode answer.
      std::vector<std::pair<std::string, std::string>> keys;
      for (const auto& [k, v] : state) {
        const SlotSpec* s = ont.find_slot(k.first, k.second);
        if (s->mode == SlotMode::Value && s->values.size() > 1 && v != kDontCare) keys.push_back(k);
      }
      if (!keys.empty()) {
        const auto key = pick(keys);
        const SlotSpec* s = ont.find_slot(key.first, key.second);
        std::string v = state[key];
        while (v == state[key]) v = pick(s->values);
        state[key] = v;
        parts.push_back("actually , i would prefer " + v + " for the " + key.second +
                        " instead .");
        last_informed.push_back({key.first, key.second, v});
      }
    }
    turn.user = parts.empty() ? chatter() : join(parts, " and ");
    for (const auto& [k, v] : state) turn.state.push_back({k.first, k.second, v});
    dlg.turns.push_back(std::move(turn));
  }
  return dlg;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (ontology.domains().empty()) throw ValidationError("synthetic config needs a domain");
  for (const auto& d : ontology.domains()) {
    if (d.slots.empty()) throw ValidationError("domain " + d.name + " has no slots");
    for (const auto& s : d.slots)
      if (s.mode == SlotMode::Value && s.values.size() < 2)
        throw ValidationError("slot " + d.name + "/" + s.name + " needs at least two values");
  }
  if (min_turns == 0 || min_turns > max_turns)
    throw ValidationError("turn range must satisfy 1 <= min_turns <= max_turns");
  for (double p : {multi_domain_prob, dont_care_prob, change_prob, chatter_prob, confirm_prob,
                   null_dialogue_prob})
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probabilities must lie in [0, 1]");
}

SyntheticConfig SyntheticConfig::from_json_text(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw SchemaError("byte " + std::to_string(e.byte), e.what());
  }
  if (!doc.is_object() || !doc.contains("domains"))
    throw SchemaError("/", "missing top-level key 'domains'");
  SyntheticConfig c;
  c.ontology = Ontology::from_json_text(ojson{{"domains", doc["domains"]}}.dump());
  for (const auto& [key, v] : doc.items()) {
    if (key == "domains") continue;
    if (size_t* f = count_field(c, key)) {
      if (!v.is_number_unsigned()) throw SchemaError(key, "expected a non-negative integer");
      *f = v.get<size_t>();
    } else if (double* p = prob_field(c, key)) {
      if (!v.is_number()) throw SchemaError(key, "expected a number");
      *p = v.get<double>();
    } else {
      throw SchemaError(key, "unknown synthetic config key");
    }
  }
  c.validate();
  return c;
}

std::string SyntheticConfig::to_json_text() const {
  ojson doc = ojson::parse(ontology.to_json_text());
  SyntheticConfig copy = *this;
  for (const char* k : kCountKeys) doc[k] = *count_field(copy, k);
  for (const char* k : kProbKeys) doc[k] = *prob_field(copy, k);
  return doc.dump(2);
}

SyntheticConfig SyntheticConfig::two_domain_default() {
  SyntheticConfig c;
  c.ontology = Ontology({
      {"restaurant",
       {{"food",
         SlotMode::Value,
         {"italian", "chinese", "indian", "french", "thai", "greek", "korean", "mexican",
          "spanish", "japanese", "british", "vietnamese"}},
        {"price range", SlotMode::Value, {"cheap", "moderate", "expensive"}}}},
      {"taxi",
       {{"destination",
         SlotMode::Value,
         {"city centre", "train station", "museum of art", "the airport", "grand hotel",
          "riverside park", "science park", "botanic garden"}},
        {"leave at", SlotMode::Span, {}}}},
  });
  return c;
}

SyntheticConfig load_synthetic_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return SyntheticConfig::from_json_text(buf.str());
}

std::pair<Corpus, Ontology> generate_synthetic(const SyntheticConfig& config,
                                               std::uint64_t seed) {
  config.validate();
  Generator gen(config, seed);
  Corpus corpus;
  auto fill = [&](Split split, size_t n) {
    auto& out = corpus.split(split);
    char buf[32];
    for (size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), "%04zu", i);
      out.push_back(gen.dialogue("syn-" + std::string(to_string(split)) + "-" + buf));
    }
  };
  fill(Split::Train, config.train_dialogues);
  fill(Split::Dev, config.dev_dialogues);
  fill(Split::Test, config.test_dialogues);
  corpus.vocabulary = build_vocabulary(corpus.train, config.ontology);
  return {std::move(corpus), config.ontology};
}

}  // namespace dstqa
