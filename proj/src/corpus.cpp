#include "dstqa/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"
#include "json.hpp"

namespace dstqa {

using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

template <typename T>
T required(const ojson& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw SchemaError(where, std::string("missing key '") + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const ojson::exception& e) {
    throw SchemaError(where + "." + key, e.what());
  }
}

}  // namespace

DialogueState canonical_state(const DialogueState& state) {
  DialogueState out;
  out.reserve(state.size());
  for (const auto& t : state) {
    std::string v = canonical_value(t.value);
    if (v == kNotMentioned) continue;
    out.push_back({t.domain, t.slot, std::move(v)});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Dev:
      return "dev";
    case Split::Test:
      return "test";
  }
  return "?";
}

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnknownToken));
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = index_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnknown : it->second;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Vocabulary v;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    if (n < 2) {
      const std::string_view expected = n == 0 ? kPadToken : kUnknownToken;
      if (line != expected)
        throw SchemaError(path.string() + ":" + std::to_string(n + 1),
                          "expected reserved token " + std::string(expected));
    } else {
      v.add(line);
    }
    ++n;
  }
  return v;
}

Vocabulary build_vocabulary(const std::vector<Dialogue>& train, const Ontology& ontology) {
  Vocabulary v;
  auto add_text = [&](std::string_view text) {
    for (auto& tok : tokenize(text)) v.add(tok);
  };
  add_text(kNotMentioned);
  add_text(kDontCare);
  for (const auto& d : ontology.domains()) {
    add_text(d.name);
    for (const auto& s : d.slots) {
      add_text(s.name);
      for (const auto& val : s.values) add_text(val);
    }
  }
  for (const auto& dlg : train) {
    for (const auto& turn : dlg.turns) {
      add_text(turn.agent);
      add_text(turn.user);
    }
  }
  return v;
}

Vocabulary build_char_vocabulary(const Vocabulary& words) {
  std::set<char> chars;
  for (size_t i = 2; i < words.size(); ++i)
    for (char c : words.token(static_cast<int>(i))) chars.insert(c);
  Vocabulary v;
  for (char c : chars) v.add(std::string(1, c));
  return v;
}

const std::vector<Dialogue>& Corpus::split(Split s) const {
  switch (s) {
    case Split::Train:
      return train;
    case Split::Dev:
      return dev;
    case Split::Test:
      return test;
  }
  return train;
}

std::vector<Dialogue>& Corpus::split(Split s) {
  return const_cast<std::vector<Dialogue>&>(std::as_const(*this).split(s));
}

void IngestionReport::note(std::string message) {
  if (notes.size() < 50) notes.push_back(std::move(message));
}

std::string IngestionReport::to_json_text() const {
  ojson j;
  j["dialogues_kept"] = dialogues_kept;
  j["dialogues_dropped"] = dialogues_dropped;
  j["triples_kept"] = triples_kept;
  j["triples_dropped_domain"] = triples_dropped_domain;
  j["triples_dropped_unknown_slot"] = triples_dropped_unknown_slot;
  j["triples_dropped_unknown_value"] = triples_dropped_unknown_value;
  j["span_label_misses"] = span_label_misses;
  j["value_label_misses"] = value_label_misses;
  j["notes"] = notes;
  return j.dump(2);
}

void validate_dialogue(const Dialogue& dialogue, const Ontology& ontology) {
  for (size_t t = 0; t < dialogue.turns.size(); ++t) {
    for (const auto& tr : dialogue.turns[t].state) {
      if (!ontology.find_slot(tr.domain, tr.slot))
        throw ValidationError("dialogue " + dialogue.id + " turn " + std::to_string(t) +
                              " references unknown slot " + tr.domain + "/" + tr.slot);
    }
  }
}

std::vector<Dialogue> dialogues_from_json_text(std::string_view text) {
  ojson doc;
  try {
    doc = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw SchemaError("byte " + std::to_string(e.byte), e.what());
  }
  if (!doc.is_array()) throw SchemaError("/", "expected an array of dialogues");
  std::vector<Dialogue> out;
  out.reserve(doc.size());
  for (size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "[" + std::to_string(i) + "]";
    const auto& jd = doc[i];
    Dialogue d;
    d.id = required<std::string>(jd, "dialogue_id", where);
    if (!jd.contains("turns") || !jd["turns"].is_array())
      throw SchemaError(where, "missing array 'turns'");
    for (size_t t = 0; t < jd["turns"].size(); ++t) {
      const std::string twhere = where + ".turns[" + std::to_string(t) + "]";
      const auto& jt = jd["turns"][t];
      Turn turn;
      turn.agent = required<std::string>(jt, "agent", twhere);
      turn.user = required<std::string>(jt, "user", twhere);
      if (jt.contains("state")) {
        if (!jt["state"].is_array()) throw SchemaError(twhere + ".state", "expected array");
        for (const auto& js : jt["state"]) {
          turn.state.push_back({required<std::string>(js, "domain", twhere + ".state"),
                                required<std::string>(js, "slot", twhere + ".state"),
                                required<std::string>(js, "value", twhere + ".state")});
        }
      }
      d.turns.push_back(std::move(turn));
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::string dialogues_to_json_text(const std::vector<Dialogue>& dialogues) {
  ojson doc = ojson::array();
  for (const auto& d : dialogues) {
    ojson jd;
    jd["dialogue_id"] = d.id;
    jd["turns"] = ojson::array();
    for (const auto& t : d.turns) {
      ojson jt;
      jt["agent"] = t.agent;
      jt["user"] = t.user;
      jt["state"] = ojson::array();
      for (const auto& tr : t.state)
        jt["state"].push_back({{"domain", tr.domain}, {"slot", tr.slot}, {"value", tr.value}});
      jd["turns"].push_back(std::move(jt));
    }
    doc.push_back(std::move(jd));
  }
  return doc.dump(1) + "\n";
}

std::vector<Dialogue> load_dialogues(const std::filesystem::path& path) {
  try {
    return dialogues_from_json_text(read_file(path));
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + " " + e.where(), e.what());
  }
}

void save_dialogues(const std::vector<Dialogue>& dialogues, const std::filesystem::path& path) {
  write_file(path, dialogues_to_json_text(dialogues));
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_dialogues(corpus.train, dir / "train.json");
  save_dialogues(corpus.dev, dir / "dev.json");
  save_dialogues(corpus.test, dir / "test.json");
  corpus.vocabulary.save(dir / "vocab.txt");
}

Corpus load_corpus(const std::filesystem::path& dir, const Ontology& ontology) {
  Corpus c;
  for (Split s : {Split::Train, Split::Dev, Split::Test}) {
    const auto path = dir / (std::string(to_string(s)) + ".json");
    if (std::filesystem::exists(path)) c.split(s) = load_dialogues(path);
  }
  if (c.size() == 0 && !std::filesystem::exists(dir / "train.json"))
    throw IoError("no corpus files in " + dir.string());
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    for (const auto& d : c.split(s)) validate_dialogue(d, ontology);
  c.vocabulary = std::filesystem::exists(dir / "vocab.txt")
                     ? Vocabulary::load(dir / "vocab.txt")
                     : build_vocabulary(c.train, ontology);
  return c;
}

std::vector<std::pair<std::string, std::vector<std::string>>> collect_span_slot_values(
    const std::vector<Dialogue>& dialogues, const Ontology& ontology) {
  std::vector<std::pair<std::string, std::vector<std::string>>> out;
  std::vector<std::set<std::string>> seen;
  for (const auto& ref : ontology.pairs()) {
    if (ontology.find_slot(ref.domain, ref.slot)->mode != SlotMode::Span) continue;
    out.emplace_back(ref.key(), std::vector<std::string>{});
    seen.emplace_back();
  }
  for (const auto& d : dialogues) {
    for (const auto& t : d.turns) {
      for (const auto& tr : t.state) {
        const std::string key = SlotRef{tr.domain, tr.slot}.key();
        for (size_t i = 0; i < out.size(); ++i) {
          if (out[i].first != key) continue;
          const std::string v = canonical_value(tr.value);
          if (is_special_value(v)) continue;
          if (seen[i].insert(v).second) out[i].second.push_back(v);
        }
      }
    }
  }
  return out;
}

}  // namespace dstqa
