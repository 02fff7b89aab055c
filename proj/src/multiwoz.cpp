#include "dstqa/multiwoz.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"
#include "json.hpp"

namespace dstqa {

using ojson = nlohmann::ordered_json;

namespace {

std::unordered_set<std::string> read_id_list(const std::filesystem::path& dir,
                                             const std::string& stem) {
  for (const char* ext : {".json", ".txt"}) {
    const auto path = dir / (stem + ext);
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::unordered_set<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
      const auto toks = line.find_first_not_of(" \t\r");
      if (toks == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      ids.insert(line.substr(toks, last - toks + 1));
    }
    return ids;
  }
  throw IoError("missing " + stem + ".json / .txt in " + dir.string());
}

}  // namespace

std::optional<std::string> multiwoz_slot_name(std::string_view domain, std::string_view section,
                                              std::string_view key) {
  (void)domain;
  if (section == "book") {
    if (key == "people") return "book people";
    if (key == "day") return "book day";
    if (key == "time") return "book time";
    if (key == "stay") return "book stay";
    return std::nullopt;  // "booked", "ticket", ...
  }
  if (key == "pricerange") return "price range";
  if (key == "leaveAt") return "leave at";
  if (key == "arriveBy") return "arrive by";
  return std::string(key);
}

IngestResult ingest_multiwoz(const std::filesystem::path& raw_dir, const Ontology& ontology,
                             const IngestOptions& options) {
  if (!std::filesystem::is_directory(raw_dir))
    throw IoError("raw MultiWOZ directory not found: " + raw_dir.string());
  const auto data_path = raw_dir / "data.json";
  std::ifstream in(data_path);
  if (!in) throw IoError("missing " + data_path.string());
  const auto dev_ids = read_id_list(raw_dir, "valListFile");
  const auto test_ids = read_id_list(raw_dir, "testListFile");

  ojson data;
  try {
    data = ojson::parse(in);
  } catch (const ojson::parse_error& e) {
    throw SchemaError(data_path.string() + " byte " + std::to_string(e.byte), e.what());
  }
  if (!data.is_object()) throw SchemaError(data_path.string(), "expected an object of dialogues");

  IngestResult result{{}, ontology, {}};
  IngestionReport& report = result.report;
  struct Pending {
    Dialogue dialogue;
    Split split;
  };
  std::vector<Pending> pending;

  for (const auto& [raw_id, raw] : data.items()) {
    std::string id = raw_id;
    if (id.size() > 5 && id.ends_with(".json")) id = id.substr(0, id.size() - 5);
    const auto& log = raw.contains("log") ? raw["log"] : ojson::array();
    std::set<std::string> touched;
    if (raw.contains("goal") && raw["goal"].is_object()) {
      for (const auto& [d, g] : raw["goal"].items())
        if (d != "message" && d != "topic" && g.is_object() && !g.empty()) touched.insert(d);
    }
    Dialogue dlg{id, {}};
    DialogueState last_state;
    for (size_t u = 0; u < log.size(); u += 2) {
      Turn turn;
      turn.user = log[u].value("text", "");
      if (u > 0) turn.agent = log[u - 1].value("text", "");
      if (u + 1 < log.size() && log[u + 1].contains("metadata") &&
          log[u + 1]["metadata"].is_object()) {
        DialogueState state;
        for (const auto& [domain, sections] : log[u + 1]["metadata"].items()) {
          for (const char* section : {"semi", "book"}) {
            if (!sections.contains(section) || !sections[section].is_object()) continue;
            for (const auto& [key, jv] : sections[section].items()) {
              if (!jv.is_string()) continue;
              const std::string value = canonical_value(jv.get<std::string>());
              if (value == kNotMentioned) continue;
              touched.insert(domain);
              if (!ontology.find_domain(domain)) {
                ++report.triples_dropped_domain;
                continue;
              }
              const auto slot = multiwoz_slot_name(domain, section, key);
              if (!slot) continue;
              if (!ontology.find_slot(domain, *slot)) {
                ++report.triples_dropped_unknown_slot;
                report.note("unknown slot " + domain + "/" + *slot + " in " + id);
                continue;
              }
              state.push_back({domain, *slot, value});
            }
          }
        }
        last_state = canonical_state(state);
      }
      turn.state = last_state;
      dlg.turns.push_back(std::move(turn));
    }
    bool keeps_domain = touched.empty();
    for (const auto& d : touched)
      if (ontology.find_domain(d)) keeps_domain = true;
    if (!keeps_domain) {
      ++report.dialogues_dropped;
      continue;
    }
    const Split split =
        dev_ids.count(raw_id) || dev_ids.count(id)
            ? Split::Dev
            : (test_ids.count(raw_id) || test_ids.count(id) ? Split::Test : Split::Train);
    pending.push_back({std::move(dlg), split});
  }

  if (options.extend_values) {
    std::vector<std::pair<SlotRef, std::vector<std::string>>> extra;
    std::set<std::pair<std::string, std::string>> added;
    for (const auto& p : pending) {
      if (p.split != Split::Train) continue;
      for (const auto& turn : p.dialogue.turns) {
        for (const auto& tr : turn.state) {
          const SlotSpec* s = result.ontology.find_slot(tr.domain, tr.slot);
          if (s->mode != SlotMode::Value || is_special_value(tr.value)) continue;
          const Question q{tr.domain, tr.slot, s->mode, s->values};
          if (q.find_candidate(tr.value)) continue;
          const SlotRef ref{tr.domain, tr.slot};
          if (!added.insert({ref.key(), tr.value}).second) continue;
          auto it = std::find_if(extra.begin(), extra.end(),
                                 [&](const auto& e) { return e.first == ref; });
          if (it == extra.end()) {
            extra.push_back({ref, {}});
            it = std::prev(extra.end());
          }
          it->second.push_back(tr.value);
        }
      }
    }
    for (const auto& [ref, values] : extra)
      result.ontology = result.ontology.with_extra_values(ref.domain, ref.slot, values);
  }

  for (auto& p : pending) {
    for (auto& turn : p.dialogue.turns) {
      DialogueState kept;
      for (const auto& tr : turn.state) {
        const SlotSpec* s = result.ontology.find_slot(tr.domain, tr.slot);
        if (s->mode == SlotMode::Value && !is_special_value(tr.value)) {
          const Question q{tr.domain, tr.slot, s->mode, s->values};
          if (!q.find_candidate(tr.value)) {
            ++report.triples_dropped_unknown_value;
            report.note("value not in ontology: " + tr.domain + "/" + tr.slot + "=" + tr.value);
            continue;
          }
        }
        ++report.triples_kept;
        kept.push_back(tr);
      }
      turn.state = std::move(kept);
    }
    ++report.dialogues_kept;
    result.corpus.split(p.split).push_back(std::move(p.dialogue));
  }
  result.corpus.vocabulary = build_vocabulary(result.corpus.train, result.ontology);
  return result;
}

}  // namespace dstqa
