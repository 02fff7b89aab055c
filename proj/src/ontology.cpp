#include "dstqa/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dstqa/digest.hpp"
#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"
#include "json.hpp"

namespace dstqa {

using ojson = nlohmann::ordered_json;

namespace {

const std::string& not_mentioned_str() {
  static const std::string s(kNotMentioned);
  return s;
}
const std::string& dont_care_str() {
  static const std::string s(kDontCare);
  return s;
}

size_t line_of(std::string_view text, size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

void validate_slot(const std::string& domain, SlotSpec& slot) {
  const std::string where = domain + "/" + slot.name;
  if (slot.name.empty()) throw ValidationError("empty slot name in domain " + domain);
  if (slot.mode == SlotMode::Span) {
    slot.values.clear();
    return;
  }
  if (slot.values.empty())
    throw ValidationError("slot " + where + " is value mode but has no values");
  std::unordered_set<std::string> seen;
  for (const auto& v : slot.values) {
    const std::string canon = canonical_value(v);
    if (canon.empty()) throw ValidationError("slot " + where + " has an empty value");
    if (is_special_value(canon))
      throw ValidationError("slot " + where + " lists the special value '" + v +
                            "'; specials are implicit");
    if (!seen.insert(canon).second)
      throw ValidationError("slot " + where + " has duplicate value '" + v + "'");
  }
}

}  // namespace

std::string_view to_string(SlotMode mode) {
  return mode == SlotMode::Value ? "value" : "span";
}

SlotMode parse_slot_mode(std::string_view text) {
  if (text == "value") return SlotMode::Value;
  if (text == "span") return SlotMode::Span;
  throw ValidationError("unknown slot mode '" + std::string(text) + "'");
}

Ontology::Ontology(std::vector<DomainSpec> domains) : domains_(std::move(domains)) {
  std::unordered_set<std::string> domain_names;
  for (auto& d : domains_) {
    if (d.name.empty()) throw ValidationError("empty domain name");
    if (!domain_names.insert(d.name).second)
      throw ValidationError("duplicate domain '" + d.name + "'");
    std::unordered_set<std::string> slot_names;
    for (auto& s : d.slots) {
      validate_slot(d.name, s);
      if (!slot_names.insert(s.name).second)
        throw ValidationError("duplicate slot '" + s.name + "' in domain " + d.name);
      pairs_.push_back({d.name, s.name});
    }
  }
}

Ontology Ontology::from_json_text(std::string_view text) {
  // The object model keeps one entry per key, so duplicates are caught while parsing.
  std::vector<std::set<std::string>> open_objects;
  std::vector<std::string> path;
  std::string duplicate;
  auto on_event = [&](int depth, ojson::parse_event_t event, ojson& parsed) {
    switch (event) {
      case ojson::parse_event_t::object_start:
        open_objects.emplace_back();
        break;
      case ojson::parse_event_t::object_end:
        open_objects.pop_back();
        break;
      case ojson::parse_event_t::key: {
        const auto key = parsed.get<std::string>();
        path.resize(static_cast<size_t>(std::max(depth - 1, 0)));
        path.push_back(key);
        if (!open_objects.back().insert(key).second && duplicate.empty())
          duplicate = join(path, ".");
        break;
      }
      default:
        break;
    }
    return true;
  };
  ojson doc;
  try {
    doc = ojson::parse(text, on_event);
  } catch (const ojson::parse_error& e) {
    throw SchemaError("line " + std::to_string(line_of(text, e.byte)), e.what());
  }
  if (!duplicate.empty()) throw ValidationError("duplicate name at " + duplicate);
  if (!doc.is_object() || !doc.contains("domains"))
    throw SchemaError("/", "missing top-level key 'domains'");
  const auto& domains = doc["domains"];
  if (!domains.is_object()) throw SchemaError("domains", "expected an object");

  std::vector<DomainSpec> out;
  for (const auto& [dname, slots] : domains.items()) {
    const std::string dkey = "domains." + dname;
    if (!slots.is_object()) throw SchemaError(dkey, "expected an object of slots");
    DomainSpec d{dname, {}};
    for (const auto& [sname, spec] : slots.items()) {
      const std::string skey = dkey + "." + sname;
      if (!spec.is_object()) throw SchemaError(skey, "expected a slot object");
      SlotSpec s;
      s.name = sname;
      if (!spec.contains("mode") || !spec["mode"].is_string())
        throw SchemaError(skey + ".mode", "expected \"value\" or \"span\"");
      try {
        s.mode = parse_slot_mode(spec["mode"].get<std::string>());
      } catch (const ValidationError& e) {
        throw SchemaError(skey + ".mode", e.what());
      }
      if (spec.contains("values") && !spec["values"].is_null()) {
        if (!spec["values"].is_array())
          throw SchemaError(skey + ".values", "expected an array of strings");
        for (const auto& v : spec["values"]) {
          if (!v.is_string()) throw SchemaError(skey + ".values", "expected strings");
          s.values.push_back(v.get<std::string>());
        }
      }
      d.slots.push_back(std::move(s));
    }
    out.push_back(std::move(d));
  }
  return Ontology(std::move(out));
}

std::string Ontology::to_json_text() const {
  ojson doc;
  doc["domains"] = ojson::object();
  for (const auto& d : domains_) {
    ojson slots = ojson::object();
    for (const auto& s : d.slots) {
      ojson spec;
      spec["mode"] = std::string(to_string(s.mode));
      if (s.mode == SlotMode::Value) spec["values"] = s.values;
      slots[s.name] = std::move(spec);
    }
    doc["domains"][d.name] = std::move(slots);
  }
  return doc.dump(2);
}

std::string Ontology::hash() const { return sha256_hex(to_json_text()); }

const DomainSpec* Ontology::find_domain(std::string_view domain) const {
  for (const auto& d : domains_)
    if (d.name == domain) return &d;
  return nullptr;
}

const SlotSpec* Ontology::find_slot(std::string_view domain, std::string_view slot) const {
  const DomainSpec* d = find_domain(domain);
  if (!d) return nullptr;
  for (const auto& s : d->slots)
    if (s.name == slot) return &s;
  return nullptr;
}

std::optional<size_t> Ontology::pair_index(std::string_view domain,
                                           std::string_view slot) const {
  for (size_t i = 0; i < pairs_.size(); ++i)
    if (pairs_[i].domain == domain && pairs_[i].slot == slot) return i;
  return std::nullopt;
}

const SlotSpec& Ontology::slot_at(size_t pair) const {
  return *find_slot(pairs_.at(pair).domain, pairs_.at(pair).slot);
}

Ontology Ontology::with_span_slots_as_values(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& values_by_pair)
    const {
  auto domains = domains_;
  for (auto& d : domains) {
    for (auto& s : d.slots) {
      if (s.mode != SlotMode::Span) continue;
      const std::string key = SlotRef{d.name, s.name}.key();
      auto it = std::find_if(values_by_pair.begin(), values_by_pair.end(),
                             [&](const auto& kv) { return kv.first == key; });
      if (it == values_by_pair.end() || it->second.empty())
        throw ValidationError("no values collected for span slot " + key);
      s.mode = SlotMode::Value;
      s.values = it->second;
    }
  }
  return Ontology(std::move(domains));
}

Ontology Ontology::with_extra_values(std::string_view domain, std::string_view slot,
                                     const std::vector<std::string>& new_values) const {
  auto domains = domains_;
  for (auto& d : domains) {
    if (d.name != domain) continue;
    for (auto& s : d.slots) {
      if (s.name != slot) continue;
      if (s.mode != SlotMode::Value)
        throw ModeError("cannot add values to span slot " + d.name + "/" + s.name);
      s.values.insert(s.values.end(), new_values.begin(), new_values.end());
      return Ontology(std::move(domains));
    }
  }
  throw ValidationError("unknown slot " + std::string(domain) + "/" + std::string(slot));
}

Ontology load_ontology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ontology file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return Ontology::from_json_text(text);
}

void save_ontology(const Ontology& ontology, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << ontology.to_json_text() << "\n";
}

const std::string& Question::candidate(size_t i) const {
  if (i < values.size()) return values[i];
  if (i == not_mentioned_index()) return not_mentioned_str();
  if (i == dont_care_index()) return dont_care_str();
  throw LabelError("candidate index " + std::to_string(i) + " out of range for " +
                   domain + "/" + slot);
}

std::vector<std::string> Question::candidates() const {
  std::vector<std::string> out = values;
  out.push_back(not_mentioned_str());
  out.push_back(dont_care_str());
  return out;
}

std::optional<size_t> Question::find_candidate(std::string_view value) const {
  const std::string canon = canonical_value(value);
  if (canon == kNotMentioned) return not_mentioned_index();
  if (canon == kDontCare) return dont_care_index();
  for (size_t i = 0; i < values.size(); ++i)
    if (canonical_value(values[i]) == canon) return i;
  return std::nullopt;
}

std::vector<Question> build_questions(const Ontology& ontology) {
  std::vector<Question> out;
  for (const auto& d : ontology.domains())
    for (const auto& s : d.slots)
      out.push_back({d.name, s.name, s.mode,
                     s.mode == SlotMode::Value ? s.values : std::vector<std::string>{}});
  return out;
}

Question extend_question(const Question& question,
                         const std::vector<std::string>& new_values) {
  if (question.mode != SlotMode::Value)
    throw ModeError("cannot extend span-mode question " + question.domain + "/" +
                    question.slot);
  Question out = question;
  std::unordered_set<std::string> seen;
  for (const auto& v : question.values) seen.insert(canonical_value(v));
  for (const auto& v : new_values) {
    const std::string canon = canonical_value(v);
    if (canon.empty() || is_special_value(canon) || !seen.insert(canon).second)
      throw ValidationError("value '" + v + "' already present in " + question.domain +
                            "/" + question.slot);
    out.values.push_back(v);
  }
  return out;
}

RelationshipSet derive_relationships(const Ontology& ontology) {
  struct Entry {
    SlotRef ref;
    std::set<std::string> values;
  };
  std::vector<Entry> entries;
  for (const auto& ref : ontology.pairs()) {
    const SlotSpec* s = ontology.find_slot(ref.domain, ref.slot);
    if (s->mode != SlotMode::Value) continue;
    Entry e{ref, {}};
    for (const auto& v : s->values) e.values.insert(canonical_value(v));
    entries.push_back(std::move(e));
  }
  RelationshipSet rel;
  for (size_t i = 0; i < entries.size(); ++i) {
    for (size_t j = 0; j < entries.size(); ++j) {
      if (i == j) continue;
      const auto& a = entries[i].values;
      const auto& b = entries[j].values;
      if (a == b) {
        if (i < j) rel.same_values.emplace_back(entries[i].ref, entries[j].ref);
      } else if (a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end())) {
        rel.subset_of.emplace_back(entries[i].ref, entries[j].ref);
      }
    }
  }
  return rel;
}

}  // namespace dstqa
