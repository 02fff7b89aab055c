#include "dstqa/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "dstqa/checkpoint.hpp"
#include "dstqa/corpus.hpp"
#include "dstqa/errors.hpp"
#include "dstqa/evaluation.hpp"
#include "dstqa/multiwoz.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/synthetic.hpp"
#include "dstqa/trainer.hpp"

namespace dstqa {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Flags {
  std::string config, raw, ontology, out, checkpoint, input, domain, mode = "finetune",
      predictions, split = "test";
  double fraction = 0.1;
  std::uint64_t seed = 1;
  bool interactive = false;
  bool extend_values = false;
  std::map<std::string, std::string> overrides;
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream o(path, std::ios::binary);
  if (!o) throw IoError("cannot write " + path.string());
  o << text;
}

void add_config_overrides(CLI::App* cmd, Flags& f) {
  for (const auto& key : TrainConfig::keys()) {
    std::string names = "--" + key;
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    if (dashed != key) names += ",--" + dashed;
    cmd->add_option_function<std::string>(
        names, [&f, key](const std::string& v) { f.overrides[key] = v; },
        "Override config key " + key);
  }
}

TrainConfig resolve_config(const Flags& f) {
  TrainConfig c = f.config.empty() ? TrainConfig{} : load_train_config(f.config);
  for (const auto& [k, v] : f.overrides) c.set(k, v);
  c.validate();
  return c;
}

std::vector<Dialogue> load_input(const fs::path& input, const Ontology& ontology,
                                 const std::string& split) {
  if (!fs::is_directory(input)) return load_dialogues(input);
  Corpus c = load_corpus(input, ontology);
  if (split == "train") return c.train;
  if (split == "dev") return c.dev;
  if (split == "test") return c.test;
  throw ValidationError("split must be train, dev or test");
}

std::string state_json(const DialogueState& state) {
  json a = json::array();
  for (const auto& t : state) a.push_back({t.domain, t.slot, t.value});
  return a.dump();
}

int cmd_preprocess(const Flags& f, std::ostream& out) {
  const Ontology ontology = load_ontology(f.ontology);
  IngestOptions options;
  options.extend_values = f.extend_values;
  IngestResult r = ingest_multiwoz(f.raw, ontology, options);
  // Label misses are counted while building examples.
  const auto questions = build_questions(r.ontology);
  SuffixLemmatizer lemmatizer;
  ExactMatcher matcher(r.ontology, lemmatizer);
  for (Split s : {Split::Train, Split::Dev, Split::Test})
    for (const auto& d : r.corpus.split(s))
      build_turn_examples(d, r.ontology, questions, matcher, {}, &r.report);
  save_corpus(r.corpus, f.out);
  save_ontology(r.ontology, fs::path(f.out) / "ontology.json");
  const std::string report = r.report.to_json_text();
  write_text(fs::path(f.out) / "report.json", report);
  out << report;
  return kExitOk;
}

int cmd_gen_synthetic(const Flags& f, std::ostream& out) {
  const SyntheticConfig sc =
      f.config.empty() ? SyntheticConfig::two_domain_default() : load_synthetic_config(f.config);
  auto [corpus, ontology] = generate_synthetic(sc, f.seed);
  save_corpus(corpus, f.out);
  save_ontology(ontology, fs::path(f.out) / "ontology.json");
  write_text(fs::path(f.out) / "synthetic_config.json", sc.to_json_text());
  out << json{{"train", corpus.train.size()}, {"dev", corpus.dev.size()},
              {"test", corpus.test.size()}, {"seed", f.seed}}
             .dump()
      << "\n";
  return kExitOk;
}

int cmd_train(const Flags& f, std::ostream& out) {
  const TrainConfig config = resolve_config(f);
  const Ontology ontology = load_ontology(f.ontology);
  const Corpus corpus = load_corpus(f.input, ontology);
  fs::create_directories(f.out);
  std::ofstream log(fs::path(f.out) / "train_log.jsonl");
  TrainOptions options;
  options.log = &log;
  options.divergence_dump = fs::path(f.out) / "divergence.json";
  TrainResult r = train(config, corpus, ontology, options);
  json metrics;
  metrics["best_epoch"] = r.best_epoch;
  metrics["best_dev_joint"] = r.best_dev_joint;
  metrics["epochs_run"] = r.history.size();
  metrics["graph"] = config.graph ? "on" : "off";
  save_checkpoint(*r.model, r.config, f.out, metrics.dump());
  out << metrics.dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  EvalReport report;
  if (!f.predictions.empty()) {
    if (f.ontology.empty()) throw CLI::RequiredError("--ontology");
    const Ontology ontology = load_ontology(f.ontology);
    const auto gold = load_input(f.input, ontology, f.split);
    const auto pred_dialogues = load_dialogues(f.predictions);
    if (pred_dialogues.size() != gold.size())
      throw AlignmentError("predictions hold " + std::to_string(pred_dialogues.size()) +
                           " dialogues, gold " + std::to_string(gold.size()));
    const auto predicted = gold_states(pred_dialogues);
    if (f.domain.empty()) {
      report = score_states(predicted, gold, ontology, ontology.pairs());
    } else {
      const auto s = per_domain_score(predicted, gold, ontology, f.domain);
      report.joint = s.joint;
      report.slot = s.slot;
      report.turns = s.turns;
      report.dialogues = s.dialogues;
      report.per_domain[f.domain] = s;
      report.set_metadata("domain", f.domain);
    }
    report.set_metadata("source", "predictions");
  } else {
    if (f.checkpoint.empty()) throw CLI::RequiredError("--checkpoint or --predictions");
    std::optional<Ontology> expected;
    if (!f.ontology.empty()) expected = load_ontology(f.ontology);
    LoadedCheckpoint ck = load_checkpoint(f.checkpoint, expected ? &*expected : nullptr);
    const auto dialogues = load_input(f.input, ck.model->ontology(), f.split);
    report = f.domain.empty() ? evaluate_model(*ck.model, dialogues)
                              : per_domain_eval(dialogues, *ck.model, f.domain);
    report.config_json = ck.config.to_json_text();
    report.set_metadata("split", f.split);
  }
  const std::string text = report.to_json_text();
  if (!f.out.empty()) write_text(f.out, text);
  out << text;
  return kExitOk;
}

int cmd_expand(const Flags& f, std::ostream& out) {
  const TrainConfig config = resolve_config(f);
  const Ontology ontology = load_ontology(f.ontology);
  const Corpus corpus = load_corpus(f.input, ontology);
  EvalReport r = domain_expansion_run(corpus, ontology, f.domain, f.fraction,
                                      parse_expansion_mode(f.mode), config);
  const std::string text = r.to_json_text();
  if (!f.out.empty()) write_text(f.out, text);
  out << text;
  return kExitOk;
}

int cmd_predict(const Flags& f, std::istream& in, std::ostream& out) {
  std::optional<Ontology> expected;
  if (!f.ontology.empty()) expected = load_ontology(f.ontology);
  LoadedCheckpoint ck = load_checkpoint(f.checkpoint, expected ? &*expected : nullptr);
  if (f.interactive) {
    Tracker tracker(*ck.model);
    std::string line, agent;
    bool expect_agent = true;
    while (std::getline(in, line)) {
      if (line == ":quit") break;
      if (line == ":reset") {
        tracker.reset();
        expect_agent = true;
        out << "[]\n" << std::flush;
        continue;
      }
      if (expect_agent) {
        agent = line;
        expect_agent = false;
        continue;
      }
      expect_agent = true;
      out << state_json(tracker.add_turn(agent, line)) << "\n" << std::flush;
    }
    return kExitOk;
  }
  if (f.input.empty()) throw CLI::RequiredError("--input or --interactive");
  std::vector<Dialogue> dialogues = load_dialogues(f.input);
  for (auto& d : dialogues) {
    const auto states = predict_dialogue(*ck.model, d);
    for (size_t t = 0; t < d.turns.size(); ++t) d.turns[t].state = states[t];
  }
  const std::string text = dialogues_to_json_text(dialogues);
  if (!f.out.empty())
    write_text(f.out, text);
  else
    out << text;
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Multi-domain dialogue state tracking as question answering"};
  app.name("dstqa");
  app.require_subcommand(1, 1);
  Flags f;

  auto* pre = app.add_subcommand("preprocess", "Ingest a MultiWOZ directory");
  pre->add_option("--raw", f.raw, "MultiWOZ directory with data.json")->required();
  pre->add_option("--ontology", f.ontology, "Ontology JSON")->required();
  pre->add_option("--out", f.out, "Output corpus directory")->required();
  pre->add_flag("--extend-values", f.extend_values, "Add unseen train values to the ontology");

  auto* gen = app.add_subcommand("gen-synthetic", "Write the synthetic corpus");
  gen->add_option("--out", f.out, "Output corpus directory")->required();
  gen->add_option("--seed", f.seed, "Generator seed");
  gen->add_option("--config", f.config, "Synthetic generator config JSON");

  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--input,--corpus", f.input, "Corpus directory")->required();
  tr->add_option("--ontology", f.ontology, "Ontology JSON")->required();
  tr->add_option("--out", f.out, "Checkpoint directory")->required();
  tr->add_option("--config", f.config, "key = value config file");
  add_config_overrides(tr, f);

  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint or a predictions file");
  ev->add_option("--checkpoint", f.checkpoint, "Checkpoint directory");
  ev->add_option("--predictions", f.predictions, "Predicted dialogues (corpus schema)");
  ev->add_option("--input,--corpus", f.input, "Gold corpus directory or dialogue file")
      ->required();
  ev->add_option("--ontology", f.ontology, "Ontology JSON");
  ev->add_option("--split", f.split, "train, dev or test (corpus directories)");
  ev->add_option("--domain", f.domain, "Score one domain only");
  ev->add_option("--out", f.out, "Report path");

  auto* ex = app.add_subcommand("expand-domain", "Domain expansion experiment");
  ex->add_option("--input,--corpus", f.input, "Corpus directory")->required();
  ex->add_option("--ontology", f.ontology, "Ontology JSON")->required();
  ex->add_option("--domain", f.domain, "Target domain")->required();
  ex->add_option("--fraction", f.fraction, "Target-domain sample fraction");
  ex->add_option("--mode", f.mode, "scratch or finetune")->check(CLI::IsMember({"scratch", "finetune"}));
  ex->add_option("--config", f.config, "key = value config file");
  ex->add_option("--out", f.out, "Report path");
  add_config_overrides(ex, f);

  auto* pr = app.add_subcommand("predict", "Predict dialogue states");
  pr->add_option("--checkpoint", f.checkpoint, "Checkpoint directory")->required();
  pr->add_option("--input", f.input, "Dialogues file");
  pr->add_flag("--interactive", f.interactive, "Read agent/user lines from stdin");
  pr->add_option("--ontology", f.ontology, "Refuse checkpoints trained on another ontology");
  pr->add_option("--out", f.out, "Output file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "dstqa: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (pre->parsed()) return cmd_preprocess(f, out);
    if (gen->parsed()) return cmd_gen_synthetic(f, out);
    if (tr->parsed()) return cmd_train(f, out);
    if (ev->parsed()) return cmd_evaluate(f, out);
    if (ex->parsed()) return cmd_expand(f, out);
    if (pr->parsed()) return cmd_predict(f, in, out);
  } catch (const CLI::ParseError& e) {
    err << "dstqa: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "dstqa: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace dstqa
