#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dstqa/corpus.hpp"
#include "dstqa/model.hpp"
#include "dstqa/ontology.hpp"
#include "dstqa/trainer.hpp"

namespace dstqa {

struct DomainScore {
  double joint = 0.0;
  double slot = 0.0;
  size_t turns = 0;
  size_t dialogues = 0;
};

struct EvalReport {
  double joint = 0.0;
  double slot = 0.0;
  size_t turns = 0;
  size_t dialogues = 0;
  std::map<std::string, DomainScore> per_domain;
  std::map<std::string, double> per_slot;  // keyed by SlotRef::key()
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<std::string> sampled_ids;
  std::string config_json;  // effective config, echoed verbatim when set

  void set_metadata(const std::string& key, const std::string& value);
  std::string to_json_text() const;
};

/// Fraction of turns whose canonical states are equal as sets.
double joint_accuracy(const std::vector<DialogueState>& predicted,
                      const std::vector<DialogueState>& gold);

/// Fraction of (turn, pair) cells where the predicted value, or "not
/// mentioned" when absent, equals the gold one. Defaults to every ontology pair.
double slot_accuracy(const std::vector<DialogueState>& predicted,
                     const std::vector<DialogueState>& gold, const Ontology& ontology);
double slot_accuracy(const std::vector<DialogueState>& predicted,
                     const std::vector<DialogueState>& gold, const std::vector<SlotRef>& pairs);

/// Keeps only triples whose (domain, slot) is in `pairs`.
DialogueState restrict_state(const DialogueState& state, const std::vector<SlotRef>& pairs);

/// True when some turn's state holds a triple of `domain`.
bool mentions_domain(const Dialogue& dialogue, const std::string& domain);

/// Scores per-dialogue predictions against gold, over `pairs`.
EvalReport score_states(const std::vector<std::vector<DialogueState>>& predicted,
                        const std::vector<Dialogue>& gold, const Ontology& ontology,
                        const std::vector<SlotRef>& pairs);

/// Gold states per dialogue (canonical).
std::vector<std::vector<DialogueState>> gold_states(const std::vector<Dialogue>& dialogues);

/// Predicts every dialogue and scores the pairs of `questions`; per_domain
/// holds per_domain_eval results for each domain of those questions.
EvalReport evaluate_model(const DstqaModel& model, const std::vector<Dialogue>& dialogues,
                          const std::vector<Question>& questions);
EvalReport evaluate_model(const DstqaModel& model, const std::vector<Dialogue>& dialogues);

/// Restricts to dialogues that mention `domain` and scores only its slots.
EvalReport per_domain_eval(const std::vector<Dialogue>& dialogues, const DstqaModel& model,
                           const std::string& domain);
/// Same filtering rule over precomputed predictions.
DomainScore per_domain_score(const std::vector<std::vector<DialogueState>>& predicted,
                             const std::vector<Dialogue>& gold, const Ontology& ontology,
                             const std::string& domain);

enum class ExpansionMode { Scratch, Finetune };
std::string_view to_string(ExpansionMode mode);
ExpansionMode parse_expansion_mode(std::string_view text);

/// Dialogue-level sample of `pool`, stratified by dialogue-length quartile.
/// Deterministic for a seed. Throws ValidationError if the sample is empty.
std::vector<Dialogue> sample_dialogues(const std::vector<Dialogue>& pool, double fraction,
                                       std::uint64_t seed);

struct ExpansionOptions {
  std::ostream* log = nullptr;
};

/// Scratch: train on the target-domain sample only. Finetune: train on the
/// dialogues that never mention the target with source-domain questions,
/// then continue on the sample with target questions. Scored on the test
/// split by per_domain_eval.
EvalReport domain_expansion_run(const Corpus& corpus, const Ontology& ontology,
                                const std::string& target_domain, double fraction,
                                ExpansionMode mode, const TrainConfig& config,
                                const ExpansionOptions& options = {});

}  // namespace dstqa
