#include "dstqa/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "dstqa/errors.hpp"
#include "dstqa/evaluation.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + key + "': expected a number, got '" + v + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ValidationError("config key '" + key + "': expected a non-negative integer, got '" + v +
                          "'");
  return x;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config key '" + key + "': expected on/off, got '" + v + "'");
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << x;
  return ss.str();
}

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

#define DSTQA_DOUBLE(name)                                                              \
  Field{#name, [](const TrainConfig& c) { return fmt(c.name); },                        \
        [](TrainConfig& c, const std::string& v) { c.name = parse_double(#name, v); }}
#define DSTQA_SIZE(name)                                                                \
  Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); },             \
        [](TrainConfig& c, const std::string& v) {                                      \
          c.name = static_cast<decltype(c.name)>(parse_unsigned(#name, v));             \
        }}
#define DSTQA_BOOL(name)                                                                \
  Field{#name, [](const TrainConfig& c) { return std::string(c.name ? "on" : "off"); }, \
        [](TrainConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }}
#define DSTQA_STRING(name)                                                              \
  Field{#name, [](const TrainConfig& c) { return c.name; },                             \
        [](TrainConfig& c, const std::string& v) { c.name = v; }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      DSTQA_DOUBLE(learning_rate), DSTQA_DOUBLE(dropout),     DSTQA_DOUBLE(word_dropout),
      DSTQA_STRING(provider),      DSTQA_STRING(word_vectors), DSTQA_SIZE(word_dim),
      DSTQA_SIZE(char_dim),        DSTQA_SIZE(char_embedding_dim), DSTQA_SIZE(char_kernel),
      DSTQA_SIZE(role_dim),        DSTQA_BOOL(graph),         DSTQA_BOOL(gated_graph),
      DSTQA_DOUBLE(eta),           DSTQA_STRING(span_mode),   DSTQA_SIZE(context_window),
      DSTQA_SIZE(max_span_length), DSTQA_SIZE(epochs),        DSTQA_SIZE(batch_size),
      DSTQA_SIZE(patience),        DSTQA_DOUBLE(grad_clip),   DSTQA_SIZE(seed),
  };
  return f;
}

#undef DSTQA_DOUBLE
#undef DSTQA_SIZE
#undef DSTQA_BOOL
#undef DSTQA_STRING

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ValidationError("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return k;
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  field(key).set(*this, trim(value));
}

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

void TrainConfig::validate() const {
  auto prob = [](const char* name, double p, bool allow_one) {
    if (!(p >= 0.0 && (allow_one ? p <= 1.0 : p < 1.0)))
      throw ValidationError(std::string(name) + " must lie in [0, 1" + (allow_one ? "]" : ")"));
  };
  prob("dropout", dropout, false);
  prob("word_dropout", word_dropout, true);
  prob("eta", eta, true);
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (grad_clip < 0.0) throw ValidationError("grad_clip must be non-negative");
  if (provider != "static" && provider != "pretrained")
    throw ValidationError("provider must be 'static' or 'pretrained'");
  if (span_mode != "span" && span_mode != "value")
    throw ValidationError("span_mode must be 'span' or 'value'");
  if (batch_size == 0 || max_span_length == 0 || word_dim == 0 || char_dim == 0 ||
      char_embedding_dim == 0 || char_kernel == 0 || role_dim == 0)
    throw ValidationError("sizes must be positive");
  model_config().embedding.validate();
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
  return out;
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig c;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw SchemaError("line " + std::to_string(line_no), "expected 'key = value'");
    c.set(trim(std::string_view(line).substr(0, eq)), line.substr(eq + 1));
  }
  c.validate();
  return c;
}

std::string TrainConfig::to_json_text() const {
  json j = json::object();
  for (const auto& f : fields()) j[f.key] = f.get(*this);
  return j.dump();
}

TrainConfig TrainConfig::from_json_text(std::string_view text) {
  TrainConfig c;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError("config", e.what());
  }
  if (!j.is_object()) throw SchemaError("config", "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) throw SchemaError("config." + it.key(), "expected a string");
    c.set(it.key(), it.value().get<std::string>());
  }
  c.validate();
  return c;
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.embedding.provider = parse_embedding_provider(provider);
  m.embedding.word_dim = word_dim;
  m.embedding.char_dim = char_dim;
  m.embedding.char_embedding_dim = char_embedding_dim;
  m.embedding.char_kernel = char_kernel;
  m.embedding.role_dim = role_dim;
  m.use_graph = graph;
  m.graph.gated = gated_graph;
  m.graph.eta = eta;
  m.max_span_length = max_span_length;
  m.context_window = context_window;
  m.dropout = dropout;
  return m;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return TrainConfig::from_text(buf.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string(), e.what());
  }
}

std::vector<std::string> word_dropout(const std::vector<std::string>& tokens, double p,
                                      std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("word dropout probability outside [0, 1]");
  std::vector<std::string> out = tokens;
  if (p == 0.0) return out;
  std::bernoulli_distribution drop(p);
  for (auto& t : out)
    if (drop(rng)) t = std::string(Vocabulary::kUnknownToken);
  return out;
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon) {}

void Adam::step(ParameterStore& params) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (Parameter* p : params.all()) {
    if (!p->trainable) continue;
    auto& [m, v] = moments_[p];
    if (m.size() == 0) {
      m = Matrix::Zero(p->value.rows(), p->value.cols());
      v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    m = b1_ * m + (1.0 - b1_) * p->grad;
    v = b2_ * v + (1.0 - b2_) * p->grad.cwiseProduct(p->grad);
    p->value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
  }
}

double clip_gradients(ParameterStore& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : std::as_const(params).all())
    if (p->trainable) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm)
    for (Parameter* p : params.all())
      if (p->trainable) p->grad *= max_norm / norm;
  return norm;
}

std::shared_ptr<const ContextualEmbedder> make_embedder(const TrainConfig& config) {
  if (config.provider != "pretrained" || config.word_vectors.empty()) return nullptr;
  return std::make_shared<VectorFileEmbedder>(config.word_vectors);
}

Ontology effective_ontology(const TrainConfig& config, const Ontology& ontology,
                            const std::vector<Dialogue>& train) {
  if (config.span_mode == "span") return ontology;
  return ontology.with_span_slots_as_values(collect_span_slot_values(train, ontology));
}

std::unique_ptr<DstqaModel> make_model(const TrainConfig& config, const Ontology& ontology,
                                       const Vocabulary& words,
                                       std::shared_ptr<const ContextualEmbedder> pretrained) {
  ModelConfig mc = config.model_config();
  if (mc.embedding.provider == EmbeddingProvider::ContextualPretrained) {
    if (pretrained)
      mc.embedding.word_dim = pretrained->dim();
    else
      mc.embedding.provider = EmbeddingProvider::StaticTrainable;  // no weights available
  }
  return std::make_unique<DstqaModel>(mc, ontology, words, config.seed, std::move(pretrained));
}

std::string EpochRecord::to_json_text() const {
  json j;
  j["epoch"] = epoch;
  j["loss_v"] = loss_v;
  j["loss_st"] = loss_st;
  j["loss_span"] = loss_span;
  j["dev_joint"] = dev_joint;
  j["dev_slot"] = dev_slot;
  j["seconds"] = seconds;
  return j.dump();
}

namespace {

std::vector<Matrix> snapshot(const ParameterStore& params) {
  std::vector<Matrix> out;
  for (const Parameter* p : params.all()) out.push_back(p->value);
  return out;
}

void restore(ParameterStore& params, const std::vector<Matrix>& values) {
  auto all = params.all();
  for (size_t i = 0; i < all.size(); ++i) all[i]->value = values[i];
}

[[noreturn]] void diverged(const TrainOptions& options, size_t epoch, size_t batch,
                           const std::vector<const Dialogue*>& dialogues,
                           const LossBreakdown& losses) {
  json dump;
  dump["epoch"] = epoch;
  dump["batch"] = batch;
  dump["loss_v"] = losses.loss_v;
  dump["loss_st"] = losses.loss_st;
  dump["loss_span"] = losses.loss_span;
  json ids = json::array();
  json turns = json::array();
  for (const Dialogue* d : dialogues) {
    ids.push_back(d->id);
    for (const auto& t : d->turns) turns.push_back({{"agent", t.agent}, {"user", t.user}});
  }
  dump["dialogues"] = ids;
  dump["turns"] = turns;
  std::string where = "stderr";
  if (!options.divergence_dump.empty()) {
    std::ofstream out(options.divergence_dump);
    out << dump.dump(1) << "\n";
    where = options.divergence_dump.string();
  } else {
    std::cerr << dump.dump(1) << "\n";
  }
  throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(batch) + "; batch dumped to " + where);
}

}  // namespace

TrainResult train(const TrainConfig& config_in, const Corpus& corpus, const Ontology& ontology,
                  const TrainOptions& options) {
  config_in.validate();
  TrainResult result;
  result.config = config_in;
  const TrainConfig& config = result.config;
  if (corpus.train.empty()) throw ValidationError("training split is empty");

  std::shared_ptr<const ContextualEmbedder> pretrained =
      options.init_from ? options.init_from->pretrained() : make_embedder(config);
  const Ontology model_ontology =
      options.init_from ? options.init_from->ontology()
                        : effective_ontology(config, ontology, corpus.train);
  const Vocabulary& words = options.init_from ? options.init_from->words() : corpus.vocabulary;
  result.model = make_model(config, model_ontology, words, pretrained);
  DstqaModel& model = *result.model;
  model.hooks() = options.hooks;
  if (options.init_from) {
    model.copy_parameters_from(*options.init_from);
  }
  const std::vector<Question> questions =
      options.domains.empty() ? model.questions() : model.questions_for(options.domains);
  if (questions.empty()) throw ValidationError("no questions to train on");

  // Examples are fixed for the whole run; word dropout is applied per pass.
  std::vector<std::vector<TurnExample>> examples;
  examples.reserve(corpus.train.size());
  for (const auto& d : corpus.train) examples.push_back(model.examples(d, questions));

  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(config.learning_rate);
  std::vector<size_t> order(corpus.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Matrix> best = snapshot(model.parameters());
  double best_score = 0.0;
  bool have_best = false;
  size_t since_best = 0;
  const size_t graph_ops_before = graph_op_counter().load();
  model.parameters().zero_grad();

  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown epoch_losses;
    size_t batches = 0;
    for (size_t b = 0; b < order.size(); b += config.batch_size) {
      LossBreakdown batch_losses;
      std::vector<const Dialogue*> batch_dialogues;
      for (size_t k = b; k < std::min(order.size(), b + config.batch_size); ++k) {
        const size_t di = order[k];
        batch_dialogues.push_back(&corpus.train[di]);
        DialogueGraph graph(questions);
        DialogueState previous;
        for (const auto& ex : examples[di]) {
          const DialogueGraph* g = nullptr;
          if (config.graph) {
            graph.update(previous);
            g = &graph;
          }
          TurnExample dropped = ex;
          dropped.tokens = word_dropout(ex.tokens, config.word_dropout, rng);
          Tape tape;
          ForwardOptions fo;
          fo.training = true;
          fo.compute_loss = true;
          fo.rng = &rng;
          auto out = model.forward(tape, dropped, questions, g, fo);
          batch_losses += out.losses;
          if (!std::isfinite(out.losses.total()))
            diverged(options, epoch, batches, batch_dialogues, batch_losses);
          if (out.loss.valid()) tape.backward(out.loss);
          previous = out.prediction.state;
        }
      }
      clip_gradients(model.parameters(), config.grad_clip);
      adam.step(model.parameters());
      model.parameters().zero_grad();
      epoch_losses += batch_losses;
      ++batches;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_v = epoch_losses.loss_v / static_cast<double>(batches);
    rec.loss_st = epoch_losses.loss_st / static_cast<double>(batches);
    rec.loss_span = epoch_losses.loss_span / static_cast<double>(batches);
    double score;
    if (!corpus.dev.empty()) {
      const EvalReport dev = evaluate_model(model, corpus.dev, questions);
      rec.dev_joint = dev.joint;
      rec.dev_slot = dev.slot;
      score = dev.joint;
    } else {
      score = -epoch_losses.total();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(rec);
    if (options.log) *options.log << rec.to_json_text() << "\n" << std::flush;

    if (!have_best || score > best_score) {
      have_best = true;
      best_score = score;
      result.best_epoch = epoch;
      result.best_dev_joint = rec.dev_joint;
      best = snapshot(model.parameters());
      since_best = 0;
    } else if (++since_best >= config.patience && config.patience > 0) {
      break;
    }
    if (options.on_epoch && !options.on_epoch(rec, model)) break;
  }
  restore(model.parameters(), best);
  result.graph_updates = graph_op_counter().load() - graph_ops_before;
  return result;
}

std::vector<DialogueState> predict_dialogue(const DstqaModel& model, const Dialogue& dialogue) {
  return states_of(model.predict_dialogue(dialogue));
}

DialogueState Tracker::add_turn(std::string agent, std::string user) {
  dialogue_.turns.push_back({std::move(agent), std::move(user), {}});
  const auto states = predict_dialogue(*model_, dialogue_);
  return states.back();
}

}  // namespace dstqa
