#include "dstqa/encoding.hpp"

#include <fstream>
#include <sstream>

#include "dstqa/digest.hpp"
#include "dstqa/errors.hpp"
#include "dstqa/text.hpp"

namespace dstqa {

std::string_view to_string(EmbeddingProvider provider) {
  return provider == EmbeddingProvider::StaticTrainable ? "static" : "pretrained";
}

EmbeddingProvider parse_embedding_provider(std::string_view text) {
  if (text == "static") return EmbeddingProvider::StaticTrainable;
  if (text == "pretrained") return EmbeddingProvider::ContextualPretrained;
  throw ValidationError("unknown embedding provider '" + std::string(text) + "'");
}

void EmbeddingConfig::validate() const {
  if (word_dim == 0 || char_dim == 0 || char_embedding_dim == 0 || char_kernel == 0 ||
      role_dim == 0)
    throw ValidationError("embedding dimensions must be positive");
  if (model_dim() % 2 != 0)
    throw ValidationError("word_dim + char_dim must be even so each GRU direction gets half");
}

Matrix fan_in_uniform(long rows, long cols, long fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1L)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

std::unordered_map<std::string, std::vector<double>> read_word_vectors(
    const std::filesystem::path& path, size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open word vectors " + path.string());
  std::unordered_map<std::string, std::vector<double>> out;
  std::string line;
  size_t line_no = 0;
  size_t dim = expected_dim;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string word;
    if (!(ss >> word)) continue;
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (line_no == 1 && v.size() == 1) continue;  // word2vec "count dim" header
    if (dim == 0) dim = v.size();
    if (v.size() != dim)
      throw SchemaError(path.string() + ":" + std::to_string(line_no),
                        "expected " + std::to_string(dim) + " components");
    out.emplace(std::move(word), std::move(v));
  }
  if (out.empty()) throw SchemaError(path.string(), "no vectors");
  return out;
}

VectorFileEmbedder::VectorFileEmbedder(const std::filesystem::path& path)
    : vectors_(read_word_vectors(path)) {
  dim_ = vectors_.begin()->second.size();
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  identity_ = "vector-file:" + path.filename().string() + ":" + sha256_hex(buf.str());
}

Matrix VectorFileEmbedder::embed(const std::vector<std::string>& tokens) const {
  Matrix out = Matrix::Zero(static_cast<long>(tokens.size()), static_cast<long>(dim_));
  for (size_t i = 0; i < tokens.size(); ++i) {
    auto it = vectors_.find(tokens[i]);
    if (it == vectors_.end()) continue;
    for (size_t c = 0; c < dim_; ++c) out(static_cast<long>(i), static_cast<long>(c)) = it->second[c];
  }
  return out;
}

Encoder::Encoder(const EmbeddingConfig& config, ParameterStore& params, const Vocabulary& words,
                 const Vocabulary& chars, size_t exact_match_width,
                 std::shared_ptr<const ContextualEmbedder> pretrained)
    : config_(config),
      params_(&params),
      words_(&words),
      chars_(&chars),
      exact_match_width_(exact_match_width),
      pretrained_(std::move(pretrained)) {
  config_.validate();
  if (config_.provider == EmbeddingProvider::ContextualPretrained) {
    if (!pretrained_) throw Error("pretrained provider selected but no embedder was supplied");
    if (pretrained_->dim() != config_.word_dim)
      throw ShapeError("pretrained embedder has dimension " + std::to_string(pretrained_->dim()) +
                       ", config expects " + std::to_string(config_.word_dim));
  }
}

void Encoder::register_parameters(ParameterStore& params, const EmbeddingConfig& config,
                                  size_t vocabulary_size, size_t char_vocabulary_size,
                                  size_t exact_match_width, std::mt19937_64& rng) {
  config.validate();
  const long wd = static_cast<long>(config.word_dim);
  const long cd = static_cast<long>(config.char_dim);
  const long ce = static_cast<long>(config.char_embedding_dim);
  const long k = static_cast<long>(config.char_kernel);
  const long rd = static_cast<long>(config.role_dim);
  const long h = static_cast<long>(config.hidden_dim());
  const long in = static_cast<long>(config.model_dim() + config.role_dim + exact_match_width);
  if (config.provider == EmbeddingProvider::StaticTrainable)
    params.add("enc.word", fan_in_uniform(static_cast<long>(vocabulary_size), wd, wd, rng));
  params.add("enc.char", fan_in_uniform(static_cast<long>(char_vocabulary_size), ce, ce, rng));
  params.add("enc.cnn_w", fan_in_uniform(k * ce, cd, k * ce, rng));
  params.add("enc.cnn_b", Matrix::Zero(1, cd));
  params.add("enc.role", fan_in_uniform(2, rd, rd, rng));
  for (const char* dir : {"fw", "bw"}) {
    const std::string p = std::string("enc.gru_") + dir;
    params.add(p + ".w", fan_in_uniform(in, 3 * h, in, rng));
    params.add(p + ".u", fan_in_uniform(h, 3 * h, h, rng));
    params.add(p + ".b", Matrix::Zero(1, 3 * h));
  }
}

std::vector<std::vector<int>> Encoder::char_ids(const std::vector<std::string>& tokens) const {
  std::vector<std::vector<int>> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    std::vector<int> ids;
    ids.reserve(tok.size());
    for (char c : tok) ids.push_back(chars_->id(std::string(1, c)));
    out.push_back(std::move(ids));
  }
  return out;
}

Var Encoder::char_cnn_embed(Tape& tape, const std::vector<std::string>& tokens) const {
  return tape.char_cnn(char_ids(tokens), params_->at("enc.char"),
                       tape.param(params_->at("enc.cnn_w")), tape.param(params_->at("enc.cnn_b")),
                       static_cast<int>(config_.char_kernel));
}

Var Encoder::word_level(Tape& tape, const std::vector<std::string>& tokens) const {
  if (config_.provider == EmbeddingProvider::ContextualPretrained)
    return tape.constant(pretrained_->embed(tokens));
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(words_->id(t));
  return tape.lookup(params_->at("enc.word"), ids);
}

Var Encoder::embed_context(Tape& tape, const std::vector<std::string>& tokens) const {
  if (tokens.empty()) throw ShapeError("embed_context: empty token list");
  const Var parts[] = {word_level(tape, tokens), char_cnn_embed(tape, tokens)};
  return tape.concat_cols(parts);
}

Var Encoder::embed_phrases(Tape& tape, const std::vector<std::string>& phrases) const {
  std::vector<std::vector<int>> groups;
  groups.reserve(phrases.size());
  std::vector<std::string> rows;
  if (config_.provider == EmbeddingProvider::StaticTrainable) {
    // Context-free provider: embed each distinct token once.
    std::unordered_map<std::string, int> index;
    for (const auto& phrase : phrases) {
      auto toks = tokenize(phrase);
      if (toks.empty()) toks.emplace_back(Vocabulary::kUnknownToken);
      std::vector<int> g;
      for (auto& t : toks) {
        auto [it, inserted] = index.emplace(t, static_cast<int>(rows.size()));
        if (inserted) rows.push_back(t);
        g.push_back(it->second);
      }
      groups.push_back(std::move(g));
    }
    return tape.gather_mean_rows(embed_context(tape, rows), groups);
  }
  std::vector<Var> word_parts;
  for (const auto& phrase : phrases) {
    auto toks = tokenize(phrase);
    if (toks.empty()) toks.emplace_back(Vocabulary::kUnknownToken);
    std::vector<int> g;
    for (auto& t : toks) {
      g.push_back(static_cast<int>(rows.size()));
      rows.push_back(t);
    }
    word_parts.push_back(tape.constant(pretrained_->embed(toks)));
    groups.push_back(std::move(g));
  }
  const Var parts[] = {tape.concat_rows(word_parts), char_cnn_embed(tape, rows)};
  return tape.gather_mean_rows(tape.concat_cols(parts), groups);
}

std::vector<QuestionEmbedding> Encoder::embed_questions(
    Tape& tape, const std::vector<Question>& questions) const {
  // One pass over every distinct phrase: domain names, slot names, candidates.
  std::vector<std::string> phrases;
  std::unordered_map<std::string, int> index;
  auto phrase_id = [&](const std::string& p) {
    auto [it, inserted] = index.emplace(p, static_cast<int>(phrases.size()));
    if (inserted) phrases.push_back(p);
    return it->second;
  };
  struct Ids {
    int domain, slot;
    std::vector<int> values;
  };
  std::vector<Ids> ids;
  for (const auto& q : questions) {
    Ids i{phrase_id(q.domain), phrase_id(q.slot), {}};
    for (const auto& c : q.candidates()) i.values.push_back(phrase_id(c));
    ids.push_back(std::move(i));
  }
  std::vector<QuestionEmbedding> out;
  if (questions.empty()) return out;
  const Var table = embed_phrases(tape, phrases);
  for (const auto& i : ids) {
    QuestionEmbedding e;
    e.domain = tape.row(table, i.domain);
    e.slot = tape.row(table, i.slot);
    e.domain_slot = tape.add(e.domain, e.slot);
    std::vector<std::vector<int>> rows;
    for (int v : i.values) rows.push_back({v});
    e.values = tape.gather_mean_rows(table, rows);
    e.question = tape.add_row(e.values, e.domain_slot);
    out.push_back(e);
  }
  return out;
}

QuestionEmbedding Encoder::embed_question(Tape& tape, const Question& question) const {
  return embed_questions(tape, {question}).front();
}

Var Encoder::encode_context(Tape& tape, Var w_c, const std::vector<Role>& roles,
                            const Matrix& exact_match, const Matrix* input_mask) const {
  const long len = tape.value(w_c).rows();
  if (tape.value(w_c).cols() != static_cast<long>(config_.model_dim()))
    throw ShapeError("encode_context: W_c has width " + std::to_string(tape.value(w_c).cols()) +
                     ", expected " + std::to_string(config_.model_dim()));
  if (static_cast<long>(roles.size()) != len || exact_match.rows() != len)
    throw ShapeError("encode_context: roles/exact-match rows do not match token count");
  if (exact_match.cols() != static_cast<long>(exact_match_width_))
    throw ShapeError("encode_context: exact-match width " + std::to_string(exact_match.cols()) +
                     ", expected " + std::to_string(exact_match_width_));
  std::vector<int> role_ids;
  role_ids.reserve(roles.size());
  for (Role r : roles) role_ids.push_back(static_cast<int>(r));
  const Var parts[] = {w_c, tape.lookup(params_->at("enc.role"), role_ids),
                       tape.constant(exact_match)};
  Var x = tape.concat_cols(parts);
  if (input_mask) x = tape.mul(x, tape.constant(*input_mask));
  auto direction = [&](const char* name, bool reverse) {
    const std::string p = std::string("enc.gru_") + name;
    return tape.gru(x, tape.param(params_->at(p + ".w")), tape.param(params_->at(p + ".u")),
                    tape.param(params_->at(p + ".b")), reverse);
  };
  const Var both[] = {direction("fw", false), direction("bw", true)};
  return tape.concat_cols(both);
}

}  // namespace dstqa
