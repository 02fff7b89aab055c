#include "dstqa/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dstqa/digest.hpp"
#include "dstqa/errors.hpp"

namespace dstqa {

namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'D', 'S', 'T', 'Q', 'A', 'P', 'B', '1'};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << data;
  if (!out) throw IoError("write failed for " + path.string());
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("params.bin is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::string serialize(const ParameterStore& params) {
  std::string out(kMagic, sizeof(kMagic));
  const auto all = params.all();
  put<std::uint64_t>(out, all.size());
  for (const Parameter* p : all) {
    put<std::uint64_t>(out, p->name.size());
    out += p->name;
    put<std::int64_t>(out, p->value.rows());
    put<std::int64_t>(out, p->value.cols());
    out.append(reinterpret_cast<const char*>(p->value.data()),
               static_cast<size_t>(p->value.size()) * sizeof(double));
  }
  return out;
}

void deserialize(ParameterStore& params, const std::string& in) {
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError("params.bin has an unknown format");
  size_t pos = sizeof(kMagic);
  const auto count = take<std::uint64_t>(in, pos);
  if (count != params.all().size())
    throw CheckpointError("params.bin holds " + std::to_string(count) + " parameters, model has " +
                          std::to_string(params.all().size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = take<std::uint64_t>(in, pos);
    if (pos + len > in.size()) throw CheckpointError("params.bin is truncated");
    const std::string name = in.substr(pos, len);
    pos += len;
    const auto rows = take<std::int64_t>(in, pos);
    const auto cols = take<std::int64_t>(in, pos);
    Parameter* p = params.find(name);
    if (!p) throw CheckpointError("params.bin has unknown parameter '" + name + "'");
    if (p->value.rows() != rows || p->value.cols() != cols)
      throw CheckpointError("parameter '" + name + "' has shape " + std::to_string(rows) + "x" +
                            std::to_string(cols) + ", model expects " +
                            std::to_string(p->value.rows()) + "x" +
                            std::to_string(p->value.cols()));
    const size_t bytes = static_cast<size_t>(rows * cols) * sizeof(double);
    if (pos + bytes > in.size()) throw CheckpointError("params.bin is truncated");
    std::memcpy(p->value.data(), in.data() + pos, bytes);
    pos += bytes;
  }
  if (pos != in.size()) throw CheckpointError("params.bin has trailing bytes");
}

}  // namespace

void write_parameters(const ParameterStore& params, const std::filesystem::path& path) {
  write_file(path, serialize(params));
}

void read_parameters(ParameterStore& params, const std::filesystem::path& path) {
  deserialize(params, read_file(path));
}

void save_checkpoint(const DstqaModel& model, const TrainConfig& config,
                     const std::filesystem::path& dir, const std::string& metrics_json) {
  std::filesystem::create_directories(dir);
  const std::string blob = serialize(model.parameters());
  write_file(dir / "params.bin", blob);
  model.words().save(dir / "vocab.txt");
  model.chars().save(dir / "chars.txt");
  json m;
  m["format_version"] = kCheckpointFormatVersion;
  m["config"] = json::parse(config.to_json_text());
  m["ontology_hash"] = model.ontology().hash();
  m["ontology"] = json::parse(model.ontology().to_json_text());
  const auto& ec = model.config().embedding;
  m["provider"] = {{"name", std::string(to_string(ec.provider))},
                   {"identity", model.pretrained() ? model.pretrained()->identity() : "trainable"},
                   {"word_dim", ec.word_dim},
                   {"char_dim", ec.char_dim}};
  m["metrics"] = json::parse(metrics_json);
  m["params_sha256"] = sha256_hex(blob);
  m["vocabulary_files"] = {"vocab.txt", "chars.txt"};
  write_file(dir / "manifest.json", m.dump(1) + "\n");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const Ontology* expected) {
  json m;
  try {
    m = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw CheckpointError("manifest.json is not valid JSON: " + std::string(e.what()));
  }
  try {
    if (m.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw CheckpointError("unsupported checkpoint format " + m.at("format_version").dump());
    LoadedCheckpoint out;
    out.config = TrainConfig::from_json_text(m.at("config").dump());
    const Ontology ontology = Ontology::from_json_text(m.at("ontology").dump());
    out.ontology_hash = m.at("ontology_hash").get<std::string>();
    if (ontology.hash() != out.ontology_hash)
      throw CheckpointError("embedded ontology does not match the recorded hash");
    if (expected && expected->hash() != out.ontology_hash)
      throw CheckpointError("ontology mismatch: checkpoint was trained on ontology " +
                            out.ontology_hash.substr(0, 12) + ", given " +
                            expected->hash().substr(0, 12));
    const std::string blob = read_file(dir / "params.bin");
    if (sha256_hex(blob) != m.at("params_sha256").get<std::string>())
      throw CheckpointError("params.bin does not match the manifest hash");
    out.provider_identity = m.at("provider").at("identity").get<std::string>();
    auto pretrained = make_embedder(out.config);
    if (pretrained && pretrained->identity() != out.provider_identity)
      throw CheckpointError("pretrained embeddings differ from the ones used in training");
    Vocabulary words = Vocabulary::load(dir / "vocab.txt");
    out.model = make_model(out.config, ontology, words, pretrained);
    if (out.model->chars().tokens() != Vocabulary::load(dir / "chars.txt").tokens())
      throw CheckpointError("chars.txt does not match the word vocabulary");
    deserialize(out.model->parameters(), blob);
    out.metrics_json = m.at("metrics").dump();
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError("manifest.json is missing fields: " + std::string(e.what()));
  }
}

}  // namespace dstqa
