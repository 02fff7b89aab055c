#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dstqa/encoding.hpp"
#include "dstqa/errors.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dstqa;
namespace fs = std::filesystem;

namespace {

struct Rig {
  EmbeddingConfig config;
  Vocabulary words;
  Vocabulary chars;
  ParameterStore params;
  std::unique_ptr<Encoder> encoder;

  explicit Rig(EmbeddingConfig c, std::shared_ptr<const ContextualEmbedder> pretrained = nullptr,
               std::uint64_t seed = 3)
      : config(c) {
    words = build_vocabulary({fixtures::tiny_dialogue()}, fixtures::tiny_ontology());
    chars = build_char_vocabulary(words);
    std::mt19937_64 rng(seed);
    Encoder::register_parameters(params, config, words.size(), chars.size(), 6, rng);
    encoder = std::make_unique<Encoder>(config, params, words, chars, 6, pretrained);
  }
};

EmbeddingConfig small() {
  EmbeddingConfig c;
  c.word_dim = 4;
  c.char_dim = 4;
  c.char_embedding_dim = 3;
  c.char_kernel = 3;
  c.role_dim = 4;
  return c;
}

fs::path write_vectors(size_t dim) {
  const fs::path p = fs::temp_directory_path() / ("dstqa_vectors_" + std::to_string(dim) + ".txt");
  std::ofstream out(p);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const char* w : {"i", "want", "cheap", "italian", "food", "restaurant", "price", "range"}) {
    out << w;
    for (size_t k = 0; k < dim; ++k) out << ' ' << u(rng);
    out << '\n';
  }
  return p;
}

}  // namespace

TEST(EmbeddingConfig, Widths) {
  EmbeddingConfig pretrained;
  pretrained.provider = EmbeddingProvider::ContextualPretrained;
  pretrained.word_dim = 512;
  EXPECT_EQ(pretrained.model_dim(), 612u);
  EmbeddingConfig glove;
  EXPECT_EQ(glove.model_dim(), 400u);
  EXPECT_EQ(glove.hidden_dim(), 200u);
  EmbeddingConfig odd = small();
  odd.char_dim = 3;
  EXPECT_THROW(odd.validate(), ValidationError);
}

TEST(Encoding, PretrainedContextWidth612) {
  EmbeddingConfig c;
  c.provider = EmbeddingProvider::ContextualPretrained;
  c.word_dim = 512;
  c.char_dim = 100;
  c.role_dim = 8;
  auto emb = std::make_shared<VectorFileEmbedder>(write_vectors(512));
  Rig rig(c, emb);
  Tape tape(false);
  Var w = rig.encoder->embed_context(tape, {"i", "want", "cheap", "zebra"});
  EXPECT_EQ(tape.value(w).cols(), 612);
  EXPECT_EQ(tape.value(w).rows(), 4);
  EXPECT_EQ(rig.params.find("enc.word"), nullptr);
  // Unknown words map to zeros in the word-level part.
  EXPECT_EQ(tape.value(w).row(3).head(512).cwiseAbs().sum(), 0.0);
}

TEST(Encoding, StaticContextWidth400) {
  EmbeddingConfig c;
  c.role_dim = 8;
  Rig rig(c);
  Tape tape(false);
  EXPECT_EQ(tape.value(rig.encoder->embed_context(tape, {"cheap", "food"})).cols(), 400);
}

TEST(Encoding, WrongPretrainedDimRejected) {
  EmbeddingConfig c = small();
  c.provider = EmbeddingProvider::ContextualPretrained;
  auto emb = std::make_shared<VectorFileEmbedder>(write_vectors(6));
  EXPECT_THROW(Rig(c, emb), Error);
}

TEST(CharCnn, IdenticalTokensIdenticalRowsAndOracle) {
  Rig rig(small());
  Tape tape(false);
  const Matrix m = tape.value(rig.encoder->char_cnn_embed(tape, {"abc", "x", "abc"}));
  EXPECT_EQ(m.row(0), m.row(2));
  EXPECT_TRUE(m.row(1).allFinite());
  const auto ids = rig.encoder->char_ids({"abc"});
  const auto o = oracle::char_cnn(ids[0], rig.params.at("enc.char").value, rig.params.at("enc.cnn_w").value,
                                  oracle::row(rig.params.at("enc.cnn_b").value, 0), 3);
  EXPECT_LT(oracle::max_abs_diff(oracle::row(m, 0), o), 1e-12);
}

TEST(EmbedContext, UnknownTokenAndDeterminism) {
  Rig rig(small());
  Tape tape(false);
  const Matrix a = tape.value(rig.encoder->embed_context(tape, {"cheap", "qwertyuiop"}));
  const Matrix b = tape.value(rig.encoder->embed_context(tape, {"cheap", "qwertyuiop"}));
  EXPECT_EQ(a, b);
  const Matrix unk = rig.params.at("enc.word").value.row(Vocabulary::kUnknown);
  EXPECT_EQ(Matrix(a.row(1).head(4)), unk);
  const Matrix cnn = tape.value(rig.encoder->char_cnn_embed(tape, {"qwertyuiop"}));
  EXPECT_EQ(Matrix(a.row(1).tail(4)), cnn);
}

TEST(EmbedQuestion, MeanPoolingAndRowIdentity) {
  Rig rig(small());
  const auto qs = build_questions(fixtures::tiny_ontology());
  Tape tape(false);
  const auto e = rig.encoder->embed_question(tape, qs[1]);  // restaurant / price range
  const Matrix price = tape.value(rig.encoder->embed_context(tape, {"price"}));
  const Matrix range = tape.value(rig.encoder->embed_context(tape, {"range"}));
  const Matrix restaurant = tape.value(rig.encoder->embed_context(tape, {"restaurant"}));
  EXPECT_LT((tape.value(e.slot) - (price + range) / 2.0).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((tape.value(e.domain) - restaurant).cwiseAbs().maxCoeff(), 1e-12);
  const Matrix diff = tape.value(e.question) - tape.value(e.values);
  const Matrix ds = tape.value(e.domain_slot);
  for (long j = 0; j < diff.rows(); ++j) EXPECT_LT((diff.row(j) - ds.row(0)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(tape.value(e.values).rows(), 5);
  const auto span = rig.encoder->embed_question(tape, qs[2]);
  EXPECT_EQ(tape.value(span.values).rows(), 2);
}

TEST(EncodeContext, ShapesAndErrors) {
  Rig rig(small());
  Tape tape(false);
  Var w = rig.encoder->embed_context(tape, {"cheap"});
  Var e = rig.encoder->encode_context(tape, w, {Role::User}, Matrix::Zero(1, 6));
  EXPECT_EQ(tape.value(e).rows(), 1);
  EXPECT_EQ(tape.value(e).cols(), 8);
  EXPECT_THROW(rig.encoder->encode_context(tape, w, {Role::User, Role::Agent}, Matrix::Zero(1, 6)), ShapeError);
  EXPECT_THROW(rig.encoder->encode_context(tape, w, {Role::User}, Matrix::Zero(1, 5)), ShapeError);
}

TEST(EncodeContext, RoleFlipChangesOutput) {
  Rig rig(small());
  Tape tape(false);
  const std::vector<std::string> toks = {"i", "want", "cheap", "food"};
  Var w = rig.encoder->embed_context(tape, toks);
  std::vector<Role> roles(4, Role::User);
  const Matrix a = tape.value(rig.encoder->encode_context(tape, w, roles, Matrix::Zero(4, 6)));
  roles[1] = Role::Agent;
  const Matrix b = tape.value(rig.encoder->encode_context(tape, w, roles, Matrix::Zero(4, 6)));
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EncodeContext, BiGruReversalSymmetry) {
  Rig rig(small(), nullptr, 8);
  Rig swapped(small(), nullptr, 8);
  for (const char* part : {".w", ".u", ".b"}) {
    swapped.params.at(std::string("enc.gru_fw") + part).value = rig.params.at(std::string("enc.gru_bw") + part).value;
    swapped.params.at(std::string("enc.gru_bw") + part).value = rig.params.at(std::string("enc.gru_fw") + part).value;
  }
  std::mt19937_64 rng(2);
  const std::vector<std::string> toks = {"i", "want", "cheap", "italian", "food"};
  std::vector<Role> roles = {Role::Agent, Role::Agent, Role::User, Role::User, Role::User};
  Matrix em = Matrix::Zero(5, 6);
  em(2, 1) = 1;
  em(3, 4) = 1;
  std::vector<std::string> rt(toks.rbegin(), toks.rend());
  std::vector<Role> rr(roles.rbegin(), roles.rend());
  Matrix rem = em.colwise().reverse();
  Tape tape(false);
  const Matrix e = tape.value(rig.encoder->encode_context(tape, rig.encoder->embed_context(tape, toks), roles, em));
  const Matrix r = tape.value(swapped.encoder->encode_context(tape, swapped.encoder->embed_context(tape, rt), rr, rem));
  Matrix back(5, 8);
  for (long i = 0; i < 5; ++i) {
    back.row(i).head(4) = r.row(4 - i).tail(4);
    back.row(i).tail(4) = r.row(4 - i).head(4);
  }
  EXPECT_LT((back - e).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EncodeContext, GradientsStaticProvider) {
  Rig rig(small());
  const std::vector<std::string> toks = {"i", "want", "cheap", "food"};
  const std::vector<Role> roles = {Role::User, Role::User, Role::User, Role::User};
  std::mt19937_64 rng(4);
  const Matrix r = oracle::random_matrix(4, 8, rng);
  auto loss = [&](bool record) {
    Tape t(record);
    Var e = rig.encoder->encode_context(t, rig.encoder->embed_context(t, toks), roles, Matrix::Zero(4, 6));
    Var s = t.matmul(t.matmul(t.constant(Matrix::Ones(1, 4)), t.mul(e, t.constant(r))), t.constant(Matrix::Ones(8, 1)));
    if (record) t.backward(s);
    return t.value(s)(0, 0);
  };
  for (const auto& g : fixtures::check_gradients(rig.params, loss, 60))
    EXPECT_LT(g.max_rel_error, 1e-4) << g.name;
}

TEST(EncodeContext, PretrainedWordsGetNoGradient) {
  EmbeddingConfig c = small();
  c.provider = EmbeddingProvider::ContextualPretrained;
  auto emb = std::make_shared<VectorFileEmbedder>(write_vectors(4));
  Rig rig(c, emb);
  Tape t(true);
  Var w = rig.encoder->embed_context(t, {"i", "want", "food"});
  Var e = rig.encoder->encode_context(t, w, {Role::User, Role::User, Role::User}, Matrix::Zero(3, 6));
  Var s = t.matmul(t.matmul(t.constant(Matrix::Ones(1, 3)), e), t.constant(Matrix::Ones(8, 1)));
  t.backward(s);
  EXPECT_EQ(rig.params.find("enc.word"), nullptr);
  // The frozen word block is a constant node: its gradient is never accumulated into a parameter.
  double total = 0;
  for (auto* p : rig.params.all()) total += p->grad.cwiseAbs().sum();
  EXPECT_GT(total, 0.0);
  EXPECT_EQ(emb->identity().rfind("vector-file:", 0), 0u);
}

TEST(WordVectors, ReadsTextFormatAndSkipsHeader) {
  const fs::path p = fs::temp_directory_path() / "dstqa_w2v.txt";
  {
    std::ofstream out(p);
    out << "2 3\nfoo 1 2 3\nbar 4 5 6\n";
  }
  const auto v = read_word_vectors(p, 3);
  EXPECT_EQ(v.size(), 2u);
  EXPECT_EQ(v.at("bar")[2], 6.0);
  EXPECT_THROW(read_word_vectors(p, 4), Error);
}
