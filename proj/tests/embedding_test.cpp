#include <cmath>

#include "doctest.h"
#include "mtle/corpus.hpp"
#include "mtle/embedding.hpp"
#include "mtle/error.hpp"
#include "mtle/rng.hpp"
#include "test_util.hpp"

using namespace mtle;

namespace {

EmbeddingTable random_table(int rows, int dim, std::uint64_t seed) {
  EmbeddingTable table(TableRole::input, rows, dim);
  Rng rng(seed);
  table.weights.init_truncated_normal(rng, 0.5);
  table.zero_pad_row();
  return table;
}

}  // namespace

TEST_CASE("lookup returns rows; the PAD row is zero") {
  EmbeddingTable table = random_table(6, 4, 1);
  auto out = table.lookup({Vocabulary::kPadId});
  REQUIRE(out.size() == 1);
  CHECK(out[0].isZero(0.0));

  auto rows = table.lookup({3, 3});
  CHECK((rows[0] - rows[1]).norm() == 0.0);
  CHECK((rows[0] - table.weights.values.row(3).transpose()).norm() == 0.0);

  CHECK_THROWS_AS(table.lookup({6}), Error);
  CHECK_THROWS_AS(table.lookup({-1}), Error);
}

TEST_CASE("lookup backward accumulates per id and touches nothing else") {
  EmbeddingTable table = random_table(6, 3, 2);
  table.weights.zero_grad();
  Eigen::VectorXd g1(3), g2(3);
  g1 << 1.0, 2.0, 3.0;
  g2 << 0.5, 0.5, 0.5;
  table.lookup_backward({4, 4}, {g1, g2});
  CHECK((table.weights.grads.row(4).transpose() - (g1 + g2)).norm() == 0.0);
  for (int r = 0; r < 6; ++r) {
    if (r == 4) continue;
    CHECK(table.weights.grads.row(r).isZero(0.0));
  }

  // PAD rows never accumulate
  table.weights.zero_grad();
  table.lookup_backward({Vocabulary::kPadId}, {g1});
  CHECK(table.weights.grads.isZero(0.0));

  CHECK_THROWS_AS(table.lookup_backward({1, 2}, {g1}), Error);
  Eigen::VectorXd bad(2);
  bad << 1.0, 1.0;
  CHECK_THROWS_AS(table.lookup_backward({2}, {bad}), Error);
}

TEST_CASE("average pooling: identity, symmetry, masking, permutation") {
  Eigen::VectorXd v(2);
  v << 3.0, -1.0;
  CHECK((average_pool({v}) - v).norm() == 0.0);
  CHECK(average_pool({v, -v}).isZero(0.0));

  Eigen::VectorXd pad = Eigen::VectorXd::Zero(2);
  CHECK((average_pool({v, pad}, {1, 0}) - v).norm() == 0.0);

  Eigen::VectorXd a(2), b(2), c(2);
  a << 1.0, 0.0;
  b << 0.0, 2.0;
  c << -1.0, 5.0;
  Eigen::VectorXd fwd = average_pool({a, b, c});
  Eigen::VectorXd rev = average_pool({c, a, b});
  CHECK((fwd - rev).norm() < 1e-15);

  CHECK_THROWS_AS(average_pool({}), Error);
  CHECK_THROWS_AS(average_pool({v}, {0}), Error);
}

TEST_CASE("skip-gram is deterministic and epochs=0 returns the raw init") {
  std::vector<std::vector<int>> corpus = {{2, 3, 4, 2, 3}, {4, 2, 5}};
  SkipGramConfig config;
  config.dim = 8;
  config.epochs = 3;
  config.seed = 42;

  SkipGramResult a = train_skipgram(corpus, 6, config);
  SkipGramResult b = train_skipgram(corpus, 6, config);
  CHECK((a.table.weights.values - b.table.weights.values).norm() == 0.0);

  SkipGramConfig zero = config;
  zero.epochs = 0;
  SkipGramResult init_only = train_skipgram(corpus, 6, zero);
  SkipGramConfig zero2 = zero;
  SkipGramResult init_again = train_skipgram(corpus, 6, zero2);
  CHECK((init_only.table.weights.values - init_again.table.weights.values).norm() == 0.0);
  CHECK((a.table.weights.values - init_only.table.weights.values).norm() > 0.0);
  CHECK(init_only.table.weights.values.row(Vocabulary::kPadId).isZero(0.0));
}

TEST_CASE("skip-gram groups co-occurring tokens") {
  // "good" and "great" always share contexts; "bad" lives elsewhere.
  Vocabulary vocab;
  int good = vocab.add("good");
  int great = vocab.add("great");
  int bad = vocab.add("bad");
  int film = vocab.add("film");
  int story = vocab.add("story");
  int mud = vocab.add("mud");
  int rain = vocab.add("rain");

  std::vector<std::vector<int>> corpus;
  for (int i = 0; i < 120; ++i) {
    corpus.push_back({film, good, story});
    corpus.push_back({film, great, story});
    corpus.push_back({mud, bad, rain});
  }

  SkipGramConfig config;
  config.dim = 12;
  config.window = 2;
  config.epochs = 10;
  config.seed = 7;
  SkipGramResult result = train_skipgram(corpus, vocab.size(), config);

  auto cosine = [&](int u, int v) {
    Eigen::VectorXd a = result.table.weights.values.row(u).transpose();
    Eigen::VectorXd b = result.table.weights.values.row(v).transpose();
    return a.dot(b) / (a.norm() * b.norm());
  };
  CHECK(cosine(good, great) > cosine(good, bad));
}

TEST_CASE("skip-gram epoch loss trends downward") {
  std::vector<std::vector<int>> corpus;
  Rng rng(5);
  for (int i = 0; i < 40; ++i) {
    std::vector<int> seq;
    for (int t = 0; t < 8; ++t) seq.push_back(2 + static_cast<int>(rng.uniform_int(10)));
    corpus.push_back(seq);
  }
  SkipGramConfig config;
  config.dim = 10;
  config.epochs = 12;
  config.seed = 9;
  SkipGramResult result = train_skipgram(corpus, 12, config);
  REQUIRE(result.epoch_loss.size() == 12);
  // non-increasing within a 5% noise band
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e)
    CHECK(result.epoch_loss[e] <= result.epoch_loss[e - 1] * 1.05);
  CHECK(result.epoch_loss.back() < result.epoch_loss.front());
}

TEST_CASE("skip-gram rejects empty corpora") {
  SkipGramConfig config;
  CHECK_THROWS_AS(train_skipgram({}, 5, config), Error);
  CHECK_THROWS_AS(train_skipgram({{}}, 5, config), Error);
}

TEST_CASE("pretrained vectors load by word with seeded fill for the rest") {
  mtle_test::TempDir dir;
  Vocabulary vocab;
  vocab.add("good");
  vocab.add("fresh");

  const std::string path = dir.file("vec.txt");
  mtle_test::write_file(path, "2 3\ngood 0.25 -1.5 3\nunused 1 1 1\n");

  EmbeddingTable table = load_pretrained(path, vocab, 3, 0.1, 5);
  Eigen::VectorXd good = table.weights.values.row(vocab.id("good")).transpose();
  CHECK(good(0) == 0.25);
  CHECK(good(1) == -1.5);
  CHECK(good(2) == 3.0);

  // fresh word drawn from the init policy, deterministic per seed
  EmbeddingTable again = load_pretrained(path, vocab, 3, 0.1, 5);
  CHECK((table.weights.values - again.weights.values).norm() == 0.0);
  Eigen::VectorXd fresh = table.weights.values.row(vocab.id("fresh")).transpose();
  CHECK(fresh.norm() > 0.0);
  CHECK(fresh.cwiseAbs().maxCoeff() <= 0.2);
  CHECK(table.weights.values.row(Vocabulary::kPadId).isZero(0.0));
}

TEST_CASE("pretrained dimension conflicts are rejected") {
  mtle_test::TempDir dir;
  Vocabulary vocab;
  vocab.add("good");

  const std::string header_conflict = dir.file("a.txt");
  mtle_test::write_file(header_conflict, "1 50\ngood 1 2 3\n");
  CHECK_THROWS_AS(load_pretrained(header_conflict, vocab, 300), Error);

  const std::string short_row = dir.file("b.txt");
  mtle_test::write_file(short_row, "good 1 2\n");
  try {
    load_pretrained(short_row, vocab, 3);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }

  const std::string garbage = dir.file("c.txt");
  mtle_test::write_file(garbage, "good 1 abc 3\n");
  try {
    load_pretrained(garbage, vocab, 3);
    FAIL("expected MalformedVectorLine");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedVectorLine);
  }
}

TEST_CASE("embedding files round trip through save and load") {
  Vocabulary vocab;
  vocab.add("alpha");
  vocab.add("beta");
  EmbeddingTable table = random_table(vocab.size(), 5, 77);

  mtle_test::TempDir dir;
  const std::string path = dir.file("emb.txt");
  save_embedding_file(table, vocab, path);
  EmbeddingTable loaded = load_pretrained(path, vocab, 5, 0.1, 1);
  CHECK((loaded.weights.values - table.weights.values).norm() == 0.0);
}
