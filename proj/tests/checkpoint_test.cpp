#include "doctest.h"
#include "mtle/checkpoint.hpp"
#include "mtle/error.hpp"
#include "mtle/rng.hpp"
#include "mtle/trainer.hpp"
#include "test_util.hpp"

using namespace mtle;

namespace {

TrainResult trained_fixture() {
  auto raws = generate_synthetic_tasks(101, SyntheticScenario::domain, {30, 30});
  TrainConfig config;
  config.embedding_dim = 9;
  config.hidden_dim = 7;
  config.batch_size = 8;
  config.epochs = 2;
  config.seed = 13;
  return train(raws, config);
}

}  // namespace

TEST_CASE("checkpoint round trip preserves predictions bit for bit") {
  TrainResult result = trained_fixture();
  mtle_test::TempDir dir;
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(result.model, result.config, path);
  Checkpoint loaded = load_checkpoint(path);

  CHECK(loaded.model.vocab.size() == result.model.vocab.size());
  CHECK(loaded.model.registry.size() == result.model.registry.size());
  CHECK(loaded.config.seed == result.config.seed);
  CHECK(loaded.config.hidden_dim == result.config.hidden_dim);

  // prediction parity on 100 random id sequences
  Rng rng(999);
  const std::string task_id = result.model.registry.tasks()[0].id;
  for (int i = 0; i < 100; ++i) {
    std::vector<int> ids;
    int len = 1 + static_cast<int>(rng.uniform_int(12));
    for (int t = 0; t < len; ++t)
      ids.push_back(2 + static_cast<int>(rng.uniform_int(
                            static_cast<std::uint64_t>(result.model.vocab.size() - 2))));
    CHECK(result.model.predict(ids, task_id) == loaded.model.predict(ids, task_id));
  }

  // serialization itself is deterministic
  CHECK(serialize_checkpoint(result.model, result.config) ==
        serialize_checkpoint(loaded.model, loaded.config));
}

TEST_CASE("truncated checkpoints are rejected as corrupt") {
  TrainResult result = trained_fixture();
  std::string bytes = serialize_checkpoint(result.model, result.config);
  for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t{10}}) {
    try {
      deserialize_checkpoint(bytes.substr(0, keep));
      FAIL("expected CorruptCheckpoint at length ", keep);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::CorruptCheckpoint);
    }
  }
}

TEST_CASE("flipped payload bytes fail the checksum") {
  TrainResult result = trained_fixture();
  std::string bytes = serialize_checkpoint(result.model, result.config);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x40);
  try {
    deserialize_checkpoint(bytes);
    FAIL("expected CorruptCheckpoint");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptCheckpoint);
  }
}

TEST_CASE("future format versions are refused") {
  TrainResult result = trained_fixture();
  std::string bytes = serialize_checkpoint(result.model, result.config);
  bytes[8] = static_cast<char>(bytes[8] + 1);  // bump the little-endian version field
  try {
    deserialize_checkpoint(bytes);
    FAIL("expected VersionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::VersionMismatch);
  }
}

TEST_CASE("rng state survives the round trip") {
  TrainResult result = trained_fixture();
  RngStateBundle rng;
  rng.seed = 77;
  rng.words = {1, 2, 3, 4};
  Checkpoint loaded =
      deserialize_checkpoint(serialize_checkpoint(result.model, result.config, rng));
  CHECK(loaded.rng.seed == 77);
  CHECK(loaded.rng.words == std::vector<std::uint64_t>{1, 2, 3, 4});
}

TEST_CASE("crc32 matches the reference vector") {
  // standard test vector: crc32("123456789") == 0xcbf43926
  CHECK(crc32("123456789", 9) == 0xcbf43926U);
}
