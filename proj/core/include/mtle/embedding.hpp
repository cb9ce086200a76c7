#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mtle/tensor.hpp"

namespace mtle {

class Rng;
class Vocabulary;

enum class TableRole { input, label };

// |V| x d lookup table. The PAD row is pinned to zero and never receives
// gradient updates.
struct EmbeddingTable {
  TableRole role = TableRole::input;
  ParamTensor weights;

  EmbeddingTable() = default;
  EmbeddingTable(TableRole table_role, int vocab_size, int dim);

  int rows() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }

  // output[t] = row ids[t]. Throws IdOutOfRange.
  std::vector<Eigen::VectorXd> lookup(const std::vector<int>& ids) const;

  // Scatter-adds one gradient per id into the referenced rows; ids appearing
  // several times accumulate. PAD rows are skipped.
  void lookup_backward(const std::vector<int>& ids, const std::vector<Eigen::VectorXd>& grads);

  // Appends rows for newly added vocabulary entries, drawn from the init
  // distribution (hot-update vocabulary growth).
  void append_rows(int count, Rng& rng, double init_std);

  void zero_pad_row();
};

// Arithmetic mean over valid positions; PAD slots are excluded from both sum
// and count. Throws EmptySequence when nothing is valid.
Eigen::VectorXd average_pool(const std::vector<Eigen::VectorXd>& vectors,
                             const std::vector<std::uint8_t>& valid);
Eigen::VectorXd average_pool(const std::vector<Eigen::VectorXd>& vectors);

struct SkipGramConfig {
  int dim = 50;
  int window = 4;
  int negatives = 5;
  int epochs = 15;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

struct SkipGramResult {
  EmbeddingTable table;
  std::vector<double> epoch_loss;  // mean negative-sampling loss per epoch
};

// Skip-gram with negative sampling over id sequences (inputs plus label
// phrases). Negatives come from the unigram distribution raised to 3/4,
// through the engine PRNG; the run is deterministic per seed.
SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpora, int vocab_size,
                              const SkipGramConfig& config);

// Textual word2vec vectors. Rows for in-vocabulary words are copied; words
// missing from the file are drawn from truncated normal(0, init_std); PAD is
// zeroed.
EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab, int dim,
                               double init_std = 0.1, std::uint64_t seed = 1);

// Writes "word v1 .. vd" lines with a "<count> <dim>" header. Specials are
// included so a written table reloads onto the same vocabulary exactly.
void save_embedding_file(const EmbeddingTable& table, const Vocabulary& vocab,
                         const std::string& path);

}  // namespace mtle
