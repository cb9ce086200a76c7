#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtle/corpus.hpp"
#include "mtle/embedding.hpp"
#include "mtle/encoder.hpp"
#include "mtle/matcher.hpp"

namespace mtle {

class Rng;

struct ModelOptions {
  int embedding_dim = 300;
  int hidden_dim = 100;
  bool tie_lookups = false;   // one shared lookup table for inputs and labels
  bool matcher_bias = true;
  LossMode loss_mode = LossMode::one_vs_rest;
  LstmOptions lstm;

  bool operator==(const ModelOptions&) const = default;
};

class TaskRegistry {
 public:
  void add(const TaskSpec& spec);
  bool contains(const std::string& task_id) const;
  const TaskSpec& at(const std::string& task_id) const;  // throws UnknownTask
  TaskSpec& at(const std::string& task_id);
  int size() const { return static_cast<int>(tasks_.size()); }
  const std::vector<TaskSpec>& tasks() const { return tasks_; }

 private:
  std::vector<TaskSpec> tasks_;  // insertion order
  std::unordered_map<std::string, int> by_id_;
};

// The full supervised network: two lookup tables, two sequence encoders and
// the matcher, plus the vocabulary and task registry they are bound to.
struct Model {
  Vocabulary vocab;
  ModelOptions options;
  EmbeddingTable lu_input;
  EmbeddingTable lu_label;  // unused storage when lookups are tied
  LstmParams lstm_input;
  LstmParams lstm_label;
  MatcherParams matcher;
  TaskRegistry registry;

  Model() = default;
  Model(Vocabulary vocabulary, ModelOptions opts);

  EmbeddingTable& label_table() { return options.tie_lookups ? lu_input : lu_label; }
  const EmbeddingTable& label_table() const { return options.tie_lookups ? lu_input : lu_label; }

  // Trainable tensors in a stable order (label table omitted when tied).
  std::vector<ParamTensor*> parameters();
  std::vector<const ParamTensor*> parameters() const;

  // Tensors subject to L2 regularization: encoder and matcher weight
  // matrices. Biases and embedding rows are exempt.
  std::vector<ParamTensor*> regularized_parameters();

  // Truncated-normal init of every trainable entry; PAD rows re-zeroed.
  void init_parameters(double init_std, Rng& rng);

  // Replaces the input-side rows (and the label side unless `input_only`)
  // with a pretrained table of matching shape.
  void set_pretrained(const EmbeddingTable& table, bool input_only = false);

  // Appends tokens to the vocabulary and grows both lookup tables; existing
  // ids and rows are untouched.
  void extend_vocabulary(const std::vector<std::string>& new_tokens, double init_std, Rng& rng);

  void zero_grads();
  void sgd_step(double learning_rate);  // bumps the parameter version

  std::uint64_t parameter_version() const { return version_; }
  void bump_version() { ++version_; }

  // --- forward paths ------------------------------------------------------

  // ids -> embedded sequence -> fixed-length representation. PAD ids are
  // masked out. Throws EmptySequence when every id is PAD.
  Eigen::VectorXd encode_input(const std::vector<int>& ids) const;

  // Label representations for a registered task, cached per parameter
  // version; any parameter update invalidates the cache.
  const std::vector<Eigen::VectorXd>& label_encodings(const std::string& task_id) const;

  std::vector<double> scores_for(const Eigen::VectorXd& x, const std::string& task_id) const;

  // Argmax label (lowest index on ties) for raw token ids under a registered
  // task.
  int predict(const std::vector<int>& ids, const std::string& task_id) const;

 private:
  std::uint64_t version_ = 0;

  struct CachedLabels {
    std::uint64_t version = ~0ULL;
    std::vector<Eigen::VectorXd> encodings;
  };
  mutable std::unordered_map<std::string, CachedLabels> label_cache_;
};

// Mask that is 0 exactly at PAD positions.
std::vector<std::uint8_t> pad_mask(const std::vector<int>& ids);

// --- training-side forward/backward over one single-task batch -------------

// Accumulates d(objective)/d(theta) into the model's gradients for
// objective = task_weight * sum_i sample_loss_i, and returns that sum term.
// The caller owns zeroing gradients and adding the regularizer.
double accumulate_batch_gradients(Model& model, const TaskSpec& task,
                                  const std::vector<Example>& batch);

// Same objective, forward only (used by the finite-difference oracle).
double batch_loss(const Model& model, const TaskSpec& task, const std::vector<Example>& batch);

}  // namespace mtle
