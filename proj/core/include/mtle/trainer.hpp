#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mtle/corpus.hpp"
#include "mtle/model.hpp"

namespace mtle {

struct TrainConfig {
  int embedding_dim = 300;      // d
  int hidden_dim = 100;         // m
  int batch_size = 32;
  double learning_rate = 0.1;   // constant by default
  double lr_decay = 0.0;        // eta / (1 + decay * epoch) when > 0
  double l2_weight = 1e-5;
  int epochs = 10;
  std::uint64_t seed = 1;
  LossMode loss_mode = LossMode::one_vs_rest;
  double init_std = 0.1;        // truncated normal, clipped at 2 sigma
  double clip_norm = 0.0;       // global gradient clip, 0 = off
  int min_count = 1;
  bool tie_lookups = false;
  bool matcher_bias = true;
  LstmOptions lstm;

  ModelOptions model_options() const;
};

struct Batch {
  std::string task_id;
  std::vector<Example> examples;
};

// One epoch's batches: every training example of every scheduled task in
// exactly one batch, batches never mixing tasks, global order shuffled.
struct BatchSchedule {
  std::vector<Batch> batches;
};

BatchSchedule make_schedule(const std::vector<TaskData>& tasks, int batch_size,
                            std::uint64_t seed, int epoch);

struct EpochMetric {
  int epoch = 0;
  std::string task_id;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;
};

std::string format_metric(const EpochMetric& metric);

// Receives each epoch metric as it is produced (line-by-line progress).
using MetricSink = std::function<void(const EpochMetric&)>;

struct EvalResult {
  double mean_loss = 0.0;
  double accuracy = 0.0;
  int count = 0;
  Eigen::MatrixXi confusion;  // rows: gold, cols: predicted
};

EvalResult evaluate(const Model& model, const TaskSpec& task, const DatasetSplit& split);

// One SGD step over a single-task batch: loss per the configured mode scaled
// by the task weight, plus the L2 penalty over encoder/matcher weight
// matrices. Returns the batch objective. Throws NonFiniteLoss naming the
// offending tensor when the step produces non-finite values.
double train_step(Model& model, const Batch& batch, const TrainConfig& config,
                  double learning_rate);

struct TrainResult {
  Model model;  // best epoch by mean test accuracy
  TrainConfig config;
  int best_epoch = 0;
  double best_mean_test_accuracy = 0.0;
  std::vector<EpochMetric> metrics;
  long steps = 0;  // batches consumed over the whole run
};

// Fresh model: vocabulary over the union of train inputs and label phrases,
// seeded truncated-normal init (optionally overridden by a pretrained
// table), then epochs x schedule with per-epoch evaluation of every task.
TrainResult train(const std::vector<RawTask>& tasks, const TrainConfig& config,
                  const EmbeddingTable* pretrained = nullptr, const MetricSink& sink = {});

// Continues training an existing model: vocabulary extended by the new
// task's tokens, all parameters trainable, batches drawn only from the new
// task; every task is still evaluated each epoch.
TrainResult hot_update(const Model& base, const std::vector<RawTask>& old_tasks,
                       const RawTask& new_task, const TrainConfig& config,
                       const MetricSink& sink = {});

// Re-trains from scratch over old and new tasks together; equivalent to
// train() on the union under the same config.
TrainResult cold_update(const Model& base, const std::vector<RawTask>& old_tasks,
                        const RawTask& new_task, const TrainConfig& config,
                        const MetricSink& sink = {});

struct ZeroShotResult {
  double accuracy = 0.0;
  int evaluated = 0;
  int oov_label_tokens = 0;  // label-phrase tokens that mapped to UNK
  Eigen::MatrixXi confusion;
};

// Frozen-parameter evaluation of a brand-new task: label phrases encoded
// under the existing vocabulary (out-of-vocabulary tokens map to UNK), test
// records classified by the matcher. The model is not modified.
ZeroShotResult zero_update_eval(const Model& model, const RawTask& new_task);

struct SubsetRun {
  std::vector<int> task_indices;
  std::vector<double> test_accuracy;  // aligned with task_indices
  int best_epoch = 0;
};

struct AblationResult {
  std::vector<std::string> task_ids;
  std::vector<SubsetRun> runs;   // all non-empty subsets, smallest first
  Eigen::MatrixXd gains;         // percentage points; see below
};

// Trains every non-empty subset of 1..4 tasks, each run with its own
// seed-derived init. gains(i,i) is task i's full-set accuracy minus its
// single-task accuracy; gains(i,j) averages the pair run's deltas against
// the single-task baselines. Runs may execute in parallel; results are
// identical to serial execution.
AblationResult pairwise_ablation(const std::vector<RawTask>& tasks, const TrainConfig& config,
                                 bool parallel = false);

std::string ablation_table(const AblationResult& result);
std::string ablation_gain_csv(const AblationResult& result);
std::string ablation_runs_csv(const AblationResult& result);

}  // namespace mtle
