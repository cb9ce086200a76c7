#include "mtle/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "mtle/error.hpp"
#include "mtle/rng.hpp"

namespace mtle {

ModelOptions TrainConfig::model_options() const {
  ModelOptions options;
  options.embedding_dim = embedding_dim;
  options.hidden_dim = hidden_dim;
  options.tie_lookups = tie_lookups;
  options.matcher_bias = matcher_bias;
  options.loss_mode = loss_mode;
  options.lstm = lstm;
  return options;
}

BatchSchedule make_schedule(const std::vector<TaskData>& tasks, int batch_size,
                            std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch size must be >= 1");
  BatchSchedule schedule;
  long total = 0;
  for (const TaskData& task : tasks) {
    total += task.train.size();
    if (task.train.empty()) continue;
    std::vector<int> order(static_cast<std::size_t>(task.train.size()));
    for (int i = 0; i < task.train.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    Rng task_rng = Rng::stream(seed, "schedule:" + task.spec.id,
                               static_cast<std::uint64_t>(epoch));
    task_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
      Batch batch;
      batch.task_id = task.spec.id;
      std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
      for (std::size_t i = start; i < end; ++i)
        batch.examples.push_back(task.train.examples[static_cast<std::size_t>(order[i])]);
      schedule.batches.push_back(std::move(batch));
    }
  }
  if (total == 0) throw Error(ErrorKind::NoTrainingData, "no task has training examples");
  Rng order_rng = Rng::stream(seed, "schedule-order", static_cast<std::uint64_t>(epoch));
  order_rng.shuffle(schedule.batches);
  return schedule;
}

std::string format_metric(const EpochMetric& metric) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "epoch=%d task=%s split=%s loss=%.6f acc=%.6f", metric.epoch,
                metric.task_id.c_str(), metric.split.c_str(), metric.loss, metric.accuracy);
  return buf;
}

EvalResult evaluate(const Model& model, const TaskSpec& task, const DatasetSplit& split) {
  EvalResult result;
  const int num_labels = task.num_labels();
  result.confusion = Eigen::MatrixXi::Zero(num_labels, num_labels);
  double loss_sum = 0.0;
  int correct = 0;
  for (const Example& example : split.examples) {
    Eigen::VectorXd x = model.encode_input(example.tokens);
    std::vector<double> scores = model.scores_for(x, task.id);
    int predicted = argmax_score(scores);
    loss_sum += sample_loss(scores, example.gold, model.options.loss_mode);
    result.confusion(example.gold, predicted) += 1;
    if (predicted == example.gold) ++correct;
  }
  result.count = split.size();
  if (result.count > 0) {
    result.mean_loss = loss_sum / result.count;
    result.accuracy = static_cast<double>(correct) / result.count;
  }
  return result;
}

namespace {

void add_l2_penalty(Model& model, double l2_weight, double& objective) {
  if (l2_weight <= 0.0) return;
  for (ParamTensor* t : model.regularized_parameters()) {
    objective += l2_weight * t->values.squaredNorm();
    t->grads += 2.0 * l2_weight * t->values;
  }
}

[[noreturn]] void throw_non_finite(const Model& model, const std::string& stage) {
  // Corrupt values are the root cause; NaN gradients are usually fallout,
  // so scan values across every tensor first.
  for (const ParamTensor* t : model.parameters())
    if (!t->values_finite())
      throw Error(ErrorKind::NonFiniteLoss, stage + ": tensor '" + t->name + "' has non-finite values");
  for (const ParamTensor* t : model.parameters())
    if (!t->grads_finite())
      throw Error(ErrorKind::NonFiniteLoss, stage + ": tensor '" + t->name + "' has non-finite gradients");
  throw Error(ErrorKind::NonFiniteLoss, stage);
}

}  // namespace

double train_step(Model& model, const Batch& batch, const TrainConfig& config,
                  double learning_rate) {
  const TaskSpec& task = model.registry.at(batch.task_id);
  model.zero_grads();
  double objective = accumulate_batch_gradients(model, task, batch.examples);
  add_l2_penalty(model, config.l2_weight, objective);

  if (!std::isfinite(objective)) throw_non_finite(model, "batch objective is non-finite");

  if (config.clip_norm > 0.0) {
    std::vector<ParamTensor*> params = model.parameters();
    double norm = grad_norm(params);
    if (norm > config.clip_norm) {
      double scale = config.clip_norm / norm;
      for (ParamTensor* t : params) t->grads *= scale;
    }
  }

  model.sgd_step(learning_rate);
  for (const ParamTensor* t : model.parameters())
    if (!t->values_finite())
      throw Error(ErrorKind::NonFiniteLoss,
                  "optimizer step produced non-finite values in tensor '" + t->name + "'");
  return objective;
}

namespace {

// Shared epoch loop. Batches come only from `schedule_tasks`; evaluation and
// best-checkpoint selection cover every task in `all_tasks`.
TrainResult train_loop(Model&& model, const std::vector<TaskData>& all_tasks,
                       const std::vector<TaskData>& schedule_tasks, const TrainConfig& config,
                       const MetricSink& sink) {
  TrainResult result;
  result.config = config;
  result.model = std::move(model);

  Model best = result.model;
  double best_accuracy = -1.0;
  int best_epoch = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.lr_decay > 0.0
                          ? config.learning_rate / (1.0 + config.lr_decay * (epoch - 1))
                          : config.learning_rate;
    BatchSchedule schedule = make_schedule(schedule_tasks, config.batch_size, config.seed, epoch);
    for (const Batch& batch : schedule.batches) {
      train_step(result.model, batch, config, lr);
      ++result.steps;
    }

    double accuracy_sum = 0.0;
    int tasks_with_test = 0;
    for (const TaskData& task : all_tasks) {
      EvalResult train_eval = evaluate(result.model, task.spec, task.train);
      if (train_eval.count > 0) {
        result.metrics.push_back(
            {epoch, task.spec.id, "train", train_eval.mean_loss, train_eval.accuracy});
        if (sink) sink(result.metrics.back());
      }
      EvalResult test_eval = evaluate(result.model, task.spec, task.test);
      if (test_eval.count > 0) {
        result.metrics.push_back(
            {epoch, task.spec.id, "test", test_eval.mean_loss, test_eval.accuracy});
        if (sink) sink(result.metrics.back());
        accuracy_sum += test_eval.accuracy;
        ++tasks_with_test;
      }
    }
    double mean_test = tasks_with_test > 0 ? accuracy_sum / tasks_with_test : 0.0;
    if (mean_test > best_accuracy) {
      best_accuracy = mean_test;
      best = result.model;
      best_epoch = epoch;
    }
  }

  if (config.epochs > 0 && best_accuracy >= 0.0) {
    result.model = std::move(best);
    result.best_epoch = best_epoch;
    result.best_mean_test_accuracy = std::max(best_accuracy, 0.0);
  }
  return result;
}

std::vector<std::vector<std::string>> union_corpora(const std::vector<RawTask>& tasks) {
  std::vector<std::vector<std::string>> corpora;
  for (const RawTask& task : tasks) {
    auto part = vocabulary_corpora(task);
    corpora.insert(corpora.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
  }
  return corpora;
}

}  // namespace

TrainResult train(const std::vector<RawTask>& tasks, const TrainConfig& config,
                  const EmbeddingTable* pretrained, const MetricSink& sink) {
  if (tasks.empty()) throw Error(ErrorKind::NoTrainingData, "no tasks to train on");
  Vocabulary vocab = build_vocabulary(union_corpora(tasks), config.min_count);
  Model model(std::move(vocab), config.model_options());
  Rng init_rng = Rng::stream(config.seed, "init");
  model.init_parameters(config.init_std, init_rng);
  if (pretrained) model.set_pretrained(*pretrained);

  std::vector<TaskData> data;
  data.reserve(tasks.size());
  for (const RawTask& raw : tasks) {
    data.push_back(resolve_task(raw, model.vocab));
    model.registry.add(data.back().spec);
  }
  return train_loop(std::move(model), data, data, config, sink);
}

TrainResult hot_update(const Model& base, const std::vector<RawTask>& old_tasks,
                       const RawTask& new_task, const TrainConfig& config,
                       const MetricSink& sink) {
  if (base.registry.contains(new_task.id))
    throw Error(ErrorKind::DuplicateTaskId, "task '" + new_task.id + "' is already registered");

  Model model = base;
  Rng grow_rng = Rng::stream(config.seed, "vocab-extend");
  model.extend_vocabulary(novel_tokens(vocabulary_corpora(new_task), model.vocab,
                                       config.min_count),
                          config.init_std, grow_rng);

  std::vector<TaskData> all;
  all.reserve(old_tasks.size() + 1);
  for (const RawTask& raw : old_tasks) all.push_back(resolve_task(raw, model.vocab));
  TaskData fresh = resolve_task(new_task, model.vocab);
  model.registry.add(fresh.spec);
  all.push_back(fresh);

  std::vector<TaskData> schedule_tasks = {fresh};
  return train_loop(std::move(model), all, schedule_tasks, config, sink);
}

TrainResult cold_update(const Model& base, const std::vector<RawTask>& old_tasks,
                        const RawTask& new_task, const TrainConfig& config,
                        const MetricSink& sink) {
  if (base.registry.contains(new_task.id))
    throw Error(ErrorKind::DuplicateTaskId, "task '" + new_task.id + "' is already registered");
  std::vector<RawTask> all = old_tasks;
  all.push_back(new_task);
  return train(all, config, nullptr, sink);
}

ZeroShotResult zero_update_eval(const Model& model, const RawTask& new_task) {
  ZeroShotResult result;
  const int num_labels = static_cast<int>(new_task.label_names.size());
  if (num_labels < 2)
    throw Error(ErrorKind::InvalidArgument, "task '" + new_task.id + "' needs >= 2 labels");
  result.confusion = Eigen::MatrixXi::Zero(num_labels, num_labels);

  // Label phrases under the frozen vocabulary; unseen tokens become UNK.
  std::vector<Eigen::VectorXd> labels;
  labels.reserve(static_cast<std::size_t>(num_labels));
  for (const auto& words : new_task.label_words) {
    std::vector<int> ids = model.vocab.map(words);
    for (int id : ids)
      if (id == Vocabulary::kUnkId) ++result.oov_label_tokens;
    labels.push_back(
        lstm_encode(model.lstm_label, model.label_table().lookup(ids), pad_mask(ids)));
  }

  int correct = 0;
  for (const RawRecord& record : new_task.records) {
    if (!record.is_test) continue;
    std::vector<int> ids = model.vocab.map(record.words);
    Eigen::VectorXd x = model.encode_input(ids);
    std::vector<double> scores(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j)
      scores[j] = match_score(model.matcher, x, labels[j]);
    int predicted = argmax_score(scores);
    result.confusion(record.label, predicted) += 1;
    if (predicted == record.label) ++correct;
    ++result.evaluated;
  }
  if (result.evaluated == 0)
    throw Error(ErrorKind::NoTestData, "task '" + new_task.id + "' has no test records");
  result.accuracy = static_cast<double>(correct) / result.evaluated;
  return result;
}

namespace {

std::vector<std::vector<int>> enumerate_subsets(int count) {
  std::vector<std::vector<int>> subsets;
  for (int size = 1; size <= count; ++size) {
    std::vector<int> indices(static_cast<std::size_t>(size));
    // lexicographic combinations of the given size
    for (int i = 0; i < size; ++i) indices[static_cast<std::size_t>(i)] = i;
    for (;;) {
      subsets.push_back(indices);
      int pos = size - 1;
      while (pos >= 0 && indices[static_cast<std::size_t>(pos)] == count - size + pos) --pos;
      if (pos < 0) break;
      ++indices[static_cast<std::size_t>(pos)];
      for (int i = pos + 1; i < size; ++i)
        indices[static_cast<std::size_t>(i)] = indices[static_cast<std::size_t>(i - 1)] + 1;
    }
  }
  return subsets;
}

}  // namespace

AblationResult pairwise_ablation(const std::vector<RawTask>& tasks, const TrainConfig& config,
                                 bool parallel) {
  const int count = static_cast<int>(tasks.size());
  if (count < 1) throw Error(ErrorKind::NoTrainingData, "no tasks for ablation");
  if (count > 4)
    throw Error(ErrorKind::TooManyTasks,
                "ablation covers at most 4 tasks, got " + std::to_string(count));

  AblationResult result;
  for (const RawTask& task : tasks) result.task_ids.push_back(task.id);
  std::vector<std::vector<int>> subsets = enumerate_subsets(count);
  result.runs.resize(subsets.size());

  auto execute = [&](std::size_t run_index) {
    const std::vector<int>& subset = subsets[run_index];
    std::vector<RawTask> selection;
    selection.reserve(subset.size());
    for (int idx : subset) selection.push_back(tasks[static_cast<std::size_t>(idx)]);

    TrainConfig run_config = config;
    run_config.seed = Rng::stream(config.seed, "ablate", run_index).next_u64();
    TrainResult trained = train(selection, run_config);

    SubsetRun& run = result.runs[run_index];
    run.task_indices = subset;
    run.best_epoch = trained.best_epoch;
    for (int idx : subset) {
      const RawTask& raw = tasks[static_cast<std::size_t>(idx)];
      TaskData data = resolve_task(raw, trained.model.vocab);
      run.test_accuracy.push_back(evaluate(trained.model, trained.model.registry.at(raw.id),
                                           data.test)
                                      .accuracy);
    }
  };

  if (parallel && subsets.size() > 1) {
    unsigned workers = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                                       static_cast<unsigned>(subsets.size())));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w]() {
        for (std::size_t run = w; run < subsets.size(); run += workers) execute(run);
      });
    for (std::thread& t : pool) t.join();
  } else {
    for (std::size_t run = 0; run < subsets.size(); ++run) execute(run);
  }

  // Gain matrix in percentage points against the single-task baselines.
  std::vector<double> baseline(static_cast<std::size_t>(count), 0.0);
  for (const SubsetRun& run : result.runs)
    if (run.task_indices.size() == 1)
      baseline[static_cast<std::size_t>(run.task_indices[0])] = run.test_accuracy[0];

  result.gains = Eigen::MatrixXd::Zero(count, count);
  for (const SubsetRun& run : result.runs) {
    if (run.task_indices.size() == 2) {
      int a = run.task_indices[0];
      int b = run.task_indices[1];
      double gain_a = run.test_accuracy[0] - baseline[static_cast<std::size_t>(a)];
      double gain_b = run.test_accuracy[1] - baseline[static_cast<std::size_t>(b)];
      double mean_gain = 100.0 * 0.5 * (gain_a + gain_b);
      result.gains(a, b) = mean_gain;
      result.gains(b, a) = mean_gain;
    }
    if (static_cast<int>(run.task_indices.size()) == count) {
      for (std::size_t i = 0; i < run.task_indices.size(); ++i) {
        int idx = run.task_indices[i];
        result.gains(idx, idx) =
            100.0 * (run.test_accuracy[i] - baseline[static_cast<std::size_t>(idx)]);
      }
    }
  }
  return result;
}

std::string ablation_table(const AblationResult& result) {
  std::size_t width = 8;
  for (const std::string& id : result.task_ids) width = std::max(width, id.size() + 1);
  std::ostringstream out;
  out << "gain matrix (percentage points vs single-task baseline)\n";
  char cell[64];
  std::snprintf(cell, sizeof(cell), "%*s", static_cast<int>(width), "");
  out << cell;
  for (const std::string& id : result.task_ids) {
    std::snprintf(cell, sizeof(cell), "%*s", static_cast<int>(width), id.c_str());
    out << cell;
  }
  out << '\n';
  for (int r = 0; r < result.gains.rows(); ++r) {
    std::snprintf(cell, sizeof(cell), "%*s", static_cast<int>(width),
                  result.task_ids[static_cast<std::size_t>(r)].c_str());
    out << cell;
    for (int c = 0; c < result.gains.cols(); ++c) {
      std::snprintf(cell, sizeof(cell), "%*.2f", static_cast<int>(width), result.gains(r, c));
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::string ablation_gain_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "task";
  for (const std::string& id : result.task_ids) out << ',' << id;
  out << '\n';
  char cell[64];
  for (int r = 0; r < result.gains.rows(); ++r) {
    out << result.task_ids[static_cast<std::size_t>(r)];
    for (int c = 0; c < result.gains.cols(); ++c) {
      std::snprintf(cell, sizeof(cell), "%.6f", result.gains(r, c));
      out << ',' << cell;
    }
    out << '\n';
  }
  return out.str();
}

std::string ablation_runs_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "tasks,best_epoch,per_task_test_accuracy\n";
  char cell[64];
  for (const SubsetRun& run : result.runs) {
    for (std::size_t i = 0; i < run.task_indices.size(); ++i) {
      if (i) out << '+';
      out << result.task_ids[static_cast<std::size_t>(run.task_indices[i])];
    }
    out << ',' << run.best_epoch << ',';
    for (std::size_t i = 0; i < run.test_accuracy.size(); ++i) {
      if (i) out << ';';
      std::snprintf(cell, sizeof(cell), "%.6f", run.test_accuracy[i]);
      out << cell;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace mtle
