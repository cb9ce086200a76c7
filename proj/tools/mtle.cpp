// Command-line surface of the engine: embedding pretraining, supervised and
// unsupervised training, evaluation, task scaling (hot/cold updates),
// zero-shot transfer, pairwise ablation, gradient checking and synthetic
// data generation.
//
// Exit codes: 0 success, 1 check/accuracy-gate failure, 2 usage/input error.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mtle/checkpoint.hpp"
#include "mtle/corpus.hpp"
#include "mtle/embedding.hpp"
#include "mtle/error.hpp"
#include "mtle/gradcheck.hpp"
#include "mtle/manifest.hpp"
#include "mtle/matcher.hpp"
#include "mtle/model.hpp"
#include "mtle/rng.hpp"
#include "mtle/trainer.hpp"
#include "mtle/version.hpp"

namespace {

using namespace mtle;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

// ---------------------------------------------------------------------------
// shared option plumbing

struct TrainFlags {
  TrainConfig config;
  std::string loss_mode = "one_vs_rest";
  bool tie_lookups = false;
  bool no_matcher_bias = false;
  bool full_peepholes = false;
  bool peephole_current_cell = false;
  bool candidate_bias = false;
  bool mean_pool = false;

  TrainConfig resolve() const {
    TrainConfig out = config;
    out.loss_mode = parse_loss_mode(loss_mode);
    out.tie_lookups = tie_lookups;
    out.matcher_bias = !no_matcher_bias;
    out.lstm.full_peepholes = full_peepholes;
    out.lstm.peephole_current_cell = peephole_current_cell;
    out.lstm.candidate_bias = candidate_bias;
    out.lstm.mean_pool = mean_pool;
    return out;
  }
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
  cmd->add_option("-d,--embedding-dim", flags.config.embedding_dim, "embedding size d")
      ->capture_default_str();
  cmd->add_option("-m,--hidden-dim", flags.config.hidden_dim, "LSTM hidden size m")
      ->capture_default_str();
  cmd->add_option("--batch-size", flags.config.batch_size, "batch size")->capture_default_str();
  cmd->add_option("--lr", flags.config.learning_rate, "initial learning rate")
      ->capture_default_str();
  cmd->add_option("--lr-decay", flags.config.lr_decay,
                  "per-epoch decay: lr / (1 + decay * epoch); 0 keeps lr constant")
      ->capture_default_str();
  cmd->add_option("--l2", flags.config.l2_weight, "L2 regularization weight")
      ->capture_default_str();
  cmd->add_option("--epochs", flags.config.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--seed", flags.config.seed, "master seed for all PRNG streams")
      ->envname("MTLE_SEED")
      ->capture_default_str();
  cmd->add_option("--loss-mode", flags.loss_mode, "sample loss: one_vs_rest or literal")
      ->check(CLI::IsMember({"one_vs_rest", "ovr", "literal"}))
      ->capture_default_str();
  cmd->add_option("--init-std", flags.config.init_std,
                  "stddev of the truncated-normal parameter init")
      ->capture_default_str();
  cmd->add_option("--clip-norm", flags.config.clip_norm,
                  "global gradient norm clip; 0 disables")
      ->capture_default_str();
  cmd->add_option("--min-count", flags.config.min_count, "vocabulary frequency threshold")
      ->capture_default_str();
  cmd->add_flag("--tie-lookups", flags.tie_lookups,
                "share one lookup table between inputs and labels");
  cmd->add_flag("--no-matcher-bias", flags.no_matcher_bias,
                "drop the matcher bias (bias-free scoring layer)");
  cmd->add_flag("--full-peepholes", flags.full_peepholes,
                "full m x m peephole matrices instead of element-wise");
  cmd->add_flag("--peephole-current-cell", flags.peephole_current_cell,
                "output gate peeps at the current cell instead of the previous one");
  cmd->add_flag("--candidate-bias", flags.candidate_bias, "add a bias to the candidate cell");
  cmd->add_flag("--mean-pool", flags.mean_pool,
                "mean-over-time pooling instead of the last hidden state");
  cmd->set_config("--config", "", "flat key=value config file mirroring the flag names");
}

void config_to_manifest(const TrainConfig& config, RunManifest& manifest) {
  manifest.seed = config.seed;
  manifest.set("embedding_dim", static_cast<long long>(config.embedding_dim));
  manifest.set("hidden_dim", static_cast<long long>(config.hidden_dim));
  manifest.set("batch_size", static_cast<long long>(config.batch_size));
  manifest.set("lr", config.learning_rate);
  manifest.set("lr_decay", config.lr_decay);
  manifest.set("l2", config.l2_weight);
  manifest.set("epochs", static_cast<long long>(config.epochs));
  manifest.set("loss_mode", to_string(config.loss_mode));
  manifest.set("init_std", config.init_std);
  manifest.set("clip_norm", config.clip_norm);
  manifest.set("min_count", static_cast<long long>(config.min_count));
  manifest.set("tie_lookups", config.tie_lookups ? "1" : "0");
  manifest.set("matcher_bias", config.matcher_bias ? "1" : "0");
  manifest.set("full_peepholes", config.lstm.full_peepholes ? "1" : "0");
  manifest.set("peephole_current_cell", config.lstm.peephole_current_cell ? "1" : "0");
  manifest.set("candidate_bias", config.lstm.candidate_bias ? "1" : "0");
  manifest.set("mean_pool", config.lstm.mean_pool ? "1" : "0");
}

std::vector<RawTask> parse_tasks(const std::vector<std::string>& paths) {
  std::vector<RawTask> tasks;
  std::set<std::string> ids;
  for (const std::string& path : paths) {
    RawTask task = parse_task_file(path);
    if (!ids.insert(task.id).second)
      throw Error(ErrorKind::DuplicateTaskId, "task '" + task.id + "' appears more than once");
    tasks.push_back(std::move(task));
  }
  return tasks;
}

void write_metrics_file(const std::string& path, const std::vector<EpochMetric>& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write metrics file '" + path + "'");
  for (const EpochMetric& metric : metrics) out << format_metric(metric) << '\n';
}

// Per-task accuracy table printed by eval-style commands.
struct AccuracyRow {
  std::string task;
  std::string split;
  int count = 0;
  double accuracy = 0.0;
};

void print_accuracy_rows(const std::vector<AccuracyRow>& rows, bool csv) {
  if (csv) {
    std::printf("task,split,n,accuracy\n");
    for (const AccuracyRow& row : rows)
      std::printf("%s,%s,%d,%.6f\n", row.task.c_str(), row.split.c_str(), row.count,
                  row.accuracy);
    return;
  }
  std::size_t width = 4;
  for (const AccuracyRow& row : rows) width = std::max(width, row.task.size());
  std::printf("%-*s %-6s %6s %9s\n", static_cast<int>(width), "task", "split", "n", "accuracy");
  for (const AccuracyRow& row : rows)
    std::printf("%-*s %-6s %6d %9.4f\n", static_cast<int>(width), row.task.c_str(),
                row.split.c_str(), row.count, row.accuracy);
}

void print_confusion(const TaskSpec& task, const Eigen::MatrixXi& confusion, bool csv) {
  if (csv) {
    for (int g = 0; g < confusion.rows(); ++g)
      for (int p = 0; p < confusion.cols(); ++p)
        std::printf("confusion,%s,%s,%s,%d\n", task.id.c_str(),
                    task.label_names[static_cast<std::size_t>(g)].c_str(),
                    task.label_names[static_cast<std::size_t>(p)].c_str(), confusion(g, p));
    return;
  }
  std::printf("confusion for %s (rows gold, cols predicted):\n", task.id.c_str());
  for (int g = 0; g < confusion.rows(); ++g) {
    std::printf("  %-18s", task.label_names[static_cast<std::size_t>(g)].c_str());
    for (int p = 0; p < confusion.cols(); ++p) std::printf(" %5d", confusion(g, p));
    std::printf("\n");
  }
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::uint64_t seed = 1;
  std::string scenario = "domain";
  std::vector<int> sizes = {100, 100};
  std::string outdir;
};

int cmd_synth(const SynthArgs& args) {
  std::vector<RawTask> tasks =
      generate_synthetic_tasks(args.seed, parse_scenario(args.scenario), args.sizes);
  std::filesystem::create_directories(args.outdir);
  for (const RawTask& task : tasks) {
    std::string path = (std::filesystem::path(args.outdir) / (task.id + ".task")).string();
    write_task_file(task, path);
    std::printf("%s\n", path.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// embed-train

struct EmbedArgs {
  std::vector<std::string> corpus_paths;
  std::string out;
  SkipGramConfig config;
  int min_count = 1;
};

bool looks_like_task_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string first;
  std::getline(in, first);
  return first.rfind("task\t", 0) == 0;
}

// All available text: every record of task files (both splits) plus label
// phrases; plain files contribute one sequence per line.
std::vector<std::vector<std::string>> gather_corpora(const std::vector<std::string>& paths) {
  std::vector<std::vector<std::string>> corpora;
  for (const std::string& path : paths) {
    if (looks_like_task_file(path)) {
      RawTask task = parse_task_file(path);
      for (const RawRecord& record : task.records) corpora.push_back(record.words);
      for (const auto& words : task.label_words) corpora.push_back(words);
    } else {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(ErrorKind::IoError, "cannot open corpus file '" + path + "'");
      std::string line;
      while (std::getline(in, line)) {
        std::vector<std::string> words = tokenize(line);
        if (!words.empty()) corpora.push_back(std::move(words));
      }
    }
  }
  return corpora;
}

int cmd_embed_train(const EmbedArgs& args) {
  RunManifest manifest("embed-train");
  for (const std::string& path : args.corpus_paths) manifest.add_input(path);
  manifest.seed = args.config.seed;
  manifest.set("dim", static_cast<long long>(args.config.dim));
  manifest.set("window", static_cast<long long>(args.config.window));
  manifest.set("negatives", static_cast<long long>(args.config.negatives));
  manifest.set("epochs", static_cast<long long>(args.config.epochs));
  manifest.set("lr", args.config.learning_rate);
  manifest.set("min_count", static_cast<long long>(args.min_count));
  manifest.set("out", args.out);

  std::vector<std::vector<std::string>> corpora = gather_corpora(args.corpus_paths);
  Vocabulary vocab = build_vocabulary(corpora, args.min_count);
  std::vector<std::vector<int>> ids;
  ids.reserve(corpora.size());
  for (const auto& words : corpora) ids.push_back(vocab.map(words));

  SkipGramResult result = train_skipgram(ids, vocab.size(), args.config);
  save_embedding_file(result.table, vocab, args.out);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
    std::printf("epoch=%zu sg_loss=%.6f\n", e + 1, result.epoch_loss[e]);
  std::printf("wrote %s (%d words, dim %d)\n", args.out.c_str(), vocab.size(), args.config.dim);

  manifest.finish();
  manifest.write(args.out + ".manifest");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::vector<std::string> task_paths;
  std::string out;
  std::string metrics_path;
  std::string mode = "model2";
  std::string metric = "cosine";
  std::string pretrained;
  bool csv = false;
  TrainFlags flags;
};

int run_model1(const TrainArgs& args, const TrainConfig& config) {
  std::vector<RawTask> tasks = parse_tasks(args.task_paths);

  // One shared embedding space over all available inputs and labels.
  std::vector<std::vector<std::string>> corpora;
  for (const RawTask& task : tasks) {
    for (const RawRecord& record : task.records) corpora.push_back(record.words);
    for (const auto& words : task.label_words) corpora.push_back(words);
  }
  Vocabulary vocab = build_vocabulary(corpora, config.min_count);

  EmbeddingTable table;
  if (!args.pretrained.empty()) {
    table = load_pretrained(args.pretrained, vocab, config.embedding_dim, config.init_std,
                            config.seed);
  } else {
    std::vector<std::vector<int>> ids;
    for (const auto& words : corpora) ids.push_back(vocab.map(words));
    SkipGramConfig sg;
    sg.dim = config.embedding_dim;
    sg.seed = config.seed;
    table = train_skipgram(ids, vocab.size(), sg).table;
  }

  MatchMetric metric = parse_metric(args.metric);
  auto pool_ids = [&](const std::vector<int>& ids) {
    return average_pool(table.lookup(ids), pad_mask(ids));
  };

  std::vector<AccuracyRow> rows;
  for (const RawTask& raw : tasks) {
    TaskData data = resolve_task(raw, vocab);
    std::vector<Eigen::VectorXd> labels;
    for (const auto& ids : data.spec.label_tokens) labels.push_back(pool_ids(ids));
    for (const DatasetSplit* split : {&data.train, &data.test}) {
      if (split->empty()) continue;
      int correct = 0;
      for (const Example& example : split->examples)
        if (unsupervised_match(pool_ids(example.tokens), labels, metric) == example.gold)
          ++correct;
      rows.push_back({raw.id, split == &data.train ? "train" : "test", split->size(),
                      static_cast<double>(correct) / split->size()});
    }
  }
  print_accuracy_rows(rows, args.csv);
  return kExitOk;
}

int cmd_train(const TrainArgs& args) {
  TrainConfig config = args.flags.resolve();

  RunManifest manifest("train");
  config_to_manifest(config, manifest);
  manifest.set("mode", args.mode);
  for (const std::string& path : args.task_paths) manifest.add_input(path);
  if (!args.pretrained.empty()) manifest.add_input(args.pretrained);

  if (args.mode == "model1") return run_model1(args, config);

  if (args.out.empty())
    throw Error(ErrorKind::InvalidArgument, "--out is required in model2 mode");

  std::vector<RawTask> tasks = parse_tasks(args.task_paths);

  // Pretrained vectors are aligned to the same vocabulary train() builds;
  // dimension conflicts surface here, before any training.
  EmbeddingTable pretrained;
  bool have_pretrained = false;
  if (!args.pretrained.empty()) {
    std::vector<std::vector<std::string>> corpora;
    for (const RawTask& task : tasks)
      for (auto& seq : vocabulary_corpora(task)) corpora.push_back(std::move(seq));
    Vocabulary vocab = build_vocabulary(corpora, config.min_count);
    pretrained = load_pretrained(args.pretrained, vocab, config.embedding_dim, config.init_std,
                                 config.seed);
    have_pretrained = true;
  }

  MetricSink sink = [](const EpochMetric& metric) {
    std::printf("%s\n", format_metric(metric).c_str());
  };
  TrainResult result = train(tasks, config, have_pretrained ? &pretrained : nullptr, sink);

  save_checkpoint(result.model, config, args.out);
  std::string metrics_path = args.metrics_path.empty() ? args.out + ".metrics" : args.metrics_path;
  write_metrics_file(metrics_path, result.metrics);
  std::printf("best_epoch=%d mean_test_acc=%.6f checkpoint=%s\n", result.best_epoch,
              result.best_mean_test_accuracy, args.out.c_str());

  manifest.finish();
  manifest.write(args.out + ".manifest");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::vector<std::string> task_paths;
  std::string split = "test";
  std::string manifest_path;
  bool zero_shot = false;
  bool csv = false;
};

int cmd_eval(const EvalArgs& args) {
  RunManifest manifest("eval");
  manifest.add_input(args.checkpoint);
  for (const std::string& path : args.task_paths) manifest.add_input(path);
  manifest.set("split", args.split);
  manifest.set("zero_shot", args.zero_shot ? "1" : "0");

  Checkpoint checkpoint = load_checkpoint(args.checkpoint);
  manifest.seed = checkpoint.config.seed;
  const Model& model = checkpoint.model;

  std::vector<AccuracyRow> rows;
  std::vector<std::pair<TaskSpec, Eigen::MatrixXi>> confusions;
  for (const std::string& path : args.task_paths) {
    RawTask raw = parse_task_file(path);
    if (args.zero_shot) {
      ZeroShotResult zero = zero_update_eval(model, raw);
      if (zero.oov_label_tokens > 0)
        std::fprintf(stderr, "warning: task '%s': %d label token(s) out of vocabulary\n",
                     raw.id.c_str(), zero.oov_label_tokens);
      rows.push_back({raw.id, "test", zero.evaluated, zero.accuracy});
      TaskSpec spec;
      spec.id = raw.id;
      spec.label_names = raw.label_names;
      confusions.emplace_back(spec, zero.confusion);
      continue;
    }
    if (!model.registry.contains(raw.id))
      throw Error(ErrorKind::UnknownTask,
                  "task '" + raw.id + "' is not in the checkpoint (use --zero-shot for new tasks)");
    TaskData data = resolve_task(raw, model.vocab);
    const DatasetSplit& split = args.split == "train" ? data.train : data.test;
    if (split.empty())
      throw Error(ErrorKind::NoTestData,
                  "task '" + raw.id + "' has no '" + args.split + "' records");
    EvalResult eval = evaluate(model, model.registry.at(raw.id), split);
    rows.push_back({raw.id, args.split, eval.count, eval.accuracy});
    confusions.emplace_back(model.registry.at(raw.id), eval.confusion);
  }

  print_accuracy_rows(rows, args.csv);
  for (const auto& [spec, confusion] : confusions) print_confusion(spec, confusion, args.csv);

  manifest.finish();
  if (!args.manifest_path.empty())
    manifest.write(args.manifest_path);
  else
    std::printf("--- manifest ---\n%s", manifest.format().c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// add-task

struct AddTaskArgs {
  std::string checkpoint;
  std::string task_path;
  std::vector<std::string> data_paths;
  std::string out;
  std::string metrics_path;
  bool hot = false;
  bool cold = false;
  TrainFlags flags;
  CLI::App* cmd = nullptr;
};

// Flags the user set explicitly override the checkpoint's stored config.
TrainConfig merge_config(const Checkpoint& checkpoint, const TrainFlags& flags, CLI::App* cmd) {
  TrainConfig merged = checkpoint.config;
  TrainConfig given = flags.resolve();
  auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--embedding-dim")) merged.embedding_dim = given.embedding_dim;
  if (passed("--hidden-dim")) merged.hidden_dim = given.hidden_dim;
  if (passed("--batch-size")) merged.batch_size = given.batch_size;
  if (passed("--lr")) merged.learning_rate = given.learning_rate;
  if (passed("--lr-decay")) merged.lr_decay = given.lr_decay;
  if (passed("--l2")) merged.l2_weight = given.l2_weight;
  if (passed("--epochs")) merged.epochs = given.epochs;
  if (passed("--seed")) merged.seed = given.seed;
  if (passed("--loss-mode")) merged.loss_mode = given.loss_mode;
  if (passed("--init-std")) merged.init_std = given.init_std;
  if (passed("--clip-norm")) merged.clip_norm = given.clip_norm;
  if (passed("--min-count")) merged.min_count = given.min_count;
  if (passed("--tie-lookups")) merged.tie_lookups = given.tie_lookups;
  if (passed("--no-matcher-bias")) merged.matcher_bias = given.matcher_bias;
  if (passed("--full-peepholes")) merged.lstm.full_peepholes = given.lstm.full_peepholes;
  if (passed("--peephole-current-cell"))
    merged.lstm.peephole_current_cell = given.lstm.peephole_current_cell;
  if (passed("--candidate-bias")) merged.lstm.candidate_bias = given.lstm.candidate_bias;
  if (passed("--mean-pool")) merged.lstm.mean_pool = given.lstm.mean_pool;
  return merged;
}

int cmd_add_task(const AddTaskArgs& args) {
  if (args.hot == args.cold)
    throw Error(ErrorKind::InvalidArgument, "pass exactly one of --hot or --cold");

  Checkpoint checkpoint = load_checkpoint(args.checkpoint);
  TrainConfig config = merge_config(checkpoint, args.flags, args.cmd);
  if (args.hot && config.model_options() != checkpoint.model.options)
    throw Error(ErrorKind::InvalidArgument,
                "hot update cannot change model structure flags; retrain with --cold");

  RunManifest manifest(args.hot ? "add-task --hot" : "add-task --cold");
  config_to_manifest(config, manifest);
  manifest.add_input(args.checkpoint);
  manifest.add_input(args.task_path);
  for (const std::string& path : args.data_paths) manifest.add_input(path);

  RawTask new_task = parse_task_file(args.task_path);
  std::vector<RawTask> old_tasks = parse_tasks(args.data_paths);

  // "before" rows: the old model on every old task's test split
  std::vector<AccuracyRow> before_rows;
  for (const RawTask& raw : old_tasks) {
    if (!checkpoint.model.registry.contains(raw.id))
      throw Error(ErrorKind::UnknownTask,
                  "old-task file '" + raw.id + "' is not in the checkpoint registry");
    TaskData data = resolve_task(raw, checkpoint.model.vocab);
    if (data.test.empty()) continue;
    EvalResult eval = evaluate(checkpoint.model, checkpoint.model.registry.at(raw.id), data.test);
    before_rows.push_back({raw.id, "before", eval.count, eval.accuracy});
  }

  MetricSink sink = [](const EpochMetric& metric) {
    std::printf("%s\n", format_metric(metric).c_str());
  };
  TrainResult result = args.hot
                           ? hot_update(checkpoint.model, old_tasks, new_task, config, sink)
                           : cold_update(checkpoint.model, old_tasks, new_task, config, sink);

  std::vector<AccuracyRow> after_rows;
  for (const RawTask& raw : old_tasks) {
    TaskData data = resolve_task(raw, result.model.vocab);
    if (data.test.empty()) continue;
    EvalResult eval = evaluate(result.model, result.model.registry.at(raw.id), data.test);
    after_rows.push_back({raw.id, "after", eval.count, eval.accuracy});
  }
  {
    TaskData data = resolve_task(new_task, result.model.vocab);
    if (!data.test.empty()) {
      EvalResult eval = evaluate(result.model, result.model.registry.at(new_task.id), data.test);
      after_rows.push_back({new_task.id, "after", eval.count, eval.accuracy});
    }
  }

  std::vector<AccuracyRow> rows = before_rows;
  rows.insert(rows.end(), after_rows.begin(), after_rows.end());
  print_accuracy_rows(rows, false);

  save_checkpoint(result.model, config, args.out);
  std::string metrics_path = args.metrics_path.empty() ? args.out + ".metrics" : args.metrics_path;
  write_metrics_file(metrics_path, result.metrics);
  std::printf("best_epoch=%d checkpoint=%s\n", result.best_epoch, args.out.c_str());

  manifest.finish();
  manifest.write(args.out + ".manifest");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  std::vector<std::string> task_paths;
  std::string outdir;
  bool parallel = false;
  bool csv = false;
  TrainFlags flags;
};

int cmd_ablate(const AblateArgs& args) {
  TrainConfig config = args.flags.resolve();

  RunManifest manifest("ablate");
  config_to_manifest(config, manifest);
  manifest.set("parallel", args.parallel ? "1" : "0");
  for (const std::string& path : args.task_paths) manifest.add_input(path);

  std::vector<RawTask> tasks = parse_tasks(args.task_paths);
  AblationResult result = pairwise_ablation(tasks, config, args.parallel);

  std::filesystem::create_directories(args.outdir);
  std::filesystem::path outdir(args.outdir);
  {
    std::ofstream out(outdir / "gain_matrix.csv", std::ios::binary);
    out << ablation_gain_csv(result);
  }
  {
    std::ofstream out(outdir / "runs.csv", std::ios::binary);
    out << ablation_runs_csv(result);
  }
  if (args.csv)
    std::printf("%s", ablation_gain_csv(result).c_str());
  else
    std::printf("%s", ablation_table(result).c_str());
  std::printf("runs=%zu files=%s\n", result.runs.size(), (outdir / "gain_matrix.csv").c_str());

  manifest.finish();
  manifest.write((outdir / "manifest.txt").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  ModelProbeSpec spec;
  FdCheckConfig fd;
  std::vector<int> lengths = {1, 2, 7};
  int seeds = 5;
  std::string mode = "both";
  bool tie_lookups = false;
  bool no_matcher_bias = false;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  std::vector<LossMode> modes;
  if (args.mode == "both" || args.mode == "literal") modes.push_back(LossMode::literal);
  if (args.mode == "both" || args.mode == "one_vs_rest" || args.mode == "ovr")
    modes.push_back(LossMode::one_vs_rest);
  if (modes.empty())
    throw Error(ErrorKind::InvalidArgument, "--mode must be both, literal or one_vs_rest");

  auto start = std::chrono::steady_clock::now();
  // worst entry per tensor across the whole sweep
  std::map<std::string, FdTensorSummary> aggregated;
  double worst = 0.0;
  bool pass = true;
  std::vector<FdEntry> failures;

  for (int seed = 1; seed <= args.seeds; ++seed) {
    for (int length : args.lengths) {
      for (LossMode mode : modes) {
        ModelProbeSpec spec = args.spec;
        spec.seed = static_cast<std::uint64_t>(seed);
        spec.sequence_len = length;
        spec.loss_mode = mode;
        spec.tie_lookups = args.tie_lookups;
        spec.matcher_bias = !args.no_matcher_bias;
        GradCheckReport report = run_model_gradcheck(spec, args.fd);
        std::printf("seed=%d len=%d mode=%s max_relerr=%.3e %s\n", seed, length,
                    to_string(mode), report.max_rel_error, report.pass ? "ok" : "FAIL");
        worst = std::max(worst, report.max_rel_error);
        pass = pass && report.pass;
        for (const FdTensorSummary& summary : report.tensors) {
          FdTensorSummary& slot = aggregated[summary.tensor];
          if (slot.tensor.empty()) slot = summary;
          slot.entries_checked = std::max(slot.entries_checked, summary.entries_checked);
          if (summary.max_rel_error > slot.max_rel_error) {
            slot.max_rel_error = summary.max_rel_error;
            slot.worst = summary.worst;
            slot.pass = summary.pass;
          }
        }
        failures.insert(failures.end(), report.failures.begin(), report.failures.end());
      }
    }
  }
  double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  GradCheckReport combined;
  combined.tolerance = args.fd.tolerance;
  combined.max_rel_error = worst;
  combined.pass = pass;
  for (auto& [name, summary] : aggregated) combined.tensors.push_back(summary);
  std::sort(failures.begin(), failures.end(),
            [](const FdEntry& a, const FdEntry& b) { return a.rel_error > b.rel_error; });
  combined.failures = std::move(failures);

  std::printf("\n%s", format_report(combined).c_str());
  std::printf("checked %zu tensors, %d seed(s), %zu length(s), %zu mode(s) in %.2fs\n",
              combined.tensors.size(), args.seeds, args.lengths.size(), modes.size(), elapsed);
  return pass ? kExitOk : kExitCheckFailed;
}

int exit_code_for(const Error& error) {
  // numerical aborts are check failures; everything else is an input problem
  return error.kind() == ErrorKind::NonFiniteLoss ? kExitCheckFailed : kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-task label-embedding text classification engine"};
  app.set_version_flag("--version", std::string("mtle ") + kEngineVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate seeded synthetic task files");
  synth_cmd->add_option("--seed", synth.seed, "generator seed")
      ->envname("MTLE_SEED")
      ->capture_default_str();
  synth_cmd->add_option("--scenario", synth.scenario, "cardinality, domain or objective")
      ->check(CLI::IsMember({"cardinality", "domain", "objective"}))
      ->capture_default_str();
  synth_cmd->add_option("--sizes", synth.sizes, "train samples per task (>= 20 each)")
      ->delimiter(',')
      ->capture_default_str();
  synth_cmd->add_option("--outdir", synth.outdir, "output directory")->required();
  synth_cmd->set_config("--config");

  EmbedArgs embed;
  CLI::App* embed_cmd =
      app.add_subcommand("embed-train", "train skip-gram word vectors over task/text corpora");
  embed_cmd->add_option("corpus", embed.corpus_paths, "task files or plain text files")
      ->required()
      ->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", embed.out, "output vector file")->required();
  embed_cmd->add_option("--dim", embed.config.dim, "embedding size")->capture_default_str();
  embed_cmd->add_option("--window", embed.config.window, "context window")->capture_default_str();
  embed_cmd->add_option("--negatives", embed.config.negatives, "negative samples per positive")
      ->capture_default_str();
  embed_cmd->add_option("--epochs", embed.config.epochs, "epochs")->capture_default_str();
  embed_cmd->add_option("--lr", embed.config.learning_rate, "initial learning rate")
      ->capture_default_str();
  embed_cmd->add_option("--min-count", embed.min_count, "vocabulary frequency threshold")
      ->capture_default_str();
  embed_cmd->add_option("--seed", embed.config.seed, "seed")
      ->envname("MTLE_SEED")
      ->capture_default_str();
  embed_cmd->set_config("--config");

  TrainArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train the supervised matcher (Model-II) "
                                                    "or evaluate unsupervised matching (Model-I)");
  train_cmd->add_option("--task", train_args.task_paths, "task file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "output checkpoint path");
  train_cmd->add_option("--metrics", train_args.metrics_path,
                        "metrics log path (default: <out>.metrics)");
  train_cmd->add_option("--mode", train_args.mode, "model2 (supervised) or model1 (unsupervised)")
      ->check(CLI::IsMember({"model1", "model2"}))
      ->capture_default_str();
  train_cmd->add_option("--metric", train_args.metric, "model1 matching metric: cosine or l2")
      ->check(CLI::IsMember({"cosine", "l2"}))
      ->capture_default_str();
  train_cmd->add_option("--pretrained", train_args.pretrained,
                        "pretrained vector file for the lookup tables")
      ->check(CLI::ExistingFile);
  train_cmd->add_flag("--csv", train_args.csv, "CSV output instead of aligned text");
  add_train_flags(train_cmd, train_args.flags);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on task files");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "model checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--task", eval_args.task_paths, "task file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_args.split, "train or test")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  eval_cmd->add_flag("--zero-shot", eval_args.zero_shot,
                     "frozen-parameter evaluation of a task the model never trained on");
  eval_cmd->add_flag("--csv", eval_args.csv, "CSV output");
  eval_cmd->add_option("--manifest", eval_args.manifest_path,
                       "write the run manifest here instead of stdout");
  eval_cmd->set_config("--config");

  AddTaskArgs add_args;
  CLI::App* add_cmd =
      app.add_subcommand("add-task", "extend a checkpoint with a new task (hot or cold update)");
  add_cmd->add_option("--checkpoint", add_args.checkpoint, "existing checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  add_cmd->add_option("--task", add_args.task_path, "new task file")
      ->required()
      ->check(CLI::ExistingFile);
  add_cmd->add_option("--data", add_args.data_paths,
                      "old task files (training data for --cold, evaluation data always)")
      ->required()
      ->check(CLI::ExistingFile);
  add_cmd->add_option("--out", add_args.out, "output checkpoint path")->required();
  add_cmd->add_option("--metrics", add_args.metrics_path,
                      "metrics log path (default: <out>.metrics)");
  add_cmd->add_flag("--hot", add_args.hot, "continue training on the new task only");
  add_cmd->add_flag("--cold", add_args.cold, "re-train from scratch on all tasks");
  add_train_flags(add_cmd, add_args.flags);
  add_args.cmd = add_cmd;

  AblateArgs ablate_args;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "train every task subset (1..4 tasks) and emit the gain matrix");
  ablate_cmd->add_option("--task", ablate_args.task_paths, "task file (repeatable, at most 4)")
      ->required()
      ->check(CLI::ExistingFile);
  ablate_cmd->add_option("--outdir", ablate_args.outdir, "output directory")->required();
  ablate_cmd->add_flag("--parallel", ablate_args.parallel, "run subsets on worker threads");
  ablate_cmd->add_flag("--csv", ablate_args.csv, "print the gain matrix as CSV");
  add_train_flags(ablate_cmd, ablate_args.flags);

  GradcheckArgs grad_args;
  CLI::App* grad_cmd = app.add_subcommand(
      "gradcheck", "finite-difference verification of every analytic gradient");
  grad_cmd->add_option("-d,--embedding-dim", grad_args.spec.embedding_dim, "embedding size")
      ->capture_default_str();
  grad_cmd->add_option("-m,--hidden-dim", grad_args.spec.hidden_dim, "hidden size")
      ->capture_default_str();
  grad_cmd->add_option("--labels", grad_args.spec.num_labels, "label count of the probe task")
      ->capture_default_str();
  grad_cmd->add_option("--len", grad_args.lengths, "sequence lengths to sweep")
      ->delimiter(',')
      ->capture_default_str();
  grad_cmd->add_option("--seeds", grad_args.seeds, "number of seeds to sweep")
      ->capture_default_str();
  grad_cmd->add_option("--batch", grad_args.spec.batch_size, "probe batch size")
      ->capture_default_str();
  grad_cmd->add_option("--mode", grad_args.mode, "loss modes: both, literal or one_vs_rest")
      ->capture_default_str();
  grad_cmd->add_option("--eps", grad_args.fd.epsilon, "finite-difference step")
      ->capture_default_str();
  grad_cmd->add_option("--tol", grad_args.fd.tolerance, "max relative error to pass")
      ->capture_default_str();
  grad_cmd->add_option("--l2", grad_args.spec.l2_weight, "L2 weight inside the probe objective")
      ->capture_default_str();
  grad_cmd->add_option("--corrupt", grad_args.spec.corrupt_tensor,
                       "fault injection: double the named tensor's largest gradient entry");
  grad_cmd->add_flag("--tie-lookups", grad_args.tie_lookups, "probe with tied lookup tables");
  grad_cmd->add_flag("--no-matcher-bias", grad_args.no_matcher_bias,
                     "probe without the matcher bias");
  grad_cmd->add_flag("--full-peepholes", grad_args.spec.lstm.full_peepholes,
                     "probe with full peephole matrices");
  grad_cmd->add_flag("--peephole-current-cell", grad_args.spec.lstm.peephole_current_cell,
                     "probe with the current-cell output peephole");
  grad_cmd->add_flag("--candidate-bias", grad_args.spec.lstm.candidate_bias,
                     "probe with a candidate bias");
  grad_cmd->add_flag("--mean-pool", grad_args.spec.lstm.mean_pool,
                     "probe with mean-over-time pooling");
  grad_cmd->set_config("--config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (app.got_subcommand(synth_cmd)) return cmd_synth(synth);
    if (app.got_subcommand(embed_cmd)) return cmd_embed_train(embed);
    if (app.got_subcommand(train_cmd)) return cmd_train(train_args);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(eval_args);
    if (app.got_subcommand(add_cmd)) return cmd_add_task(add_args);
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(ablate_args);
    if (app.got_subcommand(grad_cmd)) return cmd_gradcheck(grad_args);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
