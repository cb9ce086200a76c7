#include "mtle/model.hpp"

#include "mtle/error.hpp"
#include "mtle/rng.hpp"

namespace mtle {

void TaskRegistry::add(const TaskSpec& spec) {
  if (by_id_.count(spec.id))
    throw Error(ErrorKind::DuplicateTaskId, "task '" + spec.id + "' is already registered");
  if (spec.num_labels() < 2)
    throw Error(ErrorKind::InvalidArgument, "task '" + spec.id + "' needs at least two labels");
  by_id_.emplace(spec.id, static_cast<int>(tasks_.size()));
  tasks_.push_back(spec);
}

bool TaskRegistry::contains(const std::string& task_id) const {
  return by_id_.count(task_id) != 0;
}

const TaskSpec& TaskRegistry::at(const std::string& task_id) const {
  auto it = by_id_.find(task_id);
  if (it == by_id_.end())
    throw Error(ErrorKind::UnknownTask, "task '" + task_id + "' is not registered");
  return tasks_[static_cast<std::size_t>(it->second)];
}

TaskSpec& TaskRegistry::at(const std::string& task_id) {
  return const_cast<TaskSpec&>(static_cast<const TaskRegistry*>(this)->at(task_id));
}

Model::Model(Vocabulary vocabulary, ModelOptions opts)
    : vocab(std::move(vocabulary)),
      options(opts),
      lu_input(TableRole::input, vocab.size(), opts.embedding_dim),
      lu_label(TableRole::label, vocab.size(), opts.embedding_dim),
      lstm_input("lstm_input", opts.embedding_dim, opts.hidden_dim, opts.lstm),
      lstm_label("lstm_label", opts.embedding_dim, opts.hidden_dim, opts.lstm),
      matcher(opts.hidden_dim, opts.matcher_bias) {}

std::vector<ParamTensor*> Model::parameters() {
  std::vector<ParamTensor*> list;
  list.push_back(&lu_input.weights);
  if (!options.tie_lookups) list.push_back(&lu_label.weights);
  for (ParamTensor* t : lstm_input.tensors()) list.push_back(t);
  for (ParamTensor* t : lstm_label.tensors()) list.push_back(t);
  for (ParamTensor* t : matcher.tensors()) list.push_back(t);
  return list;
}

std::vector<const ParamTensor*> Model::parameters() const {
  auto mutable_list = const_cast<Model*>(this)->parameters();
  return {mutable_list.begin(), mutable_list.end()};
}

std::vector<ParamTensor*> Model::regularized_parameters() {
  std::vector<ParamTensor*> list;
  for (ParamTensor* t : lstm_input.weight_tensors()) list.push_back(t);
  for (ParamTensor* t : lstm_label.weight_tensors()) list.push_back(t);
  list.push_back(&matcher.weight);
  return list;
}

void Model::init_parameters(double init_std, Rng& rng) {
  for (ParamTensor* t : parameters()) t->init_truncated_normal(rng, init_std);
  lu_input.zero_pad_row();
  lu_label.zero_pad_row();
  bump_version();
}

void Model::set_pretrained(const EmbeddingTable& table, bool input_only) {
  if (table.rows() != vocab.size() || table.dim() != options.embedding_dim)
    throw Error(ErrorKind::DimensionMismatch,
                "pretrained table is " + std::to_string(table.rows()) + "x" +
                    std::to_string(table.dim()) + ", model needs " +
                    std::to_string(vocab.size()) + "x" + std::to_string(options.embedding_dim));
  lu_input.weights.values = table.weights.values;
  if (!input_only && !options.tie_lookups) lu_label.weights.values = table.weights.values;
  lu_input.zero_pad_row();
  lu_label.zero_pad_row();
  bump_version();
}

void Model::extend_vocabulary(const std::vector<std::string>& new_tokens, double init_std,
                              Rng& rng) {
  int added = 0;
  for (const std::string& token : new_tokens)
    if (!vocab.contains(token)) {
      vocab.add(token);
      ++added;
    }
  if (added == 0) return;
  lu_input.append_rows(added, rng, init_std);
  if (!options.tie_lookups) lu_label.append_rows(added, rng, init_std);
  bump_version();
}

void Model::zero_grads() {
  for (ParamTensor* t : parameters()) t->zero_grad();
}

void Model::sgd_step(double learning_rate) {
  for (ParamTensor* t : parameters()) t->values -= learning_rate * t->grads;
  lu_input.zero_pad_row();
  lu_label.zero_pad_row();
  bump_version();
}

std::vector<std::uint8_t> pad_mask(const std::vector<int>& ids) {
  std::vector<std::uint8_t> mask(ids.size(), 1);
  for (std::size_t t = 0; t < ids.size(); ++t)
    if (ids[t] == Vocabulary::kPadId) mask[t] = 0;
  return mask;
}

Eigen::VectorXd Model::encode_input(const std::vector<int>& ids) const {
  if (ids.empty()) throw Error(ErrorKind::EmptySequence, "cannot encode an empty sequence");
  return lstm_encode(lstm_input, lu_input.lookup(ids), pad_mask(ids));
}

const std::vector<Eigen::VectorXd>& Model::label_encodings(const std::string& task_id) const {
  const TaskSpec& task = registry.at(task_id);
  CachedLabels& cache = label_cache_[task_id];
  if (cache.version != version_) {
    cache.encodings.clear();
    cache.encodings.reserve(task.label_tokens.size());
    const EmbeddingTable& table = label_table();
    for (const auto& ids : task.label_tokens)
      cache.encodings.push_back(lstm_encode(lstm_label, table.lookup(ids), pad_mask(ids)));
    cache.version = version_;
  }
  return cache.encodings;
}

std::vector<double> Model::scores_for(const Eigen::VectorXd& x, const std::string& task_id) const {
  const std::vector<Eigen::VectorXd>& labels = label_encodings(task_id);
  std::vector<double> scores(labels.size());
  for (std::size_t j = 0; j < labels.size(); ++j) scores[j] = match_score(matcher, x, labels[j]);
  return scores;
}

int Model::predict(const std::vector<int>& ids, const std::string& task_id) const {
  return argmax_score(scores_for(encode_input(ids), task_id));
}

namespace {

struct LabelForward {
  std::vector<Eigen::VectorXd> encodings;
  std::vector<LstmTape> tapes;
};

LabelForward encode_labels_with_tapes(const Model& model, const TaskSpec& task) {
  LabelForward fwd;
  fwd.encodings.reserve(task.label_tokens.size());
  fwd.tapes.resize(task.label_tokens.size());
  const EmbeddingTable& table = model.label_table();
  for (std::size_t j = 0; j < task.label_tokens.size(); ++j)
    fwd.encodings.push_back(lstm_encode(model.lstm_label, table.lookup(task.label_tokens[j]),
                                        pad_mask(task.label_tokens[j]), &fwd.tapes[j]));
  return fwd;
}

}  // namespace

double accumulate_batch_gradients(Model& model, const TaskSpec& task,
                                  const std::vector<Example>& batch) {
  const int m = model.options.hidden_dim;
  // Labels are fixed within a step: encode once, backpropagate the summed
  // upstream gradient per label once after the sample loop.
  LabelForward labels = encode_labels_with_tapes(model, task);
  std::vector<Eigen::VectorXd> label_grads(labels.encodings.size(), Eigen::VectorXd::Zero(m));

  double loss_sum = 0.0;
  std::vector<Eigen::VectorXd> input_vec_grads;
  for (const Example& example : batch) {
    if (example.gold < 0 || example.gold >= task.num_labels())
      throw Error(ErrorKind::GoldOutOfRange,
                  "task '" + task.id + "': gold " + std::to_string(example.gold));
    LstmTape input_tape;
    std::vector<std::uint8_t> mask = pad_mask(example.tokens);
    Eigen::VectorXd x =
        lstm_encode(model.lstm_input, model.lu_input.lookup(example.tokens), mask, &input_tape);

    std::vector<double> scores(labels.encodings.size());
    for (std::size_t j = 0; j < labels.encodings.size(); ++j)
      scores[j] = match_score(model.matcher, x, labels.encodings[j]);

    loss_sum += sample_loss(scores, example.gold, model.options.loss_mode);

    std::vector<double> score_grads =
        sample_loss_backward(scores, example.gold, model.options.loss_mode);
    Eigen::VectorXd dx = Eigen::VectorXd::Zero(m);
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (score_grads[j] == 0.0) continue;
      match_score_backward(model.matcher, x, labels.encodings[j], scores[j],
                           task.weight * score_grads[j], dx, label_grads[j]);
    }

    lstm_backward(model.lstm_input, input_tape, dx, &input_vec_grads);
    model.lu_input.lookup_backward(example.tokens, input_vec_grads);
  }

  EmbeddingTable& table = model.label_table();
  std::vector<Eigen::VectorXd> label_vec_grads;
  for (std::size_t j = 0; j < labels.encodings.size(); ++j) {
    lstm_backward(model.lstm_label, labels.tapes[j], label_grads[j], &label_vec_grads);
    table.lookup_backward(task.label_tokens[j], label_vec_grads);
  }
  return task.weight * loss_sum;
}

double batch_loss(const Model& model, const TaskSpec& task, const std::vector<Example>& batch) {
  std::vector<Eigen::VectorXd> labels;
  labels.reserve(task.label_tokens.size());
  const EmbeddingTable& table = model.label_table();
  for (const auto& ids : task.label_tokens)
    labels.push_back(lstm_encode(model.lstm_label, table.lookup(ids), pad_mask(ids)));

  double loss_sum = 0.0;
  for (const Example& example : batch) {
    Eigen::VectorXd x = model.encode_input(example.tokens);
    std::vector<double> scores(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j)
      scores[j] = match_score(model.matcher, x, labels[j]);
    loss_sum += sample_loss(scores, example.gold, model.options.loss_mode);
  }
  return task.weight * loss_sum;
}

}  // namespace mtle
