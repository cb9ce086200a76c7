#include "mtle/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtle/corpus.hpp"
#include "mtle/error.hpp"
#include "mtle/rng.hpp"

namespace mtle {

EmbeddingTable::EmbeddingTable(TableRole table_role, int vocab_size, int dim)
    : role(table_role),
      weights(table_role == TableRole::input ? "lu_input.weights" : "lu_label.weights",
              vocab_size, dim) {}

std::vector<Eigen::VectorXd> EmbeddingTable::lookup(const std::vector<int>& ids) const {
  std::vector<Eigen::VectorXd> out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= rows())
      throw Error(ErrorKind::IdOutOfRange, weights.name + ": token id " + std::to_string(id) +
                                               " outside table with " + std::to_string(rows()) +
                                               " rows");
    out.emplace_back(weights.values.row(id).transpose());
  }
  return out;
}

void EmbeddingTable::lookup_backward(const std::vector<int>& ids,
                                     const std::vector<Eigen::VectorXd>& grads) {
  if (ids.size() != grads.size())
    throw Error(ErrorKind::ShapeMismatch,
                weights.name + ": " + std::to_string(grads.size()) + " gradients for " +
                    std::to_string(ids.size()) + " ids");
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (grads[t].size() != dim())
      throw Error(ErrorKind::ShapeMismatch,
                  weights.name + ": upstream gradient has length " +
                      std::to_string(grads[t].size()) + ", expected " + std::to_string(dim()));
    int id = ids[t];
    if (id < 0 || id >= rows())
      throw Error(ErrorKind::IdOutOfRange, weights.name + ": token id " + std::to_string(id));
    if (id == Vocabulary::kPadId) continue;
    weights.grads.row(id) += grads[t].transpose();
  }
}

void EmbeddingTable::append_rows(int count, Rng& rng, double init_std) {
  if (count <= 0) return;
  Eigen::Index old_rows = weights.values.rows();
  weights.values.conservativeResize(old_rows + count, Eigen::NoChange);
  weights.grads.conservativeResize(old_rows + count, Eigen::NoChange);
  weights.grads.bottomRows(count).setZero();
  for (Eigen::Index r = old_rows; r < weights.values.rows(); ++r)
    for (Eigen::Index c = 0; c < weights.values.cols(); ++c)
      weights.values(r, c) = rng.truncated_normal(init_std);
}

void EmbeddingTable::zero_pad_row() {
  weights.values.row(Vocabulary::kPadId).setZero();
  weights.grads.row(Vocabulary::kPadId).setZero();
}

Eigen::VectorXd average_pool(const std::vector<Eigen::VectorXd>& vectors,
                             const std::vector<std::uint8_t>& valid) {
  if (vectors.size() != valid.size())
    throw Error(ErrorKind::ShapeMismatch, "average_pool: mask length " +
                                              std::to_string(valid.size()) + " for " +
                                              std::to_string(vectors.size()) + " vectors");
  Eigen::VectorXd sum;
  int count = 0;
  for (std::size_t t = 0; t < vectors.size(); ++t) {
    if (!valid[t]) continue;
    if (count == 0)
      sum = vectors[t];
    else
      sum += vectors[t];
    ++count;
  }
  if (count == 0) throw Error(ErrorKind::EmptySequence, "average_pool: no valid positions");
  return sum / static_cast<double>(count);
}

Eigen::VectorXd average_pool(const std::vector<Eigen::VectorXd>& vectors) {
  return average_pool(vectors, std::vector<std::uint8_t>(vectors.size(), 1));
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Cumulative unigram^(3/4) sampler.
class NoiseDistribution {
 public:
  NoiseDistribution(const std::vector<std::vector<int>>& corpora, int vocab_size) {
    std::vector<double> counts(static_cast<std::size_t>(vocab_size), 0.0);
    for (const auto& seq : corpora)
      for (int id : seq)
        if (id != Vocabulary::kPadId) counts[static_cast<std::size_t>(id)] += 1.0;
    cumulative_.resize(counts.size());
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      total += std::pow(counts[i], 0.75);
      cumulative_[i] = total;
    }
    if (total <= 0.0) throw Error(ErrorKind::EmptyCorpora, "skip-gram corpus has no tokens");
  }

  int sample(Rng& rng) const {
    double u = rng.uniform() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return static_cast<int>(it - cumulative_.begin());
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpora, int vocab_size,
                              const SkipGramConfig& config) {
  if (config.window < 1 || config.negatives < 1)
    throw Error(ErrorKind::InvalidArgument, "skip-gram needs window >= 1 and negatives >= 1");
  long total_tokens = 0;
  for (const auto& seq : corpora) total_tokens += static_cast<long>(seq.size());
  if (corpora.empty() || total_tokens == 0)
    throw Error(ErrorKind::EmptyCorpora, "skip-gram corpus is empty");
  for (const auto& seq : corpora)
    for (int id : seq)
      if (id < 0 || id >= vocab_size)
        throw Error(ErrorKind::IdOutOfRange, "skip-gram corpus id " + std::to_string(id));

  SkipGramResult result;
  result.table = EmbeddingTable(TableRole::input, vocab_size, config.dim);

  Rng rng = Rng::stream(config.seed, "skipgram");
  Eigen::MatrixXd& input = result.table.weights.values;
  for (Eigen::Index r = 0; r < input.rows(); ++r)
    for (Eigen::Index c = 0; c < input.cols(); ++c)
      input(r, c) = rng.uniform(-0.5 / config.dim, 0.5 / config.dim);
  result.table.zero_pad_row();
  Eigen::MatrixXd context = Eigen::MatrixXd::Zero(vocab_size, config.dim);

  if (config.epochs == 0) return result;

  NoiseDistribution noise(corpora, vocab_size);
  const double total_centers =
      static_cast<double>(total_tokens) * static_cast<double>(config.epochs);
  long processed = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    long epoch_pairs = 0;
    for (const auto& seq : corpora) {
      const int len = static_cast<int>(seq.size());
      for (int t = 0; t < len; ++t) {
        ++processed;
        const int center = seq[static_cast<std::size_t>(t)];
        if (center == Vocabulary::kPadId) continue;
        const double alpha =
            config.learning_rate *
            std::max(1.0 - static_cast<double>(processed) / (total_centers + 1.0), 1e-4);
        const int span = 1 + static_cast<int>(rng.uniform_int(
                                 static_cast<std::uint64_t>(config.window)));
        for (int off = -span; off <= span; ++off) {
          const int pos = t + off;
          if (off == 0 || pos < 0 || pos >= len) continue;
          const int target = seq[static_cast<std::size_t>(pos)];
          if (target == Vocabulary::kPadId) continue;

          Eigen::VectorXd center_vec = input.row(center).transpose();
          Eigen::VectorXd center_grad = Eigen::VectorXd::Zero(config.dim);
          double pair_loss = 0.0;

          double z = context.row(target).dot(center_vec);
          double s = sigmoid(z);
          pair_loss -= std::log(std::max(s, 1e-12));
          center_grad += (s - 1.0) * context.row(target).transpose();
          context.row(target) += (-alpha * (s - 1.0)) * center_vec.transpose();

          for (int n = 0; n < config.negatives; ++n) {
            int negative = noise.sample(rng);
            if (negative == target) continue;
            double zn = context.row(negative).dot(center_vec);
            double sn = sigmoid(zn);
            pair_loss -= std::log(std::max(1.0 - sn, 1e-12));
            center_grad += sn * context.row(negative).transpose();
            context.row(negative) += (-alpha * sn) * center_vec.transpose();
          }

          input.row(center) -= alpha * center_grad.transpose();
          epoch_loss += pair_loss;
          ++epoch_pairs;
        }
      }
    }
    result.epoch_loss.push_back(epoch_pairs > 0 ? epoch_loss / static_cast<double>(epoch_pairs)
                                                : 0.0);
  }
  result.table.zero_pad_row();
  return result;
}

EmbeddingTable load_pretrained(const std::string& path, const Vocabulary& vocab, int dim,
                               double init_std, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open vector file '" + path + "'");

  EmbeddingTable table(TableRole::input, vocab.size(), dim);
  std::vector<std::uint8_t> filled(static_cast<std::size_t>(vocab.size()), 0);

  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;

    if (first) {
      first = false;
      // Optional "<count> <dim>" header.
      std::string second;
      std::istringstream probe(line);
      std::string a, b, extra;
      probe >> a >> b >> extra;
      if (extra.empty() && !b.empty() &&
          a.find_first_not_of("0123456789") == std::string::npos &&
          b.find_first_not_of("0123456789") == std::string::npos) {
        int file_dim = std::stoi(b);
        if (file_dim != dim)
          throw Error(ErrorKind::DimensionMismatch,
                      path + ": file declares dim " + std::to_string(file_dim) +
                          ", engine configured dim " + std::to_string(dim));
        continue;
      }
    }

    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (fields.fail() && !fields.eof())
      throw Error(ErrorKind::MalformedVectorLine,
                  path + ":" + std::to_string(line_no) + ": non-numeric vector component");
    if (static_cast<int>(values.size()) != dim)
      throw Error(ErrorKind::DimensionMismatch,
                  path + ":" + std::to_string(line_no) + ": vector for '" + word + "' has " +
                      std::to_string(values.size()) + " components, expected " +
                      std::to_string(dim));
    if (!vocab.contains(word)) continue;
    int id = vocab.id(word);
    for (int c = 0; c < dim; ++c) table.weights.values(id, c) = values[static_cast<std::size_t>(c)];
    filled[static_cast<std::size_t>(id)] = 1;
  }

  Rng rng = Rng::stream(seed, "pretrained-fill");
  for (int id = 0; id < vocab.size(); ++id) {
    if (filled[static_cast<std::size_t>(id)] || id == Vocabulary::kPadId) continue;
    for (int c = 0; c < dim; ++c) table.weights.values(id, c) = rng.truncated_normal(init_std);
  }
  table.zero_pad_row();
  return table;
}

void save_embedding_file(const EmbeddingTable& table, const Vocabulary& vocab,
                         const std::string& path) {
  if (table.rows() != vocab.size())
    throw Error(ErrorKind::DimensionMismatch, "table has " + std::to_string(table.rows()) +
                                                  " rows for vocabulary of " +
                                                  std::to_string(vocab.size()));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write vector file '" + path + "'");
  out << vocab.size() << ' ' << table.dim() << '\n';
  char buf[64];
  for (int id = 0; id < vocab.size(); ++id) {
    out << vocab.token(id);
    for (int c = 0; c < table.dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", table.weights.values(id, c));
      out << ' ' << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::IoError, "failed writing vector file '" + path + "'");
}

}  // namespace mtle
