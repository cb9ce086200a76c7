#include "mtle/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtle/error.hpp"
#include "mtle/version.hpp"

namespace mtle {

namespace {

constexpr char kMagic[8] = {'M', 'T', 'L', 'E', 'c', 'k', 'p', 't'};

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) { raw(&v, sizeof(v)); }
  void u64(std::uint64_t v) { raw(&v, sizeof(v)); }
  void i32(std::int32_t v) { raw(&v, sizeof(v)); }
  void f64(double v) { raw(&v, sizeof(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  void matrix(const Eigen::MatrixXd& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  std::string take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() { return scalar<std::uint32_t>(); }
  std::uint64_t u64() { return scalar<std::uint64_t>(); }
  std::int32_t i32() { return scalar<std::int32_t>(); }
  double f64() { return scalar<double>(); }
  std::string str() {
    std::uint32_t len = u32();
    if (len > bytes_.size() - pos_) corrupt("string overruns payload");
    const char* p = take(len);
    return std::string(p, len);
  }
  Eigen::MatrixXd matrix() {
    std::uint32_t rows = u32();
    std::uint32_t cols = u32();
    std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    if (count * sizeof(double) > bytes_.size() - pos_) corrupt("matrix overruns payload");
    Eigen::MatrixXd m(rows, cols);
    std::memcpy(m.data(), take(count * sizeof(double)), count * sizeof(double));
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] static void corrupt(const std::string& why) {
    throw Error(ErrorKind::CorruptCheckpoint, why);
  }

 private:
  template <typename T>
  T scalar() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) corrupt("payload truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

void write_config(Writer& w, const TrainConfig& c) {
  w.i32(c.embedding_dim);
  w.i32(c.hidden_dim);
  w.i32(c.batch_size);
  w.f64(c.learning_rate);
  w.f64(c.lr_decay);
  w.f64(c.l2_weight);
  w.i32(c.epochs);
  w.u64(c.seed);
  w.u8(c.loss_mode == LossMode::literal ? 0 : 1);
  w.f64(c.init_std);
  w.f64(c.clip_norm);
  w.i32(c.min_count);
  w.u8(c.tie_lookups ? 1 : 0);
  w.u8(c.matcher_bias ? 1 : 0);
  w.u8(c.lstm.full_peepholes ? 1 : 0);
  w.u8(c.lstm.peephole_current_cell ? 1 : 0);
  w.u8(c.lstm.candidate_bias ? 1 : 0);
  w.u8(c.lstm.mean_pool ? 1 : 0);
}

TrainConfig read_config(Reader& r) {
  TrainConfig c;
  c.embedding_dim = r.i32();
  c.hidden_dim = r.i32();
  c.batch_size = r.i32();
  c.learning_rate = r.f64();
  c.lr_decay = r.f64();
  c.l2_weight = r.f64();
  c.epochs = r.i32();
  c.seed = r.u64();
  c.loss_mode = r.u8() == 0 ? LossMode::literal : LossMode::one_vs_rest;
  c.init_std = r.f64();
  c.clip_norm = r.f64();
  c.min_count = r.i32();
  c.tie_lookups = r.u8() != 0;
  c.matcher_bias = r.u8() != 0;
  c.lstm.full_peepholes = r.u8() != 0;
  c.lstm.peephole_current_cell = r.u8() != 0;
  c.lstm.candidate_bias = r.u8() != 0;
  c.lstm.mean_pool = r.u8() != 0;
  return c;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320U ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t crc = 0xffffffffU;
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ p[i]) & 0xffU] ^ (crc >> 8);
  return crc ^ 0xffffffffU;
}

std::string serialize_checkpoint(const Model& model, const TrainConfig& config,
                                 const RngStateBundle& rng) {
  Writer payload;

  // model options
  payload.i32(model.options.embedding_dim);
  payload.i32(model.options.hidden_dim);
  payload.u8(model.options.tie_lookups ? 1 : 0);
  payload.u8(model.options.matcher_bias ? 1 : 0);
  payload.u8(model.options.loss_mode == LossMode::literal ? 0 : 1);
  payload.u8(model.options.lstm.full_peepholes ? 1 : 0);
  payload.u8(model.options.lstm.peephole_current_cell ? 1 : 0);
  payload.u8(model.options.lstm.candidate_bias ? 1 : 0);
  payload.u8(model.options.lstm.mean_pool ? 1 : 0);

  // vocabulary (specials at 0/1 are implicit)
  payload.u32(static_cast<std::uint32_t>(model.vocab.size()));
  for (int id = 2; id < model.vocab.size(); ++id) payload.str(model.vocab.token(id));

  // trainable tensors, by name
  std::vector<const ParamTensor*> params = model.parameters();
  payload.u32(static_cast<std::uint32_t>(params.size()));
  for (const ParamTensor* t : params) {
    payload.str(t->name);
    payload.matrix(t->values);
  }

  // registry
  payload.u32(static_cast<std::uint32_t>(model.registry.size()));
  for (const TaskSpec& task : model.registry.tasks()) {
    payload.str(task.id);
    payload.f64(task.weight);
    payload.u32(static_cast<std::uint32_t>(task.num_labels()));
    for (int j = 0; j < task.num_labels(); ++j) {
      payload.str(task.label_names[static_cast<std::size_t>(j)]);
      const auto& words = task.label_words[static_cast<std::size_t>(j)];
      payload.u32(static_cast<std::uint32_t>(words.size()));
      for (const std::string& w : words) payload.str(w);
      const auto& ids = task.label_tokens[static_cast<std::size_t>(j)];
      payload.u32(static_cast<std::uint32_t>(ids.size()));
      for (int id : ids) payload.i32(id);
    }
  }

  write_config(payload, config);

  payload.u64(rng.seed);
  payload.u32(static_cast<std::uint32_t>(rng.words.size()));
  for (std::uint64_t w : rng.words) payload.u64(w);

  std::string body = payload.take();
  Writer out;
  for (char c : kMagic) out.u8(static_cast<std::uint8_t>(c));
  out.u32(kCheckpointFormatVersion);
  out.u64(body.size());
  std::string head = out.take();
  std::uint32_t checksum = crc32(body.data(), body.size());
  std::string bytes = head + body;
  bytes.append(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
  return bytes;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::size_t header_size = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (bytes.size() < header_size + sizeof(std::uint32_t))
    Reader::corrupt("file smaller than checkpoint header");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    Reader::corrupt("bad magic, not a checkpoint file");
  std::uint32_t version;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kCheckpointFormatVersion)
    throw Error(ErrorKind::VersionMismatch,
                "checkpoint format version " + std::to_string(version) + ", engine supports " +
                    std::to_string(kCheckpointFormatVersion));
  std::uint64_t payload_size;
  std::memcpy(&payload_size, bytes.data() + sizeof(kMagic) + sizeof(version),
              sizeof(payload_size));
  if (bytes.size() != header_size + payload_size + sizeof(std::uint32_t))
    Reader::corrupt("payload size disagrees with file size");
  std::string body = bytes.substr(header_size, payload_size);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + header_size + payload_size, sizeof(stored));
  if (stored != crc32(body.data(), body.size())) Reader::corrupt("checksum mismatch");

  Reader r(body);
  ModelOptions options;
  options.embedding_dim = r.i32();
  options.hidden_dim = r.i32();
  options.tie_lookups = r.u8() != 0;
  options.matcher_bias = r.u8() != 0;
  options.loss_mode = r.u8() == 0 ? LossMode::literal : LossMode::one_vs_rest;
  options.lstm.full_peepholes = r.u8() != 0;
  options.lstm.peephole_current_cell = r.u8() != 0;
  options.lstm.candidate_bias = r.u8() != 0;
  options.lstm.mean_pool = r.u8() != 0;

  std::uint32_t vocab_size = r.u32();
  if (vocab_size < 2) Reader::corrupt("vocabulary smaller than the specials");
  Vocabulary vocab;
  for (std::uint32_t id = 2; id < vocab_size; ++id) vocab.add(r.str());

  Checkpoint checkpoint{Model(std::move(vocab), options), TrainConfig{}, RngStateBundle{}};
  Model& model = checkpoint.model;

  std::uint32_t tensor_count = r.u32();
  std::vector<ParamTensor*> params = model.parameters();
  if (tensor_count != params.size()) Reader::corrupt("tensor count disagrees with options");
  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    std::string name = r.str();
    Eigen::MatrixXd values = r.matrix();
    if (name != params[i]->name) Reader::corrupt("unexpected tensor '" + name + "'");
    if (values.rows() != params[i]->rows() || values.cols() != params[i]->cols())
      Reader::corrupt("tensor '" + name + "' has wrong shape");
    params[i]->values = std::move(values);
  }

  std::uint32_t task_count = r.u32();
  for (std::uint32_t k = 0; k < task_count; ++k) {
    TaskSpec task;
    task.id = r.str();
    task.weight = r.f64();
    std::uint32_t labels = r.u32();
    for (std::uint32_t j = 0; j < labels; ++j) {
      task.label_names.push_back(r.str());
      std::uint32_t words = r.u32();
      std::vector<std::string> phrase;
      for (std::uint32_t w = 0; w < words; ++w) phrase.push_back(r.str());
      task.label_words.push_back(std::move(phrase));
      std::uint32_t ids = r.u32();
      std::vector<int> tokens;
      for (std::uint32_t t = 0; t < ids; ++t) tokens.push_back(r.i32());
      task.label_tokens.push_back(std::move(tokens));
    }
    model.registry.add(task);
  }

  checkpoint.config = read_config(r);

  checkpoint.rng.seed = r.u64();
  std::uint32_t rng_words = r.u32();
  for (std::uint32_t i = 0; i < rng_words; ++i) checkpoint.rng.words.push_back(r.u64());

  if (!r.done()) Reader::corrupt("trailing bytes after payload");
  model.bump_version();
  return checkpoint;
}

void save_checkpoint(const Model& model, const TrainConfig& config, const std::string& path,
                     const RngStateBundle& rng) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write checkpoint '" + path + "'");
  std::string bytes = serialize_checkpoint(model, config, rng);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoError, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace mtle
