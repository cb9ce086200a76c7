#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtle {

// Lowercase + whitespace split; leading/trailing punctuation of each chunk
// becomes its own single-character token ("great movie!" -> great, movie, !).
std::vector<std::string> tokenize(const std::string& text);

class Vocabulary {
 public:
  static constexpr int kUnkId = 0;
  static constexpr int kPadId = 1;
  static constexpr const char* kUnkToken = "<unk>";
  static constexpr const char* kPadToken = "<pad>";

  Vocabulary();

  int size() const { return static_cast<int>(tokens_.size()); }

  // UNK id for tokens that are not present.
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;

  // Appends the token if absent; returns its id. Existing ids never move,
  // which is what keeps embedding rows aligned across hot updates.
  int add(const std::string& token);

  std::vector<int> map(const std::vector<std::string>& tokens) const;

  // Tokens in id order, including the two specials at 0 and 1.
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Vocabulary over every corpus sequence: tokens with frequency >= min_count,
// ordered by descending frequency then lexicographically. The corpora must
// contain both input sequences and the label phrases of every task.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpora,
                            int min_count = 1);

// Frequency-ordered token list (same ordering rule as build_vocabulary) of
// tokens that are absent from `vocab`; used to grow a vocabulary in place.
std::vector<std::string> novel_tokens(const std::vector<std::vector<std::string>>& corpora,
                                      const Vocabulary& vocab, int min_count = 1);

struct TaskSpec {
  std::string id;
  double weight = 1.0;  // loss weight of this task
  std::vector<std::string> label_names;                // phrases exactly as declared
  std::vector<std::vector<std::string>> label_words;   // tokenized phrases
  std::vector<std::vector<int>> label_tokens;          // id-mapped phrases

  int num_labels() const { return static_cast<int>(label_names.size()); }
};

struct Example {
  std::string task_id;
  std::vector<int> tokens;
  int gold = 0;
};

struct DatasetSplit {
  std::vector<Example> examples;

  bool empty() const { return examples.empty(); }
  int size() const { return static_cast<int>(examples.size()); }
};

struct TaskData {
  TaskSpec spec;
  DatasetSplit train;
  DatasetSplit test;
};

// A task file before any vocabulary exists: tokenized but not id-mapped.
struct RawRecord {
  bool is_test = false;
  int label = 0;
  std::string text;                 // raw text exactly as read/generated
  std::vector<std::string> words;   // tokenize(text)
  int line_no = 0;
};

struct RawTask {
  std::string id;
  double weight = 1.0;
  std::vector<std::string> label_names;
  std::vector<std::vector<std::string>> label_words;
  std::vector<RawRecord> records;
};

RawTask parse_task_file(const std::string& path);
RawTask parse_task_text(const std::string& text, const std::string& origin);

// Token-string sequences this task contributes to vocabulary construction:
// every train-split input plus every label phrase.
std::vector<std::vector<std::string>> vocabulary_corpora(const RawTask& task);

TaskData resolve_task(const RawTask& raw, const Vocabulary& vocab);
TaskData load_task_dataset(const std::string& path, const Vocabulary& vocab);

std::string format_task_file(const RawTask& task);
void write_task_file(const RawTask& task, const std::string& path);

enum class SyntheticScenario { cardinality, domain, objective };

SyntheticScenario parse_scenario(const std::string& name);
const char* to_string(SyntheticScenario scenario);

// Deterministic keyword-separable tasks standing in for external corpora.
// Every label is signaled by a disjoint keyword set planted in random filler;
// `domain` shares label phrases across tasks over disjoint filler
// vocabularies, `objective` uses disjoint label sets, `cardinality` mixes a
// 2-class long-sequence task with a 5-class short-sequence task.
std::vector<RawTask> generate_synthetic_tasks(std::uint64_t seed, SyntheticScenario scenario,
                                              const std::vector<int>& sizes);

}  // namespace mtle
