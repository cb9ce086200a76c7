#include "mtle/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mtle/error.hpp"
#include "mtle/rng.hpp"

namespace mtle {

namespace {

bool is_space_byte(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct_byte(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string ascii_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_on_tab(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_weight(const std::string& field, int line_no, const std::string& origin) {
  char* end = nullptr;
  double value = std::strtod(field.c_str(), &end);
  if (field.empty() || end != field.c_str() + field.size() || value < 0.0)
    throw Error(ErrorKind::MalformedRecord,
                origin + ":" + std::to_string(line_no) + ": bad task weight '" + field + "'");
  return value;
}

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    while (i < n && is_space_byte(text[i])) ++i;
    std::size_t j = i;
    while (j < n && !is_space_byte(text[j])) ++j;
    if (j > i) {
      std::size_t begin = i, end = j;
      while (begin < end && is_punct_byte(text[begin])) {
        out.emplace_back(1, text[begin]);
        ++begin;
      }
      std::size_t core_end = end;
      while (core_end > begin && is_punct_byte(text[core_end - 1])) --core_end;
      if (core_end > begin) out.push_back(ascii_lower(text.substr(begin, core_end - begin)));
      for (std::size_t k = core_end; k < end; ++k) out.emplace_back(1, text[k]);
    }
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary() {
  tokens_ = {kUnkToken, kPadToken};
  index_ = {{kUnkToken, kUnkId}, {kPadToken, kPadId}};
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw Error(ErrorKind::IdOutOfRange,
                "token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(size()));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  int id = size();
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::vector<int> Vocabulary::map(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& tok : tokens) ids.push_back(id(tok));
  return ids;
}

namespace {

// Shared ordering rule: descending frequency, ties lexicographic.
std::vector<std::string> ordered_survivors(const std::vector<std::vector<std::string>>& corpora,
                                           int min_count) {
  std::map<std::string, long> counts;
  for (const auto& seq : corpora)
    for (const std::string& tok : seq) {
      if (tok == Vocabulary::kUnkToken || tok == Vocabulary::kPadToken) continue;
      ++counts[tok];
    }
  std::vector<std::pair<std::string, long>> survivors;
  for (const auto& [tok, count] : counts)
    if (count >= min_count) survivors.emplace_back(tok, count);
  std::sort(survivors.begin(), survivors.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> ordered;
  ordered.reserve(survivors.size());
  for (auto& [tok, count] : survivors) ordered.push_back(std::move(tok));
  return ordered;
}

}  // namespace

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& corpora, int min_count) {
  if (min_count < 1) throw Error(ErrorKind::InvalidArgument, "min_count must be >= 1");
  std::vector<std::string> ordered = ordered_survivors(corpora, min_count);
  if (ordered.empty())
    throw Error(ErrorKind::AllTokensFiltered,
                "no token reaches min_count=" + std::to_string(min_count));
  Vocabulary vocab;
  for (const std::string& tok : ordered) vocab.add(tok);
  return vocab;
}

std::vector<std::string> novel_tokens(const std::vector<std::vector<std::string>>& corpora,
                                      const Vocabulary& vocab, int min_count) {
  std::vector<std::string> fresh;
  for (std::string& tok : ordered_survivors(corpora, min_count))
    if (!vocab.contains(tok)) fresh.push_back(std::move(tok));
  return fresh;
}

RawTask parse_task_text(const std::string& text, const std::string& origin) {
  std::vector<std::string> lines;
  {
    std::string line;
    std::istringstream in(text);
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  RawTask task;
  int header_seen = 0;               // 0 = expecting task line, 1 = expecting labels line
  std::map<std::string, int> label_index;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int line_no = static_cast<int>(li) + 1;
    const std::string& line = lines[li];
    if (line.empty()) continue;
    std::vector<std::string> fields = split_on_tab(line);
    auto fail = [&](const std::string& why) -> Error {
      return Error(ErrorKind::MalformedRecord,
                   origin + ":" + std::to_string(line_no) + ": " + why);
    };

    if (header_seen == 0) {
      if (fields.size() != 3 || fields[0] != "task" || fields[1].empty())
        throw fail("expected 'task\\t<id>\\t<weight>'");
      task.id = fields[1];
      task.weight = parse_weight(fields[2], line_no, origin);
      header_seen = 1;
      continue;
    }
    if (header_seen == 1) {
      if (fields.size() < 3 || fields[0] != "labels")
        throw fail("expected 'labels' line with at least two label phrases");
      std::set<std::vector<std::string>> seen;
      for (std::size_t f = 1; f < fields.size(); ++f) {
        std::vector<std::string> words = tokenize(fields[f]);
        if (words.empty()) throw fail("label phrase '" + fields[f] + "' has no tokens");
        if (!seen.insert(words).second)
          throw fail("label phrases must be pairwise distinct as token sequences");
        label_index[fields[f]] = static_cast<int>(task.label_names.size());
        task.label_names.push_back(fields[f]);
        task.label_words.push_back(std::move(words));
      }
      header_seen = 2;
      continue;
    }

    if (fields.size() != 3) throw fail("expected '<split>\\t<label>\\t<text>'");
    RawRecord record;
    if (fields[0] == "train")
      record.is_test = false;
    else if (fields[0] == "test")
      record.is_test = true;
    else
      throw fail("split must be 'train' or 'test', got '" + fields[0] + "'");
    auto it = label_index.find(fields[1]);
    if (it == label_index.end())
      throw Error(ErrorKind::UnknownLabel, origin + ":" + std::to_string(line_no) +
                                               ": label '" + fields[1] +
                                               "' is not declared for task '" + task.id + "'");
    record.label = it->second;
    record.text = fields[2];
    record.words = tokenize(record.text);
    if (record.words.empty()) throw fail("record text has no tokens");
    record.line_no = line_no;
    task.records.push_back(std::move(record));
  }
  if (header_seen < 2)
    throw Error(ErrorKind::MalformedRecord, origin + ": missing task/labels header");
  return task;
}

RawTask parse_task_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open task file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_task_text(buf.str(), path);
}

std::vector<std::vector<std::string>> vocabulary_corpora(const RawTask& task) {
  std::vector<std::vector<std::string>> corpora;
  for (const RawRecord& record : task.records)
    if (!record.is_test) corpora.push_back(record.words);
  for (const auto& words : task.label_words) corpora.push_back(words);
  return corpora;
}

TaskData resolve_task(const RawTask& raw, const Vocabulary& vocab) {
  TaskData data;
  data.spec.id = raw.id;
  data.spec.weight = raw.weight;
  data.spec.label_names = raw.label_names;
  data.spec.label_words = raw.label_words;
  for (const auto& words : raw.label_words) data.spec.label_tokens.push_back(vocab.map(words));
  for (const RawRecord& record : raw.records) {
    Example ex;
    ex.task_id = raw.id;
    ex.tokens = vocab.map(record.words);
    ex.gold = record.label;
    (record.is_test ? data.test : data.train).examples.push_back(std::move(ex));
  }
  return data;
}

TaskData load_task_dataset(const std::string& path, const Vocabulary& vocab) {
  return resolve_task(parse_task_file(path), vocab);
}

std::string format_task_file(const RawTask& task) {
  std::ostringstream out;
  out << "task\t" << task.id << '\t' << format_double(task.weight) << '\n';
  out << "labels";
  for (const std::string& name : task.label_names) out << '\t' << name;
  out << '\n';
  for (const RawRecord& record : task.records)
    out << (record.is_test ? "test" : "train") << '\t' << task.label_names[record.label] << '\t'
        << record.text << '\n';
  return out.str();
}

void write_task_file(const RawTask& task, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write task file '" + path + "'");
  out << format_task_file(task);
  if (!out) throw Error(ErrorKind::IoError, "failed writing task file '" + path + "'");
}

SyntheticScenario parse_scenario(const std::string& name) {
  if (name == "cardinality") return SyntheticScenario::cardinality;
  if (name == "domain") return SyntheticScenario::domain;
  if (name == "objective") return SyntheticScenario::objective;
  throw Error(ErrorKind::InvalidArgument,
              "unknown scenario '" + name + "' (expected cardinality|domain|objective)");
}

const char* to_string(SyntheticScenario scenario) {
  switch (scenario) {
    case SyntheticScenario::cardinality: return "cardinality";
    case SyntheticScenario::domain: return "domain";
    case SyntheticScenario::objective: return "objective";
  }
  return "?";
}

namespace {

// Pronounceable filler/keyword words, collision-checked against everything
// generated so far and against all label words.
class WordForge {
 public:
  explicit WordForge(Rng& rng) : rng_(rng) {}

  void reserve(const std::string& word) { used_.insert(word); }

  std::string fresh() {
    static const char consonants[] = "bdfgklmnprstvz";
    static const char vowels[] = "aeiou";
    for (;;) {
      int syllables = 2 + static_cast<int>(rng_.uniform_int(3));  // 2..4
      std::string word;
      for (int s = 0; s < syllables; ++s) {
        word += consonants[rng_.uniform_int(sizeof(consonants) - 1)];
        word += vowels[rng_.uniform_int(sizeof(vowels) - 1)];
      }
      if (used_.insert(word).second) return word;
    }
  }

  std::vector<std::string> fresh_batch(int count) {
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) words.push_back(fresh());
    return words;
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> used_;
};

// Label tokens that appear in exactly one of the task's label phrases; these
// double as class keywords (sentences about a class may literally contain its
// label word, which is what gives Model-I and Zero Update signal).
std::vector<std::vector<std::string>> unique_label_tokens(
    const std::vector<std::vector<std::string>>& label_words) {
  std::map<std::string, int> occurrences;
  for (const auto& words : label_words) {
    std::set<std::string> distinct(words.begin(), words.end());
    for (const auto& w : distinct) ++occurrences[w];
  }
  std::vector<std::vector<std::string>> unique(label_words.size());
  for (std::size_t j = 0; j < label_words.size(); ++j)
    for (const auto& w : label_words[j])
      if (occurrences[w] == 1) unique[j].push_back(w);
  return unique;
}

struct TaskRecipe {
  std::string id;
  std::vector<std::string> label_phrases;
  std::vector<std::vector<std::string>> keywords;  // per class, disjoint
  std::vector<std::string> fillers;
  int train_count = 0;
  int mean_length = 20;
};

RawTask build_synthetic_task(const TaskRecipe& recipe, Rng& rng) {
  RawTask task;
  task.id = recipe.id;
  task.weight = 1.0;
  task.label_names = recipe.label_phrases;
  for (const auto& phrase : recipe.label_phrases) task.label_words.push_back(tokenize(phrase));

  const int num_classes = static_cast<int>(recipe.label_phrases.size());
  const int test_count = std::max(20, recipe.train_count / 5);
  const int min_len = std::max(3, recipe.mean_length / 2);
  const int max_len = recipe.mean_length + recipe.mean_length / 2;

  auto make_records = [&](int count, bool is_test) {
    std::vector<RawRecord> records;
    records.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      RawRecord record;
      record.is_test = is_test;
      record.label = i % num_classes;  // balanced classes
      const auto& pool = recipe.keywords[static_cast<std::size_t>(record.label)];
      int length = min_len + static_cast<int>(rng.uniform_int(
                                 static_cast<std::uint64_t>(max_len - min_len + 1)));
      record.words.resize(static_cast<std::size_t>(length));
      for (auto& slot : record.words)
        slot = recipe.fillers[rng.uniform_int(recipe.fillers.size())];
      int num_keywords = 1 + static_cast<int>(rng.uniform_int(3));  // 1..3
      num_keywords = std::min(num_keywords, length);
      std::vector<int> positions(static_cast<std::size_t>(length));
      for (int p = 0; p < length; ++p) positions[static_cast<std::size_t>(p)] = p;
      rng.shuffle(positions);
      for (int k = 0; k < num_keywords; ++k)
        record.words[static_cast<std::size_t>(positions[static_cast<std::size_t>(k)])] =
            pool[rng.uniform_int(pool.size())];
      std::string text;
      for (std::size_t w = 0; w < record.words.size(); ++w) {
        if (w) text += ' ';
        text += record.words[w];
      }
      record.text = std::move(text);
      records.push_back(std::move(record));
    }
    rng.shuffle(records);
    return records;
  };

  task.records = make_records(recipe.train_count, false);
  std::vector<RawRecord> test_records = make_records(test_count, true);
  task.records.insert(task.records.end(), std::make_move_iterator(test_records.begin()),
                      std::make_move_iterator(test_records.end()));
  return task;
}

}  // namespace

std::vector<RawTask> generate_synthetic_tasks(std::uint64_t seed, SyntheticScenario scenario,
                                              const std::vector<int>& sizes) {
  if (sizes.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one task size");
  for (int s : sizes)
    if (s < 20)
      throw Error(ErrorKind::InvalidArgument, "synthetic tasks need >= 20 samples each");

  Rng rng = Rng::stream(seed, "synth");
  WordForge forge(rng);
  const int num_tasks = static_cast<int>(sizes.size());
  std::vector<TaskRecipe> recipes(static_cast<std::size_t>(num_tasks));

  auto reserve_phrases = [&](const std::vector<std::string>& phrases) {
    for (const auto& p : phrases)
      for (const auto& w : tokenize(p)) forge.reserve(w);
  };

  switch (scenario) {
    case SyntheticScenario::domain: {
      // Same 2-class sentiment objective everywhere; each task is a distinct
      // "domain": its own filler vocabulary and domain-specific keywords, on
      // top of a keyword core shared by all domains.
      const std::vector<std::string> phrases = {"positive", "negative"};
      reserve_phrases(phrases);
      std::vector<std::vector<std::string>> core(2);
      for (int c = 0; c < 2; ++c) core[static_cast<std::size_t>(c)] = forge.fresh_batch(4);
      for (int k = 0; k < num_tasks; ++k) {
        TaskRecipe& recipe = recipes[static_cast<std::size_t>(k)];
        recipe.id = "domain-" + std::to_string(k);
        recipe.label_phrases = phrases;
        recipe.train_count = sizes[static_cast<std::size_t>(k)];
        recipe.mean_length = 20;
        recipe.fillers = forge.fresh_batch(220);
        auto unique = unique_label_tokens({tokenize(phrases[0]), tokenize(phrases[1])});
        for (int c = 0; c < 2; ++c) {
          std::vector<std::string> pool = unique[static_cast<std::size_t>(c)];
          const auto& shared = core[static_cast<std::size_t>(c)];
          pool.insert(pool.end(), shared.begin(), shared.end());
          auto specific = forge.fresh_batch(3);
          pool.insert(pool.end(), specific.begin(), specific.end());
          recipe.keywords.push_back(std::move(pool));
        }
      }
      break;
    }
    case SyntheticScenario::objective: {
      // Disjoint label sets per task; shared filler vocabulary.
      const std::vector<std::vector<std::string>> label_sets = {
          {"positive", "negative"},
          {"world news", "sports report", "science story"},
          {"location question", "person question", "count question"},
          {"spam message", "regular message"},
      };
      for (const auto& set : label_sets) reserve_phrases(set);
      std::vector<std::string> shared_fillers = forge.fresh_batch(240);
      for (int k = 0; k < num_tasks; ++k) {
        TaskRecipe& recipe = recipes[static_cast<std::size_t>(k)];
        recipe.id = "objective-" + std::to_string(k);
        if (k < static_cast<int>(label_sets.size())) {
          recipe.label_phrases = label_sets[static_cast<std::size_t>(k)];
        } else {
          for (int c = 0; c < 2; ++c) recipe.label_phrases.push_back(forge.fresh() + " topic");
          forge.reserve("topic");
        }
        recipe.train_count = sizes[static_cast<std::size_t>(k)];
        recipe.mean_length = 15;
        recipe.fillers = shared_fillers;
        std::vector<std::vector<std::string>> words;
        for (const auto& p : recipe.label_phrases) words.push_back(tokenize(p));
        auto unique = unique_label_tokens(words);
        for (std::size_t c = 0; c < recipe.label_phrases.size(); ++c) {
          std::vector<std::string> pool = unique[c];
          auto fresh = forge.fresh_batch(4);
          pool.insert(pool.end(), fresh.begin(), fresh.end());
          recipe.keywords.push_back(std::move(pool));
        }
      }
      break;
    }
    case SyntheticScenario::cardinality: {
      // Alternating profiles: 2-class long documents vs 5-class short ones,
      // over one shared filler vocabulary.
      const std::vector<std::string> coarse = {"positive", "negative"};
      const std::vector<std::string> fine = {"very positive", "positive", "neutral", "negative",
                                             "very negative"};
      reserve_phrases(coarse);
      reserve_phrases(fine);
      std::vector<std::string> shared_fillers = forge.fresh_batch(240);
      for (int k = 0; k < num_tasks; ++k) {
        TaskRecipe& recipe = recipes[static_cast<std::size_t>(k)];
        recipe.id = "cardinality-" + std::to_string(k);
        const bool coarse_profile = (k % 2 == 0);
        recipe.label_phrases = coarse_profile ? coarse : fine;
        recipe.train_count = sizes[static_cast<std::size_t>(k)];
        recipe.mean_length = coarse_profile ? 40 : 10;
        recipe.fillers = shared_fillers;
        std::vector<std::vector<std::string>> words;
        for (const auto& p : recipe.label_phrases) words.push_back(tokenize(p));
        auto unique = unique_label_tokens(words);
        for (std::size_t c = 0; c < recipe.label_phrases.size(); ++c) {
          std::vector<std::string> pool = unique[c];
          auto fresh = forge.fresh_batch(4);
          pool.insert(pool.end(), fresh.begin(), fresh.end());
          recipe.keywords.push_back(std::move(pool));
        }
      }
      break;
    }
  }

  std::vector<RawTask> tasks;
  tasks.reserve(recipes.size());
  for (const TaskRecipe& recipe : recipes) tasks.push_back(build_synthetic_task(recipe, rng));
  return tasks;
}

}  // namespace mtle
