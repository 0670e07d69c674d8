#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "amn/batch.hpp"

namespace amn {

// One bAbi question with the statements of its story that precede it.
// Tokens are lowercased with punctuation stripped.
struct Example {
  std::vector<std::vector<std::string>> story;
  std::vector<int> line_numbers;  // original line number of each story sentence
  std::vector<std::string> question;
  std::vector<std::string> answer;     // comma-separated answers become a sequence
  std::vector<std::size_t> supporting;  // 0-based indices into story
};

// token <-> id bijection; ids 0..3 are PAD, GO, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();
  // Rebuilds a vocabulary from its id-ordered token list (as stored in checkpoints).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const;
  std::optional<std::size_t> find(const std::string& tok) const;
  // Unknown words map to UNK.
  std::size_t id_or_unk(const std::string& tok) const;

  // Strict encoding: any unknown token is a DataError.
  EncodedExample encode(const Example& ex) const;
  // Lenient encoding: unknown tokens become UNK.
  EncodedExample encode_lenient(const Example& ex) const;
  std::vector<EncodedExample> encode_all(std::span<const Example> examples) const;

  std::string render(std::span<const std::size_t> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(const std::string& tok);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;

  friend Vocabulary build_vocabulary(std::span<const Example> examples);
};

// Lowercases and splits on whitespace, dropping sentence punctuation.
std::vector<std::string> tokenize(const std::string& text);

std::vector<Example> parse_babi(std::istream& in, const std::string& source = "<stream>");
std::vector<Example> parse_babi_file(const std::filesystem::path& path);

// Reserved symbols followed by the sorted set of story, question and answer tokens.
Vocabulary build_vocabulary(std::span<const Example> examples);

// First 9,000 / remaining 1,000; smaller inputs split 90/10 with a warning on `warn`.
std::pair<std::vector<Example>, std::vector<Example>> split_train_val(std::vector<Example> examples,
                                                                      std::ostream* warn = nullptr);

// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

// Shuffles with `seed` and cuts into padded batches of at most batch_size.
std::vector<Batch> batchify(std::span<const EncodedExample> examples, std::size_t batch_size,
                            std::uint64_t seed);

// Text of an example in bAbi-like lines ("sentence", "question ? answer").
std::string detokenize(const Example& ex);

struct DatasetStats {
  std::size_t max_sentence_len = 0;
  std::size_t max_story_len = 0;
  std::size_t max_question_len = 0;
  std::size_t max_answer_len = 0;
};
DatasetStats dataset_stats(std::span<const Example> examples);

// Per-task reference numbers: network size, depth, memories and batch budget
// of the smallest configuration reported to reach best validation
// performance, plus the reported test error rate (percent).
struct TaskInfo {
  int id;
  const char* name;  // file-name stem, e.g. "single-supporting-fact"
  const char* title;
  std::size_t size;
  std::size_t layers;
  std::size_t memories;
  std::size_t batches;
  double reported_error;
};

const TaskInfo& task_info(int id);  // ConfigError unless 1 <= id <= 20
std::span<const TaskInfo> all_tasks();

// Locates qa<id>_<name>_<split>.txt in dir, dir/en-10k or dir/tasks_1-20_v1-2/en-10k.
std::filesystem::path find_task_file(const std::filesystem::path& dir, int task,
                                     const std::string& split);

struct TaskData {
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;
  Vocabulary vocab;
  DatasetStats stats;
};

// Loads train (split into train/val) and, when present, test. The vocabulary
// is built from the training file.
TaskData load_task(const std::filesystem::path& dir, int task, std::ostream* warn = nullptr);

}  // namespace amn
