#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "amn/babi.hpp"
#include "amn/model.hpp"

namespace amn {

struct StoryShape {
  std::size_t sentences = 10;
  std::size_t words = 6;  // per sentence
  std::size_t question = 4;
  std::size_t answer = 1;  // answer tokens, EOS excluded
};

// Multiply-accumulate counts for one example. Only multiplies inside matrix
// products, gate products and attention sums are counted.
struct OpCountReport {
  std::uint64_t question_encoder = 0;
  std::uint64_t word_encoder = 0;
  std::uint64_t sentence_encoder = 0;
  std::uint64_t memory_module = 0;     // GRU steps plus attention
  std::uint64_t memory_attention = 0;  // attention part of memory_module
  std::uint64_t decoder = 0;
  // Memory module that re-reads the sentence representations with a GRU
  // pass at every memory step.
  std::uint64_t rereading_baseline = 0;
  // Same, re-reading every word of the story at every memory step.
  std::uint64_t word_rereading_baseline = 0;

  std::uint64_t total() const {
    return question_encoder + word_encoder + sentence_encoder + memory_module + decoder;
  }
  // Attend-only memory cost over the re-reading baseline.
  double ratio() const;
  double word_ratio() const;
};

std::uint64_t gru_step_macs(std::size_t d_in, std::size_t d);
std::uint64_t attention_macs(std::size_t states, std::size_t e);

// Closed-form counts.
OpCountReport count_ops(const ModelConfig& config, const StoryShape& shape);

// Counts read from the tensor engine's counter during a teacher-forced
// forward pass over one synthetic example of the given shape. Baselines are
// copied from the formula.
OpCountReport measure_ops(const ModelConfig& config, const StoryShape& shape);

std::string format_op_report(const OpCountReport& formula, const OpCountReport& measured);

struct HeatmapRow {
  std::string section;  // "memory" or "decoder"
  std::size_t step = 0;
  std::size_t index = 0;  // sentence (memory section) or memory (decoder section)
  double weight = 0.0;
  std::string text;
};

struct HeatmapDump {
  std::vector<HeatmapRow> rows;
};

// Memory rows pair each step's weights with the story sentences; decoder rows
// carry the token emitted at that step.
HeatmapDump make_heatmap(const AttentionRecord<float>& record, const Example& example,
                         const std::vector<std::string>& decoded);
std::string format_heatmap(const HeatmapDump& dump);
void write_heatmap(const HeatmapDump& dump, const std::filesystem::path& path);

// Largest deviation of any step's weight sum from 1, over both sections.
double heatmap_max_sum_error(const HeatmapDump& dump);

// Location of the questioned person's most recent movement. DataError when the
// question is not "where is X" or X never moved.
std::string oracle_task1(const std::vector<std::vector<std::string>>& story,
                         const std::vector<std::string>& question);

struct ReproduceOptions {
  std::filesystem::path data_dir;
  std::vector<int> tasks;
  double budget = 4.0;  // multiple of the reported batch count
  double lr = 0.005;
  double clip = 1.0;
  double dropout = 0.0;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool record_time = true;
  std::ostream* progress = nullptr;
};

struct ReproduceRow {
  int task = 0;
  double error_rate = 1.0;
  bool solved = false;
  std::size_t batches_used = 0;
  double seconds = 0.0;
};

// Trains every task with its reported size/depth/memories and scores the
// best checkpoint on the test file. Missing files are reported together.
std::vector<ReproduceRow> reproduce_tasks(const ReproduceOptions& options);
std::string format_reproduce_report(const std::vector<ReproduceRow>& rows);

inline constexpr double kSolvedThreshold = 0.05;

}  // namespace amn
