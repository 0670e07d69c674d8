#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace amn {

// Generators that write bAbi v1.2-format text for tasks whose rules are
// simple enough to reproduce: 1 (single supporting fact), 4 (two arg
// relations) and 12 (conjunction). Output follows the en-10k file naming so
// the regular loader can read it.
bool can_generate_task(int task);
std::vector<int> generatable_tasks();

// Text of a task file with at least `questions` questions.
std::string generate_task_text(int task, std::size_t questions, std::uint64_t seed);

// Writes qa<task>_<name>_{train,test}.txt (10,000 / 1,000 questions) into
// dir/en-10k and returns the train file path.
std::filesystem::path write_task_files(const std::filesystem::path& dir, int task, std::uint64_t seed,
                                       std::size_t train_questions = 10000,
                                       std::size_t test_questions = 1000);

}  // namespace amn
