#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace amn {

// Reserved vocabulary ids.
namespace token {
inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kGo = 1;
inline constexpr std::size_t kEos = 2;
inline constexpr std::size_t kUnk = 3;
inline constexpr std::size_t kReserved = 4;
}  // namespace token

// One question over a story, as vocabulary ids. `answer` excludes EOS.
struct EncodedExample {
  std::vector<std::vector<std::size_t>> story;
  std::vector<std::size_t> question;
  std::vector<std::size_t> answer;
};

// Padded, masked batch of B examples. Layouts are row-major:
//   question   B x Lq
//   words      (B*S) x Lw   (row b*S + s is sentence s of example b)
//   sentences  B x S
//   answer     B x T        (answer tokens followed by EOS)
struct Batch {
  std::size_t size = 0;
  std::size_t max_question = 0;
  std::size_t max_sentences = 0;
  std::size_t max_words = 0;
  std::size_t max_answer = 0;

  std::vector<std::size_t> question;
  std::vector<std::uint8_t> question_mask;
  std::vector<std::size_t> words;
  std::vector<std::uint8_t> word_mask;
  std::vector<std::uint8_t> sentence_mask;
  std::vector<std::size_t> answer;
  std::vector<std::uint8_t> answer_mask;

  std::vector<std::size_t> story_lengths;
  std::vector<std::size_t> answer_lengths;  // including EOS
};

// Pads the examples into a Batch. Throws ContractError on empty questions,
// empty stories or empty sentences.
Batch make_batch(std::span<const EncodedExample> examples);

}  // namespace amn
