#include "amn/batch.hpp"

#include <algorithm>

#include "amn/errors.hpp"

namespace amn {

Batch make_batch(std::span<const EncodedExample> examples) {
  if (examples.empty()) throw ContractError("make_batch: no examples");
  Batch b;
  b.size = examples.size();
  for (const auto& ex : examples) {
    if (ex.question.empty()) throw ContractError("make_batch: empty question");
    if (ex.story.empty()) throw ContractError("make_batch: empty story");
    b.max_question = std::max(b.max_question, ex.question.size());
    b.max_sentences = std::max(b.max_sentences, ex.story.size());
    b.max_answer = std::max(b.max_answer, ex.answer.size() + 1);
    for (const auto& s : ex.story) {
      if (s.empty()) throw ContractError("make_batch: empty sentence");
      b.max_words = std::max(b.max_words, s.size());
    }
  }

  const std::size_t B = b.size, S = b.max_sentences, W = b.max_words;
  b.question.assign(B * b.max_question, token::kPad);
  b.question_mask.assign(B * b.max_question, 0);
  b.words.assign(B * S * W, token::kPad);
  b.word_mask.assign(B * S * W, 0);
  b.sentence_mask.assign(B * S, 0);
  b.answer.assign(B * b.max_answer, token::kPad);
  b.answer_mask.assign(B * b.max_answer, 0);

  for (std::size_t i = 0; i < B; ++i) {
    const auto& ex = examples[i];
    for (std::size_t t = 0; t < ex.question.size(); ++t) {
      b.question[i * b.max_question + t] = ex.question[t];
      b.question_mask[i * b.max_question + t] = 1;
    }
    for (std::size_t s = 0; s < ex.story.size(); ++s) {
      b.sentence_mask[i * S + s] = 1;
      for (std::size_t w = 0; w < ex.story[s].size(); ++w) {
        b.words[(i * S + s) * W + w] = ex.story[s][w];
        b.word_mask[(i * S + s) * W + w] = 1;
      }
    }
    for (std::size_t t = 0; t <= ex.answer.size(); ++t) {
      b.answer[i * b.max_answer + t] = t < ex.answer.size() ? ex.answer[t] : token::kEos;
      b.answer_mask[i * b.max_answer + t] = 1;
    }
    b.story_lengths.push_back(ex.story.size());
    b.answer_lengths.push_back(ex.answer.size() + 1);
  }
  return b;
}

}  // namespace amn
