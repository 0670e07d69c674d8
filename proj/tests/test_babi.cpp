#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "amn/babi.hpp"
#include "amn/model.hpp"
#include "amn/synth.hpp"

using namespace amn;

namespace {

std::vector<Example> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_babi(in);
}

const char* kTwoStories =
    "1 Mary moved to the bathroom.\n"
    "2 John went to the hallway.\n"
    "3 Where is Mary? \tbathroom\t1\n"
    "4 Daniel went back to the hallway.\n"
    "5 Where is Daniel? \thallway\t4\n"
    "1 Sandra journeyed to the garden.\n"
    "2 Where is Sandra? \tgarden\t1\n";

}  // namespace

TEST_CASE("parse a two-statement story") {
  auto exs = parse("1 mary moved to the bathroom.\n2 john went to the hallway.\n3 where is mary?\tbathroom\t1\n");
  REQUIRE(exs.size() == 1);
  CHECK(exs[0].story.size() == 2);
  CHECK(exs[0].story[0] == std::vector<std::string>{"mary", "moved", "to", "the", "bathroom"});
  CHECK(exs[0].question == std::vector<std::string>{"where", "is", "mary"});
  CHECK(exs[0].answer == std::vector<std::string>{"bathroom"});
  CHECK(exs[0].supporting == std::vector<std::size_t>{0});
  CHECK(exs[0].line_numbers == std::vector<int>{1, 2});
}

TEST_CASE("stories reset on line 1 and questions are not statements") {
  auto exs = parse(kTwoStories);
  REQUIRE(exs.size() == 3);
  CHECK(exs[1].story.size() == 3);
  CHECK(exs[1].line_numbers == std::vector<int>{1, 2, 4});
  CHECK(exs[1].supporting == std::vector<std::size_t>{2});
  CHECK(exs[2].story.size() == 1);
  CHECK(exs[2].story[0][0] == "sandra");
  for (const auto& ex : exs)
    for (std::size_t s : ex.supporting) CHECK(s < ex.story.size());
}

TEST_CASE("comma answers become sequences and CRLF is tolerated") {
  auto exs = parse("1 The kitchen is north of the hallway.\r\n2 How do you go from the hallway to the kitchen?\tn,w\t1\r\n");
  REQUIRE(exs.size() == 1);
  CHECK(exs[0].answer == std::vector<std::string>{"n", "w"});
}

TEST_CASE("malformed lines name the line number") {
  auto fails_at = [](const std::string& text, const std::string& where) {
    try {
      parse(text);
      return false;
    } catch (const DataError& e) {
      return std::string(e.what()).find(where) != std::string::npos;
    }
  };
  CHECK(fails_at("mary moved.\n", ":1:"));
  CHECK(fails_at("1 mary moved.\n2 where is mary?\n", ":2:"));
  CHECK(fails_at("1 mary moved.\n2 where is mary?\tkitchen\n", ":2:"));
  CHECK(fails_at("1 mary moved.\n2 where is mary?\tkitchen\t7\n", ":2:"));
  CHECK_THROWS_AS(parse_babi_file("/nonexistent/qa1.txt"), DataError);
}

TEST_CASE("parsing is idempotent through detokenize") {
  auto exs = parse(kTwoStories);
  for (const auto& ex : exs) {
    std::string text;
    int n = 1;
    std::istringstream lines(detokenize(ex));
    std::string line;
    while (std::getline(lines, line)) {
      text += std::to_string(n++) + " " + line;
      if (line.find('\t') != std::string::npos) text += "\t";
      text += "\n";
    }
    // Supporting ids are not part of the detokenized form.
    auto back = parse(text.substr(0, text.size() - 1) + "1\n");
    REQUIRE(back.size() == 1);
    CHECK(back[0].story == ex.story);
    CHECK(back[0].question == ex.question);
    CHECK(back[0].answer == ex.answer);
  }
}

TEST_CASE("tokenize lowercases and strips punctuation") {
  CHECK(tokenize("Mary Moved to the Bathroom.") ==
        std::vector<std::string>{"mary", "moved", "to", "the", "bathroom"});
  CHECK(tokenize("Where is Mary? ") == std::vector<std::string>{"where", "is", "mary"});
  CHECK(tokenize("  .  ").empty());
}

TEST_CASE("vocabulary: reserved ids, sorted tokens, determinism") {
  CHECK(build_vocabulary(std::vector<Example>{}).size() == token::kReserved);
  auto exs = parse(kTwoStories);
  auto v = build_vocabulary(exs);
  CHECK(v == build_vocabulary(exs));
  CHECK(v.token(token::kPad) == "<pad>");
  CHECK(v.token(token::kGo) == "<go>");
  CHECK(v.token(token::kEos) == "<eos>");
  CHECK(v.token(token::kUnk) == "<unk>");
  std::set<std::string> words;
  for (const auto& ex : exs) {
    for (const auto& s : ex.story) words.insert(s.begin(), s.end());
    words.insert(ex.question.begin(), ex.question.end());
    words.insert(ex.answer.begin(), ex.answer.end());
  }
  CHECK(v.size() == words.size() + token::kReserved);
  std::size_t id = token::kReserved;
  for (const auto& w : words) CHECK(v.find(w) == id++);
  for (const auto& t : v.tokens()) {
    for (char c : t) CHECK(!(c >= 'A' && c <= 'Z'));
  }
  CHECK(Vocabulary::from_tokens(v.tokens()) == v);
  CHECK_THROWS_AS(v.token(v.size()), IndexError);
}

TEST_CASE("strict and lenient encoding") {
  auto exs = parse(kTwoStories);
  auto v = build_vocabulary(std::span<const Example>(exs.data(), 2));
  CHECK_THROWS_AS(v.encode(exs[2]), DataError);
  auto enc = v.encode_lenient(exs[2]);
  CHECK(enc.story[0][0] == token::kUnk);
  auto ok = v.encode(exs[0]);
  CHECK(v.render(ok.answer) == "bathroom");
}

TEST_CASE("train/validation split") {
  std::vector<Example> ten(10);
  for (std::size_t i = 0; i < 10; ++i) ten[i].question = {std::to_string(i)};
  std::ostringstream warn;
  auto [train, val] = split_train_val(ten, &warn);
  CHECK(train.size() == 9);
  CHECK(val.size() == 1);
  CHECK(val[0].question[0] == "9");
  CHECK(warn.str().find("warning") != std::string::npos);

  std::vector<Example> big(10000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i].question = {std::to_string(i)};
  std::ostringstream quiet;
  auto [t2, v2] = split_train_val(big, &quiet);
  CHECK(t2.size() == 9000);
  CHECK(v2.size() == 1000);
  CHECK(t2.front().question[0] == "0");
  CHECK(v2.front().question[0] == "9000");
  CHECK(quiet.str().empty());
}

TEST_CASE("batchify covers every example once with exact masks") {
  std::mt19937_64 rng(1);
  std::vector<EncodedExample> exs(100);
  for (std::size_t i = 0; i < exs.size(); ++i) {
    auto& e = exs[i];
    const std::size_t S = 1 + rng() % 5;
    for (std::size_t s = 0; s < S; ++s) e.story.push_back(std::vector<std::size_t>(1 + rng() % 6, 4 + s));
    e.question = std::vector<std::size_t>(1 + rng() % 4, 5);
    e.answer = {4 + i % 3};
  }
  auto batches = batchify(exs, 50, 7);
  REQUIRE(batches.size() == 2);
  std::size_t total = 0;
  for (const auto& b : batches) total += b.size;
  CHECK(total == 100);
  CHECK(shuffled_indices(100, 7) == shuffled_indices(100, 7));
  CHECK(shuffled_indices(100, 7) != shuffled_indices(100, 8));
  auto order = shuffled_indices(100, 7);
  CHECK(std::set<std::size_t>(order.begin(), order.end()).size() == 100);

  // Mask sums equal true lengths, checked on an unshuffled batch.
  const Batch b = make_batch(exs);
  for (std::size_t i = 0; i < exs.size(); ++i) {
    std::size_t sentences = 0;
    for (std::size_t s = 0; s < b.max_sentences; ++s) sentences += b.sentence_mask[i * b.max_sentences + s];
    CHECK(sentences == exs[i].story.size());
    for (std::size_t s = 0; s < exs[i].story.size(); ++s) {
      std::size_t words = 0;
      const std::size_t r = i * b.max_sentences + s;
      for (std::size_t w = 0; w < b.max_words; ++w) words += b.word_mask[r * b.max_words + w];
      CHECK(words == exs[i].story[s].size());
    }
    CHECK(b.answer_lengths[i] == exs[i].answer.size() + 1);
    CHECK(b.answer[i * b.max_answer + exs[i].answer.size()] == token::kEos);
  }
  CHECK_THROWS_AS(batchify(exs, 0, 1), ConfigError);
}

TEST_CASE("padding does not change an example's loss") {
  ModelConfig c;
  c.size = 8;
  c.vocab_size = 12;
  c.max_answer_len = 2;
  AmnModel<float> model(c);
  EncodedExample small{{{4, 5}, {6}}, {7, 8}, {9}};
  EncodedExample large{{{4, 5, 6, 7, 8}, {9, 10}, {11}, {4, 4, 4}}, {7, 8, 9, 10}, {9, 10}};
  Tape<float> t1(false), t2(false);
  auto alone = model.forward(t1, make_batch(std::vector<EncodedExample>{small}), ForwardOptions{});
  auto padded = model.forward(t2, make_batch(std::vector<EncodedExample>{small, large}), ForwardOptions{});
  CHECK(std::abs(alone.example_loss[0] - padded.example_loss[0]) < 1e-6);
}

TEST_CASE("task table and file lookup") {
  CHECK(task_info(1).size == 32);
  CHECK(task_info(4).batches == 1200);
  CHECK(task_info(16).reported_error == doctest::Approx(45.4));
  CHECK_THROWS_AS(task_info(0), ConfigError);
  CHECK_THROWS_AS(task_info(21), ConfigError);
  CHECK(all_tasks().size() == 20);

  const auto dir = std::filesystem::temp_directory_path() / "amn_test_babi";
  std::filesystem::remove_all(dir);
  write_task_files(dir, 1, 3, 200, 50);
  CHECK(find_task_file(dir, 1, "train").filename() == "qa1_single-supporting-fact_train.txt");
  CHECK_THROWS_AS(find_task_file(dir, 2, "train"), DataError);
  std::ostringstream warn;
  TaskData d = load_task(dir, 1, &warn);
  CHECK(d.train.size() == 180);
  CHECK(d.val.size() == 20);
  CHECK(d.test.size() == 50);
  for (const auto& ex : d.train)
    for (const auto& a : ex.answer) CHECK(d.vocab.find(a).has_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("generated tasks parse and stay deterministic") {
  for (int task : generatable_tasks()) {
    const std::string a = generate_task_text(task, 300, 5), b = generate_task_text(task, 300, 5);
    CHECK(a == b);
    CHECK(a != generate_task_text(task, 300, 6));
    auto exs = parse(a);
    CHECK(exs.size() >= 300);
    for (const auto& ex : exs) {
      CHECK(!ex.supporting.empty());
      for (std::size_t s : ex.supporting) CHECK(s < ex.story.size());
    }
  }
  CHECK_FALSE(can_generate_task(2));
  CHECK_THROWS_AS(generate_task_text(2, 10, 1), ConfigError);
}
