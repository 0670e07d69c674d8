#include "amn/babi.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "amn/errors.hpp"

namespace amn {

namespace {

constexpr std::array<const char*, token::kReserved> kReservedNames = {"<pad>", "<go>", "<eos>",
                                                                       "<unk>"};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool is_punct(char c) { return c == '.' || c == '?' || c == '!' || c == ',' || c == ';' || c == ':'; }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

// bAbi file naming, indexed by task id - 1.
constexpr std::array<TaskInfo, 20> kTasks = {{
    {1, "single-supporting-fact", "single supporting fact", 32, 1, 1, 1000, 0.0},
    {2, "two-supporting-facts", "two supporting facts", 64, 2, 3, 12200, 4.1},
    {3, "three-supporting-facts", "three supporting facts", 64, 2, 3, 14000, 29.1},
    {4, "two-arg-relations", "two arg relations", 32, 1, 1, 1200, 0.0},
    {5, "three-arg-relations", "three arg relations", 32, 1, 2, 3000, 0.7},
    {6, "yes-no-questions", "yes-no questions", 32, 1, 1, 3800, 0.2},
    {7, "counting", "counting", 32, 1, 3, 5000, 3.1},
    {8, "lists-sets", "lists sets", 32, 1, 1, 4400, 0.3},
    {9, "simple-negation", "simple negation", 32, 1, 2, 3200, 0.0},
    {10, "indefinite-knowledge", "indefinite knowledge", 32, 1, 1, 3800, 0.1},
    {11, "basic-coreference", "basic coreference", 32, 1, 2, 1400, 0.0},
    {12, "conjunction", "conjunction", 32, 1, 1, 1200, 0.0},
    {13, "compound-coreference", "compound coreference", 32, 1, 1, 10000, 0.0},
    {14, "time-reasoning", "time reasoning", 64, 2, 1, 6000, 3.6},
    {15, "basic-deduction", "basic deduction", 32, 1, 1, 2200, 0.0},
    {16, "basic-induction", "basic induction", 64, 1, 2, 10200, 45.4},
    {17, "positional-reasoning", "positional reasoning", 32, 1, 3, 6200, 1.6},
    {18, "size-reasoning", "size reasoning", 32, 1, 3, 2400, 0.9},
    {19, "path-finding", "path finding", 64, 1, 1, 13000, 0.3},
    {20, "agents-motivations", "agents motivations", 32, 1, 3, 3600, 0.0},
}};

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(lower(text));
  std::string word;
  while (ss >> word) {
    std::size_t b = 0, e = word.size();
    while (b < e && is_punct(word[b])) ++b;
    while (e > b && is_punct(word[e - 1])) --e;
    if (e > b) out.push_back(word.substr(b, e - b));
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) add(name);
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.size() < token::kReserved) throw FormatError("vocabulary is missing reserved symbols");
  for (std::size_t i = 0; i < token::kReserved; ++i) {
    if (tokens[i] != kReservedNames[i]) throw FormatError("vocabulary reserved symbols out of order");
  }
  Vocabulary v;
  for (std::size_t i = token::kReserved; i < tokens.size(); ++i) {
    if (v.find(tokens[i])) throw FormatError("vocabulary repeats token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

void Vocabulary::add(const std::string& tok) {
  ids_.emplace(tok, tokens_.size());
  tokens_.push_back(tok);
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw IndexError("vocabulary id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::optional<std::size_t> Vocabulary::find(const std::string& tok) const {
  auto it = ids_.find(tok);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id_or_unk(const std::string& tok) const {
  return find(tok).value_or(token::kUnk);
}

EncodedExample Vocabulary::encode(const Example& ex) const {
  auto strict = [this](const std::vector<std::string>& toks) {
    std::vector<std::size_t> ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) {
      auto id = find(t);
      if (!id) throw DataError("token '" + t + "' is not in the vocabulary");
      ids.push_back(*id);
    }
    return ids;
  };
  EncodedExample out;
  for (const auto& s : ex.story) out.story.push_back(strict(s));
  out.question = strict(ex.question);
  out.answer = strict(ex.answer);
  return out;
}

EncodedExample Vocabulary::encode_lenient(const Example& ex) const {
  auto lenient = [this](const std::vector<std::string>& toks) {
    std::vector<std::size_t> ids;
    for (const auto& t : toks) ids.push_back(id_or_unk(t));
    return ids;
  };
  EncodedExample out;
  for (const auto& s : ex.story) out.story.push_back(lenient(s));
  out.question = lenient(ex.question);
  out.answer = lenient(ex.answer);
  return out;
}

std::vector<EncodedExample> Vocabulary::encode_all(std::span<const Example> examples) const {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(encode(ex));
  return out;
}

std::string Vocabulary::render(std::span<const std::size_t> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += token(ids[i]);
  }
  return out;
}

std::vector<Example> parse_babi(std::istream& in, const std::string& source) {
  std::vector<Example> out;
  std::vector<std::vector<std::string>> statements;
  std::vector<int> statement_lines;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw DataError(source + ":" + std::to_string(lineno) + ": " + why);
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;

    std::size_t pos = 0;
    while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos == 0) fail("line does not start with a line number");
    const int number = std::stoi(line.substr(0, pos));
    const std::string rest = line.substr(pos);
    if (number == 1) {
      statements.clear();
      statement_lines.clear();
    }

    if (rest.find('\t') != std::string::npos) {
      const auto fields = split(rest, '\t');
      if (fields.size() < 3) fail("question line needs question, answer and supporting facts");
      Example ex;
      ex.question = tokenize(fields[0]);
      if (ex.question.empty()) fail("empty question");
      for (const auto& part : split(lower(trim(fields[1])), ',')) {
        const std::string a = trim(part);
        if (!a.empty()) ex.answer.push_back(a);
      }
      if (ex.answer.empty()) fail("empty answer");
      std::istringstream sup(fields[2]);
      int ref = 0;
      while (sup >> ref) {
        auto it = std::find(statement_lines.begin(), statement_lines.end(), ref);
        if (it == statement_lines.end()) fail("supporting fact " + std::to_string(ref) + " is not a statement of this story");
        ex.supporting.push_back(static_cast<std::size_t>(it - statement_lines.begin()));
      }
      if (statements.empty()) fail("question before any statement");
      ex.story = statements;
      ex.line_numbers = statement_lines;
      out.push_back(std::move(ex));
    } else {
      if (rest.find('?') != std::string::npos) fail("question line without tab-separated answer");
      auto toks = tokenize(rest);
      if (toks.empty()) fail("empty statement");
      statements.push_back(std::move(toks));
      statement_lines.push_back(number);
    }
  }
  return out;
}

std::vector<Example> parse_babi_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_babi(in, path.string());
}

Vocabulary build_vocabulary(std::span<const Example> examples) {
  std::set<std::string> words;
  for (const auto& ex : examples) {
    for (const auto& s : ex.story) words.insert(s.begin(), s.end());
    words.insert(ex.question.begin(), ex.question.end());
    words.insert(ex.answer.begin(), ex.answer.end());
  }
  Vocabulary v;
  for (const auto& w : words) {
    if (!v.find(w)) v.add(w);
  }
  return v;
}

std::pair<std::vector<Example>, std::vector<Example>> split_train_val(std::vector<Example> examples,
                                                                      std::ostream* warn) {
  std::size_t n_train = 9000;
  if (examples.size() < 10000) {
    n_train = examples.size() * 9 / 10;
    if (warn) {
      *warn << "warning: " << examples.size()
            << " examples is fewer than 10000; using a 90/10 train/validation split\n";
    }
  }
  std::vector<Example> val(std::make_move_iterator(examples.begin() + static_cast<long>(n_train)),
                           std::make_move_iterator(examples.end()));
  examples.resize(n_train);
  return {std::move(examples), std::move(val)};
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::vector<Batch> batchify(std::span<const EncodedExample> examples, std::size_t batch_size,
                            std::uint64_t seed) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  const auto order = shuffled_indices(examples.size(), seed);
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<EncodedExample> chunk;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
      chunk.push_back(examples[order[i]]);
    }
    out.push_back(make_batch(chunk));
  }
  return out;
}

std::string detokenize(const Example& ex) {
  std::string out;
  auto join = [](const std::vector<std::string>& toks) {
    std::string s;
    for (std::size_t i = 0; i < toks.size(); ++i) s += (i ? " " : "") + toks[i];
    return s;
  };
  for (const auto& s : ex.story) out += join(s) + "\n";
  out += join(ex.question) + "\t";
  for (std::size_t i = 0; i < ex.answer.size(); ++i) out += (i ? "," : "") + ex.answer[i];
  return out;
}

DatasetStats dataset_stats(std::span<const Example> examples) {
  DatasetStats st;
  for (const auto& ex : examples) {
    st.max_story_len = std::max(st.max_story_len, ex.story.size());
    st.max_question_len = std::max(st.max_question_len, ex.question.size());
    st.max_answer_len = std::max(st.max_answer_len, ex.answer.size());
    for (const auto& s : ex.story) st.max_sentence_len = std::max(st.max_sentence_len, s.size());
  }
  return st;
}

const TaskInfo& task_info(int id) {
  if (id < 1 || id > 20) throw ConfigError("task id must be between 1 and 20, got " + std::to_string(id));
  return kTasks[static_cast<std::size_t>(id - 1)];
}

std::span<const TaskInfo> all_tasks() { return kTasks; }

std::filesystem::path find_task_file(const std::filesystem::path& dir, int task,
                                     const std::string& split) {
  const TaskInfo& info = task_info(task);
  const std::string name = "qa" + std::to_string(task) + "_" + info.name + "_" + split + ".txt";
  for (const auto& sub : {std::filesystem::path{}, std::filesystem::path{"en-10k"},
                          std::filesystem::path{"tasks_1-20_v1-2"} / "en-10k"}) {
    const auto p = dir / sub / name;
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("missing bAbi file " + (dir / name).string());
}

TaskData load_task(const std::filesystem::path& dir, int task, std::ostream* warn) {
  TaskData data;
  auto all = parse_babi_file(find_task_file(dir, task, "train"));
  data.vocab = build_vocabulary(all);
  data.stats = dataset_stats(all);
  auto [train, val] = split_train_val(std::move(all), warn);
  data.train = std::move(train);
  data.val = std::move(val);
  std::filesystem::path test_file;
  try {
    test_file = find_task_file(dir, task, "test");
  } catch (const DataError&) {
    if (warn) *warn << "warning: no test file for task " << task << "\n";
  }
  if (!test_file.empty()) {
    data.test = parse_babi_file(test_file);
    const auto ts = dataset_stats(data.test);
    data.stats.max_sentence_len = std::max(data.stats.max_sentence_len, ts.max_sentence_len);
    data.stats.max_story_len = std::max(data.stats.max_story_len, ts.max_story_len);
    data.stats.max_question_len = std::max(data.stats.max_question_len, ts.max_question_len);
    data.stats.max_answer_len = std::max(data.stats.max_answer_len, ts.max_answer_len);
  }
  return data;
}

}  // namespace amn
