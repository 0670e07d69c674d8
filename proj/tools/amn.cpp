#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "amn/errors.hpp"
#include "amn/instrument.hpp"
#include "amn/synth.hpp"
#include "amn/train.hpp"

namespace fs = std::filesystem;
using namespace amn;

namespace {

// Usage problems detected after parsing (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string data_dir_or_env(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("AMN_DATA_DIR"); env && *env) return env;
  throw UsageError("no data directory: pass --data-dir or set AMN_DATA_DIR");
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

const std::vector<Example>& pick_set(const TaskData& data, const std::string& set) {
  const auto& out = set == "train" ? data.train : set == "val" ? data.val : data.test;
  if (out.empty()) throw DataError("the " + set + " set is empty or missing");
  return out;
}

int task_from(std::optional<int> flag, const Checkpoint& ckpt) {
  if (flag) return *flag;
  auto it = ckpt.meta.find("task");
  if (it == ckpt.meta.end()) throw UsageError("checkpoint does not record its task; pass --task");
  return std::stoi(it->second);
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

struct TrainArgs {
  std::string data_dir, out, log;
  int task = 0;
  std::optional<std::size_t> size, layers, memories, max_batches;
  double dropout = 0.0, lr = TrainConfig{}.initial_lr, clip = TrainConfig{}.max_grad_norm;
  std::uint64_t seed = 1;
  bool no_timing = false, quiet = false;
};

int run_train(const TrainArgs& a) {
  const TaskInfo& info = task_info(a.task);
  const TaskData data = load_task(data_dir_or_env(a.data_dir), a.task, &std::cerr);
  const Dataset ds = encode_task(data);
  const ModelConfig mc = model_config_for(data, a.size.value_or(info.size), a.layers.value_or(info.layers),
                                          a.memories.value_or(info.memories), a.dropout, a.seed);
  TrainConfig tc;
  tc.initial_lr = a.lr;
  tc.max_grad_norm = a.clip;
  tc.seed = a.seed;
  tc.max_batches = a.max_batches.value_or(4 * info.batches);
  tc.record_time = !a.no_timing;

  const std::string out = a.out.empty() ? "amn_task" + std::to_string(a.task) + ".bin" : a.out;
  const std::string log_path = a.log.empty() ? out + ".log" : a.log;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw DataError("cannot write log " + log_path);
  TrainHooks hooks;
  hooks.log_stream = &log;
  hooks.meta["task"] = std::to_string(a.task);
  if (!a.quiet) {
    std::cout << log_header();
    hooks.on_eval = [](const TrainLogEntry& e) { std::cout << format_log_entry(e) << std::flush; };
  }
  const TrainResult res = train(mc, tc, ds, hooks);
  save_checkpoint(res.best, out);
  std::cout << "best_val_error\t" << fmt4(res.best_val_error) << "\nbest_batch\t" << res.best_batch
            << "\nbatches_run\t" << res.batches_run << "\nstop\t" << res.stop_reason << "\n";
  if (!data.test.empty()) {
    const double test = evaluate(res.best, data.test, data.vocab);
    std::cout << "test_error\t" << fmt4(test) << "\nsolved\t" << (test < kSolvedThreshold ? "yes" : "no") << "\n";
  }
  std::cout << "checkpoint\t" << out << "\nlog\t" << log_path << "\n";
  return 0;
}

int run_eval(const std::string& model, const std::string& dir, std::optional<int> task_flag,
             const std::string& set) {
  const Checkpoint ckpt = load_checkpoint(model);
  const int task = task_from(task_flag, ckpt);
  const TaskData data = load_task(data_dir_or_env(dir), task);
  const double err = evaluate(ckpt, pick_set(data, set), data.vocab);
  std::cout << "task\t" << task << "\nset\t" << set << "\nerror_rate\t" << fmt4(err) << "\nsolved\t"
            << (err < kSolvedThreshold ? "yes" : "no") << "\n";
  return 0;
}

// Predicts the answer to `question` over `story` and returns (answer, top sentence index, record).
struct Answer {
  std::vector<std::string> tokens;
  AttentionRecord<float> record;
};

Answer answer_one(const AmnModel<float>& model, const Vocabulary& vocab, const Example& ex) {
  EncodedExample enc = vocab.encode_lenient(ex);
  if (enc.answer.empty()) enc.answer = {token::kUnk};
  Tape<float> tape(false);
  ForwardOptions opt;
  opt.compute_loss = false;
  opt.predict = true;
  opt.record = true;
  auto res = model.forward(tape, make_batch(std::vector<EncodedExample>{enc}), opt);
  Answer a;
  for (std::size_t id : res.predictions[0]) a.tokens.push_back(vocab.token(id));
  a.record = std::move(res.records[0]);
  return a;
}

int run_ask(const std::string& model_path, std::istream& in, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const Vocabulary vocab = Vocabulary::from_tokens(ckpt.vocab);
  const AmnModel<float> model(ckpt.config, ckpt.params);
  Example ex;
  std::string line;
  out << "enter statements; '? question' asks, 'reset' clears\n";
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    line = line.substr(first);
    if (line == "reset" || line == "reset\r") {
      ex.story.clear();
      out << "story cleared\n";
      continue;
    }
    if (line[0] == '?') {
      ex.question = tokenize(line.substr(1));
      if (ex.story.empty()) {
        out << "no statements yet; enter some first\n";
        continue;
      }
      if (ex.question.empty()) {
        out << "empty question\n";
        continue;
      }
      const Answer a = answer_one(model, vocab, ex);
      std::size_t top = 0;
      const auto& w = a.record.memory_attention;
      for (std::size_t s = 1; s < w.cols(); ++s)
        if (w(w.rows() - 1, s) > w(w.rows() - 1, top)) top = s;
      out << "answer: " << (a.tokens.empty() ? "<none>" : join(a.tokens)) << "\n";
      out << "attended: " << join(ex.story[top]) << " (" << fmt4(w(w.rows() - 1, top)) << ")\n";
      continue;
    }
    auto toks = tokenize(line);
    if (!toks.empty()) ex.story.push_back(std::move(toks));
  }
  return 0;
}

int run_visualize(const std::string& model_path, const std::string& dir, std::optional<int> task_flag,
                  const std::string& set, std::size_t index, const std::string& out) {
  const Checkpoint ckpt = load_checkpoint(model_path);
  const int task = task_from(task_flag, ckpt);
  const TaskData data = load_task(data_dir_or_env(dir), task);
  if (ckpt.vocab != data.vocab.tokens()) {
    throw ContractError("checkpoint vocabulary does not match the data vocabulary");
  }
  const auto& examples = pick_set(data, set);
  if (index >= examples.size()) {
    throw UsageError("--index " + std::to_string(index) + " is out of range for the " + set + " set of " +
                     std::to_string(examples.size()) + " examples");
  }
  const AmnModel<float> model(ckpt.config, ckpt.params);
  const Example& ex = examples[index];
  const Answer a = answer_one(model, data.vocab, ex);
  const HeatmapDump dump = make_heatmap(a.record, ex, a.tokens);
  if (out.empty() || out == "-") {
    std::cout << format_heatmap(dump);
  } else {
    write_heatmap(dump, out);
    std::cout << "question\t" << join(ex.question) << "\ngold\t" << join(ex.answer) << "\npredicted\t"
              << join(a.tokens) << "\nheatmap\t" << out << "\n";
  }
  return 0;
}

struct BenchArgs {
  std::optional<int> task;
  std::size_t size = 32, layers = 1, memories = 1, sentences = 10, words = 6, question = 4, answer = 1,
              vocab = 40;
};

int run_bench(const BenchArgs& b) {
  ModelConfig c;
  c.size = b.size;
  c.depth = b.layers;
  c.memories = b.memories;
  if (b.task) {
    const TaskInfo& info = task_info(*b.task);
    c.size = info.size;
    c.depth = info.layers;
    c.memories = info.memories;
  }
  c.vocab_size = b.vocab;
  c.validate();
  const StoryShape shape{b.sentences, b.words, b.question, b.answer};
  if (b.sentences == 0 || b.words == 0 || b.question == 0 || b.answer == 0) {
    throw UsageError("story shape values must be positive");
  }
  std::cout << "size\t" << c.size << "\nlayers\t" << c.depth << "\nmemories\t" << c.memories << "\nsentences\t"
            << b.sentences << "\nwords\t" << b.words << "\n";
  std::cout << format_op_report(count_ops(c, shape), measure_ops(c, shape));
  return 0;
}

std::vector<int> parse_task_list(const std::string& spec) {
  std::vector<int> out;
  if (spec == "all") {
    for (const auto& t : all_tasks()) out.push_back(t.id);
    return out;
  }
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const int id = std::stoi(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      task_info(id);
      out.push_back(id);
    } catch (const std::logic_error&) {
      throw UsageError("bad task list '" + spec + "': expected ids 1-20 separated by commas, or 'all'");
    }
  }
  if (out.empty()) throw UsageError("empty task list");
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e) || dynamic_cast<const ConfigError*>(&e) ||
      dynamic_cast<const IndexError*>(&e)) {
    return 1;
  }
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 2;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attentive memory network for bAbi question answering"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train on one bAbi task and save the best checkpoint");
  train_cmd->add_option("--data-dir", ta.data_dir, "bAbi directory (falls back to AMN_DATA_DIR)");
  train_cmd->add_option("--task", ta.task, "Task id")->required()->check(CLI::Range(1, 20));
  train_cmd->add_option("--size", ta.size, "Embedding and state size (task default when omitted)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--layers", ta.layers, "Stack depth")->check(CLI::Range(1, 3));
  train_cmd->add_option("--memories", ta.memories, "Memory steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--dropout", ta.dropout, "Dropout rate")->check(CLI::Range(0.0, 0.99));
  train_cmd->add_option("--lr", ta.lr, "Initial learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--clip", ta.clip, "Maximum gradient norm")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", ta.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--max-batches", ta.max_batches, "Batch budget (default 4x the task's reported count)");
  train_cmd->add_option("--out", ta.out, "Checkpoint path (default amn_task<N>.bin)");
  train_cmd->add_option("--log", ta.log, "Training log path (default <out>.log)");
  train_cmd->add_flag("--no-timing", ta.no_timing, "Write 0 for elapsed seconds so logs compare byte for byte");
  train_cmd->add_flag("--quiet", ta.quiet, "Do not echo the log to stdout");

  std::string model_path, data_dir, set = "test", out;
  std::optional<int> task;
  std::size_t index = 0;
  auto* eval_cmd = app.add_subcommand("eval", "Error rate of a checkpoint on a task split");
  eval_cmd->add_option("--model", model_path, "Checkpoint")->required();
  eval_cmd->add_option("--data-dir", data_dir, "bAbi directory (falls back to AMN_DATA_DIR)");
  eval_cmd->add_option("--task", task, "Task id (default: recorded in the checkpoint)")->check(CLI::Range(1, 20));
  eval_cmd->add_option("--set", set, "train, val or test")->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));

  auto* ask_cmd = app.add_subcommand("ask", "Interactive question answering over typed statements");
  ask_cmd->add_option("--model", model_path, "Checkpoint")->required();

  auto* vis_cmd = app.add_subcommand("visualize", "Dump attention weights for one example as TSV");
  vis_cmd->add_option("--model", model_path, "Checkpoint")->required();
  vis_cmd->add_option("--data-dir", data_dir, "bAbi directory (falls back to AMN_DATA_DIR)");
  vis_cmd->add_option("--task", task, "Task id (default: recorded in the checkpoint)")->check(CLI::Range(1, 20));
  vis_cmd->add_option("--set", set, "train, val or test")->capture_default_str()->check(CLI::IsMember({"train", "val", "test"}));
  vis_cmd->add_option("--index", index, "Example index within the set")->required();
  vis_cmd->add_option("--out", out, "Heatmap TSV path (stdout when omitted)");

  BenchArgs ba;
  auto* bench_cmd = app.add_subcommand("bench", "Multiply-accumulate counts: formula, instrumented, re-reading baseline");
  bench_cmd->add_option("--task", ba.task, "Take size/layers/memories from this task")->check(CLI::Range(1, 20));
  bench_cmd->add_option("--size", ba.size)->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--layers", ba.layers)->capture_default_str()->check(CLI::Range(1, 3));
  bench_cmd->add_option("--memories", ba.memories)->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--sentences", ba.sentences)->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--words", ba.words, "Words per sentence")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--question", ba.question, "Question length")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--answer", ba.answer, "Answer length")->capture_default_str()->check(CLI::PositiveNumber);
  bench_cmd->add_option("--vocab", ba.vocab, "Vocabulary size")->capture_default_str()->check(CLI::Range(5, 1000000));

  ReproduceOptions ro;
  std::string tasks = "1,4,12";
  bool no_timing = false;
  auto* rep_cmd = app.add_subcommand("reproduce", "Train and test several tasks with their reported settings");
  rep_cmd->add_option("--data-dir", data_dir, "bAbi directory (falls back to AMN_DATA_DIR)");
  rep_cmd->add_option("--tasks", tasks, "Comma-separated ids or 'all'")->capture_default_str();
  rep_cmd->add_option("--budget", ro.budget, "Batch budget as a multiple of the reported count")
      ->capture_default_str()->check(CLI::PositiveNumber);
  rep_cmd->add_option("--jobs", ro.jobs, "Concurrent training runs")->capture_default_str()->check(CLI::PositiveNumber);
  rep_cmd->add_option("--lr", ro.lr)->capture_default_str()->check(CLI::PositiveNumber);
  rep_cmd->add_option("--clip", ro.clip)->capture_default_str()->check(CLI::PositiveNumber);
  rep_cmd->add_option("--dropout", ro.dropout)->capture_default_str()->check(CLI::Range(0.0, 0.99));
  rep_cmd->add_option("--seed", ro.seed)->capture_default_str();
  rep_cmd->add_option("--out", out, "Report TSV path (stdout when omitted)");
  rep_cmd->add_flag("--no-timing", no_timing, "Report 0 seconds");

  std::uint64_t gen_seed = 1;
  std::size_t gen_train = 10000, gen_test = 1000;
  std::string gen_tasks = "1,4,12";
  auto* gen_cmd = app.add_subcommand("gen-data", "Write generated bAbi-format files for tasks 1, 4 and 12");
  gen_cmd->add_option("--out", out, "Output directory")->required();
  gen_cmd->add_option("--tasks", gen_tasks, "Comma-separated ids")->capture_default_str();
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();
  gen_cmd->add_option("--train-questions", gen_train)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--test-questions", gen_test)->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "amn: usage error: " << one_line(e.what()) << "\n";
    return 1;
  }

  try {
    if (*train_cmd) return run_train(ta);
    if (*eval_cmd) return run_eval(model_path, data_dir, task, set);
    if (*ask_cmd) return run_ask(model_path, std::cin, std::cout);
    if (*vis_cmd) return run_visualize(model_path, data_dir, task, set, index, out);
    if (*bench_cmd) return run_bench(ba);
    if (*rep_cmd) {
      ro.data_dir = data_dir_or_env(data_dir);
      ro.tasks = parse_task_list(tasks);
      ro.record_time = !no_timing;
      ro.progress = &std::cerr;
      const std::string report = format_reproduce_report(reproduce_tasks(ro));
      if (out.empty()) {
        std::cout << report;
      } else {
        std::ofstream f(out, std::ios::trunc);
        if (!f || !(f << report)) throw DataError("cannot write report " + out);
        std::cout << "report\t" << out << "\n";
      }
      return 0;
    }
    if (*gen_cmd) {
      for (int t : parse_task_list(gen_tasks)) {
        if (!can_generate_task(t)) throw UsageError("no generator for task " + std::to_string(t));
        std::cout << write_task_files(out, t, gen_seed, gen_train, gen_test).string() << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    std::cerr << "amn: " << (code == 1 ? "usage error: " : "error: ") << one_line(e.what()) << "\n";
    return code;
  }
  return 1;
}
