#include "amn/instrument.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "amn/errors.hpp"
#include "amn/train.hpp"

namespace amn {

double OpCountReport::ratio() const {
  return rereading_baseline ? static_cast<double>(memory_attention) / static_cast<double>(rereading_baseline) : 0.0;
}

double OpCountReport::word_ratio() const {
  return word_rereading_baseline
             ? static_cast<double>(memory_attention) / static_cast<double>(word_rereading_baseline)
             : 0.0;
}

std::uint64_t gru_step_macs(std::size_t d_in, std::size_t d) { return 3 * (d_in * d + d * d + d); }

std::uint64_t attention_macs(std::size_t states, std::size_t e) {
  if (states == 0) return 0;
  return states * (2 * e * e + e) + states * e + 2 * e * e;
}

OpCountReport count_ops(const ModelConfig& config, const StoryShape& shape) {
  const std::size_t e = config.size, L = config.depth, m = config.memories;
  const std::size_t S = shape.sentences, V = config.vocab_size;
  const std::uint64_t gru = L * gru_step_macs(e, e);
  OpCountReport r;
  r.question_encoder = shape.question * gru;
  r.word_encoder = S * shape.words * gru;
  r.sentence_encoder = 2 * S * gru;
  r.memory_attention = m * attention_macs(S, e);
  r.memory_module = m * gru + r.memory_attention;
  r.decoder = (shape.answer + 1) * (gru + attention_macs(m, e) + e * V);
  r.rereading_baseline = m * S * gru;
  r.word_rereading_baseline = m * S * shape.words * gru;
  return r;
}

OpCountReport measure_ops(const ModelConfig& config, const StoryShape& shape) {
  if (shape.sentences == 0 || shape.words == 0 || shape.question == 0 || shape.answer == 0) {
    throw ConfigError("story shape needs at least one sentence, word, question word and answer token");
  }
  ModelConfig c = config;
  c.dropout = 0.0;
  AmnModel<float> model(c);
  // Ids beyond the reserved ones; all that matters is the shape.
  const std::size_t w = token::kReserved;
  EncodedExample ex;
  ex.story.assign(shape.sentences, std::vector<std::size_t>(shape.words, w));
  ex.question.assign(shape.question, w);
  ex.answer.assign(shape.answer, w);
  const Batch batch = make_batch(std::span<const EncodedExample>(&ex, 1));
  Tape<float> tape(false);
  const auto res = model.forward(tape, batch, ForwardOptions{});

  OpCountReport r = count_ops(config, shape);
  r.question_encoder = res.macs.question_encoder;
  r.word_encoder = res.macs.word_encoder;
  r.sentence_encoder = res.macs.sentence_encoder;
  r.memory_module = res.macs.memory_module;
  r.memory_attention = res.macs.memory_attention;
  r.decoder = res.macs.decoder;
  return r;
}

std::string format_op_report(const OpCountReport& f, const OpCountReport& m) {
  std::ostringstream s;
  s << "component\tformula\tinstrumented\n";
  auto row = [&](const char* name, std::uint64_t a, std::uint64_t b) { s << name << "\t" << a << "\t" << b << "\n"; };
  row("question_encoder", f.question_encoder, m.question_encoder);
  row("word_encoder", f.word_encoder, m.word_encoder);
  row("sentence_encoder", f.sentence_encoder, m.sentence_encoder);
  row("memory_module", f.memory_module, m.memory_module);
  row("memory_attention", f.memory_attention, m.memory_attention);
  row("decoder", f.decoder, m.decoder);
  row("total", f.total(), m.total());
  s << "rereading_baseline\t" << f.rereading_baseline << "\n";
  s << "word_rereading_baseline\t" << f.word_rereading_baseline << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", f.ratio());
  s << "ratio\t" << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.4f", f.word_ratio());
  s << "word_ratio\t" << buf << "\n";
  return s.str();
}

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

// Tabs and newlines would break the TSV.
std::string clean(std::string s) {
  std::replace(s.begin(), s.end(), '\t', ' ');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

HeatmapDump make_heatmap(const AttentionRecord<float>& record, const Example& example,
                         const std::vector<std::string>& decoded) {
  const auto& mem = record.memory_attention;
  if (mem.cols() != example.story.size()) {
    throw ContractError("attention record covers " + std::to_string(mem.cols()) + " sentences, story has " +
                        std::to_string(example.story.size()));
  }
  HeatmapDump dump;
  for (std::size_t i = 0; i < mem.rows(); ++i)
    for (std::size_t s = 0; s < mem.cols(); ++s)
      dump.rows.push_back({"memory", i, s, mem(i, s), clean(join(example.story[s]))});
  const auto& dec = record.decoder_attention;
  for (std::size_t t = 0; t < dec.rows(); ++t) {
    const std::string tok = t < decoded.size() ? decoded[t] : "<eos>";
    for (std::size_t i = 0; i < dec.cols(); ++i) dump.rows.push_back({"decoder", t, i, dec(t, i), clean(tok)});
  }
  return dump;
}

std::string format_heatmap(const HeatmapDump& dump) {
  std::string out = "section\tstep\tindex\tweight\ttext\n";
  char buf[32];
  for (const auto& r : dump.rows) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.weight);
    out += r.section + "\t" + std::to_string(r.step) + "\t" + std::to_string(r.index) + "\t" + buf + "\t" +
           r.text + "\n";
  }
  return out;
}

void write_heatmap(const HeatmapDump& dump, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write heatmap " + path.string());
  out << format_heatmap(dump);
  if (!out) throw DataError("failed writing heatmap " + path.string());
}

double heatmap_max_sum_error(const HeatmapDump& dump) {
  std::map<std::pair<std::string, std::size_t>, double> sums;
  for (const auto& r : dump.rows) sums[{r.section, r.step}] += r.weight;
  double worst = 0.0;
  for (const auto& [key, s] : sums) worst = std::max(worst, std::abs(s - 1.0));
  return worst;
}

std::string oracle_task1(const std::vector<std::vector<std::string>>& story,
                         const std::vector<std::string>& question) {
  if (question.size() != 3 || question[0] != "where" || question[1] != "is") {
    throw DataError("not a 'where is X' question: " + join(question));
  }
  const std::string& who = question[2];
  for (auto it = story.rbegin(); it != story.rend(); ++it) {
    const auto& s = *it;
    if (s.size() < 3 || s[0] != who) continue;
    const auto to = std::find(s.begin() + 1, s.end(), "to");
    if (to == s.end() || to + 1 == s.end()) continue;
    return s.back();
  }
  throw DataError("no movement of '" + who + "' in the story");
}

std::vector<ReproduceRow> reproduce_tasks(const ReproduceOptions& options) {
  if (options.tasks.empty()) throw ConfigError("no tasks to reproduce");
  if (!(options.budget > 0.0)) throw ConfigError("budget multiplier must be positive");
  std::string missing;
  for (int t : options.tasks) {
    task_info(t);
    for (const char* split : {"train", "test"}) {
      try {
        find_task_file(options.data_dir, t, split);
      } catch (const DataError& e) {
        missing += std::string(missing.empty() ? "" : "; ") + e.what();
      }
    }
  }
  if (!missing.empty()) throw DataError(missing);

  std::vector<ReproduceRow> rows(options.tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      try {
        const int t = options.tasks[i];
        const TaskInfo& info = task_info(t);
        const auto start = std::chrono::steady_clock::now();
        const TaskData data = load_task(options.data_dir, t);
        const Dataset ds = encode_task(data);
        TrainConfig tc;
        tc.initial_lr = options.lr;
        tc.max_grad_norm = options.clip;
        tc.seed = options.seed;
        tc.record_time = options.record_time;
        tc.max_batches = static_cast<std::size_t>(std::llround(options.budget * static_cast<double>(info.batches)));
        TrainHooks hooks;
        hooks.meta["task"] = std::to_string(t);
        const auto mc = model_config_for(data, info.size, info.layers, info.memories, options.dropout, options.seed);
        const TrainResult res = train(mc, tc, ds, hooks);
        ReproduceRow row;
        row.task = t;
        row.error_rate = evaluate(res.best, data.test, data.vocab);
        row.solved = row.error_rate < kSolvedThreshold;
        row.batches_used = res.best_batch;
        if (options.record_time) {
          row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        }
        rows[i] = row;
        if (options.progress) {
          std::lock_guard lock(io);
          *options.progress << "task " << t << " error " << row.error_rate << " after " << res.batches_run
                            << " batches\n"
                            << std::flush;
        }
      } catch (...) {
        std::lock_guard lock(io);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(options.jobs, rows.size()));
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < n; ++j) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

std::string format_reproduce_report(const std::vector<ReproduceRow>& rows) {
  std::string out = "task\terror_rate\tsolved\tbatches_used\tseconds\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d\t%.4f\t%s\t%zu\t%.1f\n", r.task, r.error_rate, r.solved ? "yes" : "no",
                  r.batches_used, r.seconds);
    out += buf;
  }
  return out;
}

}  // namespace amn
