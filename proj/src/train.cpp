#include "amn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <ostream>

#include "amn/errors.hpp"

namespace amn {

void TrainConfig::validate() const {
  if (!(initial_lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(max_grad_norm > 0.0)) throw ConfigError("gradient clip norm must be positive");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (eval_every == 0 || eval_every % batch_size != 0) {
    throw ConfigError("eval_every must be a positive multiple of the batch size");
  }
  if (anneal_patience == 0) throw ConfigError("anneal patience must be positive");
  if (!(anneal_factor > 1.0)) throw ConfigError("anneal factor must exceed 1");
  if (min_lr < 0.0) throw ConfigError("min_lr must not be negative");
}

std::string log_header() { return "batch\ttrain_loss\tval_error\tlr\tseconds\n"; }

std::string format_log_entry(const TrainLogEntry& e) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu\t%.6f\t%.4f\t%.8g\t%.1f\n", e.batch, e.train_loss, e.val_error,
                e.lr, e.seconds);
  return buf;
}

std::string format_log(std::span<const TrainLogEntry> log) {
  std::string out = log_header();
  for (const auto& e : log) out += format_log_entry(e);
  return out;
}

double Annealer::update(double lr, const EvalPoint& p) {
  const bool loss_stalled = !(p.train_loss < prev_loss_ - tolerance_);
  const bool val_worse = p.val_error > prev_val_;
  prev_loss_ = p.train_loss;
  prev_val_ = p.val_error;
  loss_streak_ = loss_stalled ? loss_streak_ + 1 : 0;
  val_streak_ = val_worse ? val_streak_ + 1 : 0;
  last_annealed_ = loss_streak_ >= patience_ || val_streak_ >= patience_;
  if (last_annealed_) {
    loss_streak_ = val_streak_ = 0;
    return lr / factor_;
  }
  return lr;
}

double anneal(double lr, std::span<const EvalPoint> history, std::size_t patience, double factor,
              double tolerance) {
  Annealer a(patience, factor, tolerance);
  for (const auto& p : history) a.update(lr, p);
  return a.last_annealed() ? lr / factor : lr;
}

Dataset encode_task(const TaskData& data) {
  Dataset d;
  d.vocab = data.vocab;
  d.train = data.vocab.encode_all(data.train);
  for (const auto& ex : data.val) d.val.push_back(data.vocab.encode_lenient(ex));
  return d;
}

ModelConfig model_config_for(const TaskData& data, std::size_t size, std::size_t depth,
                             std::size_t memories, double dropout, std::uint64_t seed) {
  ModelConfig c;
  c.size = size;
  c.depth = depth;
  c.memories = memories;
  c.dropout = dropout;
  c.vocab_size = data.vocab.size();
  c.max_sentence_len = data.stats.max_sentence_len;
  c.max_question_len = data.stats.max_question_len;
  c.max_story_len = data.stats.max_story_len;
  c.max_answer_len = std::max<std::size_t>(1, data.stats.max_answer_len);
  c.seed = seed;
  c.validate();
  return c;
}

namespace {

std::vector<Batch> fixed_batches(std::span<const EncodedExample> examples, std::size_t batch_size) {
  std::vector<Batch> out;
  for (std::size_t start = 0; start < examples.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, examples.size() - start);
    out.push_back(make_batch(examples.subspan(start, n)));
  }
  return out;
}

// Runs fn(i) for every batch index in parallel; the first exception is rethrown.
template <typename F>
void parallel_batches(std::size_t n, F&& fn) {
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(amn_eval_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

template <typename T>
std::vector<std::vector<std::size_t>> predict(const AmnModel<T>& model,
                                              std::span<const EncodedExample> examples,
                                              std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::vector<std::size_t>> out(examples.size());
  const std::size_t n = (examples.size() + batch_size - 1) / batch_size;
  parallel_batches(n, [&](std::size_t i) {
    const std::size_t start = i * batch_size;
    const Batch batch = make_batch(examples.subspan(start, std::min(batch_size, examples.size() - start)));
    Tape<T> tape(false);
    ForwardOptions opt;
    opt.compute_loss = false;
    opt.predict = true;
    auto res = model.forward(tape, batch, opt);
    for (std::size_t b = 0; b < batch.size; ++b) out[start + b] = std::move(res.predictions[b]);
  });
  return out;
}

template <typename T>
double error_rate(const AmnModel<T>& model, std::span<const EncodedExample> examples,
                  std::size_t batch_size) {
  if (examples.empty()) return 0.0;
  const auto preds = predict(model, examples, batch_size);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) wrong += preds[i] != examples[i].answer;
  return static_cast<double>(wrong) / static_cast<double>(examples.size());
}

template std::vector<std::vector<std::size_t>> predict(const AmnModel<float>&, std::span<const EncodedExample>,
                                                       std::size_t);
template std::vector<std::vector<std::size_t>> predict(const AmnModel<double>&, std::span<const EncodedExample>,
                                                       std::size_t);
template double error_rate(const AmnModel<float>&, std::span<const EncodedExample>, std::size_t);
template double error_rate(const AmnModel<double>&, std::span<const EncodedExample>, std::size_t);

double evaluate(const Checkpoint& ckpt, std::span<const Example> examples, const Vocabulary& vocab) {
  if (ckpt.vocab != vocab.tokens()) {
    throw ContractError("checkpoint vocabulary does not match the data vocabulary");
  }
  AmnModel<float> model(ckpt.config, ckpt.params);
  std::vector<EncodedExample> enc;
  enc.reserve(examples.size());
  for (const auto& ex : examples) enc.push_back(vocab.encode_lenient(ex));
  return error_rate(model, enc);
}

double mean_loss(const AmnModel<float>& model, std::span<const EncodedExample> examples,
                 std::size_t batch_size) {
  if (examples.empty()) return 0.0;
  const auto batches = fixed_batches(examples, batch_size);
  std::vector<double> sums(batches.size());
  parallel_batches(batches.size(), [&](std::size_t i) {
    Tape<float> tape(false);
    auto res = model.forward(tape, batches[i], ForwardOptions{});
    double s = 0.0;
    for (float l : res.example_loss) s += l;
    sums[i] = s;
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total / static_cast<double>(examples.size());
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Dataset& data,
                  const TrainHooks& hooks) {
  return train(AmnModel<float>(model_config), config, data, hooks);
}

TrainResult train(AmnModel<float> model, const TrainConfig& config, const Dataset& data,
                  const TrainHooks& hooks) {
  config.validate();
  if (data.train.empty()) throw DataError("training set is empty");
  if (model.config().vocab_size != data.vocab.size()) {
    throw ContractError("model vocabulary size differs from the dataset vocabulary");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::size_t interval = config.eval_interval();
  const double min_lr = config.effective_min_lr();

  TrainResult result;
  result.best = make_checkpoint(model, data.vocab.tokens(), hooks.meta);
  result.best_val_error = std::numeric_limits<double>::infinity();
  if (hooks.log_stream) *hooks.log_stream << log_header() << std::flush;

  auto named = model.params().named();
  std::vector<Tensor<float>*> params;
  for (auto& [name, t] : named) params.push_back(t);
  std::vector<Tensor<float>> grads;
  for (const auto* p : params) grads.emplace_back(p->rows(), p->cols());
  std::vector<Tensor<float>*> grad_ptrs;
  for (auto& g : grads) grad_ptrs.push_back(&g);
  std::vector<const Tensor<float>*> grad_cptrs(grad_ptrs.begin(), grad_ptrs.end());

  AdamState<float> adam;
  Annealer annealer(config.anneal_patience, config.anneal_factor, config.loss_tolerance);
  Rng dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  double lr = config.initial_lr;
  double window_loss = 0.0;
  std::size_t window_batches = 0;

  std::vector<Batch> epoch;
  std::size_t cursor = 0, epoch_index = 0;
  std::size_t batch = 0;
  result.stop_reason = "max_batches";

  while (batch < config.max_batches) {
    if (cursor == epoch.size()) {
      epoch = batchify(data.train, config.batch_size, config.seed + 1000003ULL * epoch_index++);
      cursor = 0;
    }
    const Batch& b = epoch[cursor++];
    ++batch;

    double loss = 0.0;
    try {
      Tape<float> tape;
      ForwardOptions opt;
      opt.training = true;
      opt.rng = &dropout_rng;
      auto res = model.forward(tape, b, opt);
      loss = res.loss.value()[0];
      tape.backward(res.loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor<float>* g = tape.param_grad(*params[i]);
        if (g) {
          grads[i] = *g;
        } else {
          grads[i].fill(0.0f);
        }
      }
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (batch " + std::to_string(batch) + ", lr " +
                         std::to_string(lr) + ")");
    }
    const double norm = clip_gradients<float>(grad_ptrs, config.max_grad_norm);
    if (!std::isfinite(loss) || !std::isfinite(norm)) {
      throw NumericError("non-finite loss or gradient at batch " + std::to_string(batch) + ", lr " +
                         std::to_string(lr));
    }
    adam_step<float>(params, grad_cptrs, adam, lr);
    window_loss += loss;
    ++window_batches;

    const bool last = batch == config.max_batches;
    if (batch % interval != 0 && !last) continue;

    TrainLogEntry entry;
    entry.batch = batch;
    entry.train_loss = window_loss / static_cast<double>(window_batches);
    entry.val_error = data.val.empty() ? 0.0 : error_rate(model, data.val);
    entry.lr = lr;
    if (config.record_time) {
      entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    window_loss = 0.0;
    window_batches = 0;
    result.log.push_back(entry);
    if (hooks.log_stream) *hooks.log_stream << format_log_entry(entry) << std::flush;
    if (hooks.on_eval) hooks.on_eval(entry);

    if (entry.val_error < result.best_val_error) {
      result.best_val_error = entry.val_error;
      result.best_batch = batch;
      auto meta = hooks.meta;
      meta["batch"] = std::to_string(batch);
      result.best = make_checkpoint(model, data.vocab.tokens(), std::move(meta));
    }
    if (config.target_val_error >= 0.0 && entry.val_error <= config.target_val_error) {
      result.stop_reason = "target_val_error";
      break;
    }
    lr = annealer.update(lr, {entry.train_loss, entry.val_error});
    if (lr < min_lr) {
      result.stop_reason = "min_lr";
      break;
    }
  }
  result.batches_run = batch;
  if (result.log.empty()) result.best_val_error = data.val.empty() ? 0.0 : 1.0;
  return result;
}

}  // namespace amn
