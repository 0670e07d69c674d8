#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "amn/babi.hpp"
#include "amn/checkpoint.hpp"
#include "amn/model.hpp"

namespace amn {

struct TrainConfig {
  double initial_lr = 0.005;
  double max_grad_norm = 1.0;
  std::size_t batch_size = 50;
  std::size_t eval_every = 1000;  // training examples between evaluations
  std::size_t anneal_patience = 3;
  double anneal_factor = 2.0;
  double loss_tolerance = 1e-4;  // a window loss must beat the best by more than this
  std::size_t max_batches = 4000;
  double min_lr = 0.0;  // 0 selects initial_lr / 2^10
  std::uint64_t seed = 1;
  double target_val_error = -1.0;  // stop once validation error <= target; negative disables
  bool record_time = true;         // false writes 0 seconds so logs are byte-comparable

  double effective_min_lr() const { return min_lr > 0.0 ? min_lr : initial_lr / 1024.0; }
  std::size_t eval_interval() const { return eval_every / batch_size; }
  void validate() const;
};

struct TrainLogEntry {
  std::size_t batch = 0;
  double train_loss = 0.0;  // mean batch loss since the previous evaluation
  double val_error = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

std::string log_header();
std::string format_log_entry(const TrainLogEntry& e);
std::string format_log(std::span<const TrainLogEntry> log);

// Adam moments for a fixed list of parameter arrays.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update of `params` in place. An empty state is
// initialised to zeros on first use.
template <typename T>
void adam_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
               AdamState<T>& state, double lr, const AdamHyper& h = {}) {
  if (params.size() != grads.size()) throw ContractError("adam_step: params/grads count mismatch");
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->rows(), p->cols());
      state.v.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: state built for other params");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i]) || !params[i]->same_shape(state.m[i])) {
      throw ContractError("adam_step: shape mismatch " + params[i]->shape_str() + " vs " +
                          grads[i]->shape_str());
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->data();
    const T* g = grads[i]->data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    for (std::size_t j = 0; j < params[i]->size(); ++j) {
      const double gj = g[j];
      const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * gj;
      const double vj = h.beta2 * v[j] + (1.0 - h.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      p[j] = static_cast<T>(p[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + h.eps));
    }
  }
}

// Rescales all gradients together when their global L2 norm exceeds
// max_norm. Returns the norm before clipping.
template <typename T>
double clip_gradients(std::span<Tensor<T>* const> grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ConfigError("clip_gradients: max_norm must be positive");
  double sq = 0.0;
  for (const Tensor<T>* g : grads)
    for (const T x : g->values()) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T s = static_cast<T>(max_norm / norm);
    for (Tensor<T>* g : grads)
      for (T& x : g->values()) x *= s;
  }
  return norm;
}

struct EvalPoint {
  double train_loss;
  double val_error;
};

// Learning-rate annealing state. Two streaks are tracked: evaluations whose
// window loss fails to beat the previous window by more than `tolerance`,
// and evaluations whose validation error is above the previous one. When either
// streak reaches `patience` the rate is divided by `factor` and both reset.
class Annealer {
 public:
  Annealer(std::size_t patience = 3, double factor = 2.0, double tolerance = 1e-4)
      : patience_(patience), factor_(factor), tolerance_(tolerance) {}

  // Returns the (possibly reduced) learning rate after this evaluation.
  double update(double lr, const EvalPoint& p);

  std::size_t loss_streak() const { return loss_streak_; }
  std::size_t val_streak() const { return val_streak_; }
  bool last_annealed() const { return last_annealed_; }

 private:
  std::size_t patience_;
  double factor_;
  double tolerance_;
  double prev_loss_ = std::numeric_limits<double>::infinity();
  double prev_val_ = std::numeric_limits<double>::infinity();
  std::size_t loss_streak_ = 0;
  std::size_t val_streak_ = 0;
  bool last_annealed_ = false;
};

// Replays `history` through an Annealer and returns lr, halved when the last
// evaluation completes a non-improving streak.
double anneal(double lr, std::span<const EvalPoint> history, std::size_t patience = 3,
              double factor = 2.0, double tolerance = 1e-4);

struct Dataset {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> val;
  Vocabulary vocab;
};

Dataset encode_task(const TaskData& data);

// Model config sized for a task's vocabulary and lengths.
ModelConfig model_config_for(const TaskData& data, std::size_t size, std::size_t depth,
                             std::size_t memories, double dropout, std::uint64_t seed);

struct TrainResult {
  Checkpoint best;
  std::vector<TrainLogEntry> log;
  std::size_t batches_run = 0;
  std::size_t best_batch = 0;
  double best_val_error = 1.0;
  std::string stop_reason;
};

struct TrainHooks {
  std::ostream* log_stream = nullptr;  // receives the TSV log as it grows
  std::function<void(const TrainLogEntry&)> on_eval;
  std::map<std::string, std::string> meta;  // copied into the checkpoint
};

// Teacher-forced training with Adam, global-norm clipping, periodic
// validation (free-running, exact match), annealing and best-checkpoint
// selection. NaN/Inf anywhere raises NumericError naming the batch and lr.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Dataset& data,
                  const TrainHooks& hooks = {});

// Continues from given parameters instead of a fresh initialisation.
TrainResult train(AmnModel<float> model, const TrainConfig& config, const Dataset& data,
                  const TrainHooks& hooks = {});

// Fraction of examples whose greedy decode differs from the gold answer.
template <typename T>
double error_rate(const AmnModel<T>& model, std::span<const EncodedExample> examples,
                  std::size_t batch_size = 100);

// Predictions in example order (without EOS).
template <typename T>
std::vector<std::vector<std::size_t>> predict(const AmnModel<T>& model,
                                              std::span<const EncodedExample> examples,
                                              std::size_t batch_size = 100);

// Error rate of a checkpoint on raw examples. The checkpoint's vocabulary
// must equal `vocab` (ContractError otherwise); unknown words map to UNK.
double evaluate(const Checkpoint& ckpt, std::span<const Example> examples, const Vocabulary& vocab);

// Mean teacher-forced loss, without dropout.
double mean_loss(const AmnModel<float>& model, std::span<const EncodedExample> examples,
                 std::size_t batch_size = 100);

}  // namespace amn
