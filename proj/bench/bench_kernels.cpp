// Parallel kernels against the serial reference, plus one training step.

#include <benchmark/benchmark.h>

#include <random>
#include <sstream>
#include <tuple>
#include <vector>

#include "amn/kernels.hpp"
#include "amn/synth.hpp"
#include "amn/train.hpp"

namespace {

std::vector<float> random_vec(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 1), b = random_vec(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      amn::kernels::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    } else {
      amn::kernels::reference::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

template <bool Parallel>
void BM_gemm_tn(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), k = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vec(m * k, 3), b = random_vec(m * n, 4);
  std::vector<float> c(k * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      amn::kernels::gemm_tn_acc(a.data(), b.data(), c.data(), m, k, n);
    } else {
      amn::kernels::reference::gemm_tn_acc(a.data(), b.data(), c.data(), m, k, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * k * n));
}

// Shapes seen in training: batch x (input, 3*hidden) for GRU steps, and a
// square case large enough to show thread scaling.
#define AMN_SHAPES Args({50, 64, 192})->Args({500, 64, 192})->Args({256, 256, 256})->Args({1024, 512, 512})

BENCHMARK(BM_gemm<true>)->AMN_SHAPES;
BENCHMARK(BM_gemm<false>)->AMN_SHAPES;
BENCHMARK(BM_gemm_tn<true>)->AMN_SHAPES;
BENCHMARK(BM_gemm_tn<false>)->AMN_SHAPES;

void BM_train_step(benchmark::State& state) {
  std::istringstream text(amn::generate_task_text(1, 250, 7));
  amn::TaskData data;
  std::tie(data.train, data.val) = amn::split_train_val(amn::parse_babi(text));
  data.vocab = amn::build_vocabulary(data.train);
  data.stats = amn::dataset_stats(data.train);
  const amn::Dataset ds = amn::encode_task(data);
  const auto mc = amn::model_config_for(data, static_cast<std::size_t>(state.range(0)), 1, 1, 0.0, 1);
  amn::TrainConfig tc;
  tc.max_batches = 4;
  tc.record_time = false;
  for (auto _ : state) benchmark::DoNotOptimize(amn::train(mc, tc, ds).batches_run);
  state.SetItemsProcessed(state.iterations() * 4);
}
BENCHMARK(BM_train_step)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
