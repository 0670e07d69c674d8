#include "amn/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace amn::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelThreshold = 1 << 16;

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  const bool par = m * k * n >= kParallelThreshold && m > 1;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (par)
  for (long long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    T* crow = c + i * n;
    if (!accumulate) std::memset(crow, 0, n * sizeof(T));
    const T* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      if (av == T(0)) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  // Each thread owns a block of output rows (columns of a), so no reduction is needed.
  const bool par = m * k * n >= kParallelThreshold && k > 1;
  const auto out_rows = static_cast<long long>(k);
#pragma omp parallel for schedule(static) if (par)
  for (long long pp = 0; pp < out_rows; ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    T* crow = c + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i * k + p];
      if (av == T(0)) continue;
      const T* brow = b + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  const bool par = m * k * n >= kParallelThreshold && m > 1;
  const auto rows = static_cast<long long>(m);
#pragma omp parallel for schedule(static) if (par)
  for (long long ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const T* arow = a + i * n;
    T* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

namespace reference {

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
}

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) {
      T acc = T(0);
      for (std::size_t i = 0; i < m; ++i) acc += a[i * k + p] * b[i * n + j];
      c[p * n + j] += acc;
    }
  }
}

template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += a[i * n + j] * b[p * n + j];
      c[i * k + p] += acc;
    }
  }
}

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void gemm_tn_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                 std::size_t);
template void gemm_tn_acc<double>(const double*, const double*, double*, std::size_t,
                                  std::size_t, std::size_t);
template void gemm_nt_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                 std::size_t);
template void gemm_nt_acc<double>(const double*, const double*, double*, std::size_t,
                                  std::size_t, std::size_t);

}  // namespace reference

template void gemm<float>(const float*, const float*, float*, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(const double*, const double*, double*, std::size_t, std::size_t,
                           std::size_t, bool);
template void gemm_tn_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                 std::size_t);
template void gemm_tn_acc<double>(const double*, const double*, double*, std::size_t,
                                  std::size_t, std::size_t);
template void gemm_nt_acc<float>(const float*, const float*, float*, std::size_t, std::size_t,
                                 std::size_t);
template void gemm_nt_acc<double>(const double*, const double*, double*, std::size_t,
                                  std::size_t, std::size_t);

}  // namespace amn::kernels
