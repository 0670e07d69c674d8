#pragma once

#include <cstddef>

// Dense GEMM kernels used by the tape ops. The default entry points split the
// output rows across OpenMP threads; `reference` holds plain serial triple
// loops kept as a test oracle and benchmark baseline.
namespace amn::kernels {

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

// c[k x n] += a[m x k]^T * b[m x n]
template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

// c[m x k] += a[m x n] * b[k x n]^T
template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);

// Number of threads the parallel kernels will use.
int max_threads();

namespace reference {

template <typename T>
void gemm(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate);

template <typename T>
void gemm_tn_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n);

template <typename T>
void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t n, std::size_t k);

}  // namespace reference

}  // namespace amn::kernels
