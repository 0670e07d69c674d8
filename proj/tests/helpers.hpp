#pragma once

#include <random>

#include "amn/gradcheck.hpp"
#include "amn/ops.hpp"

namespace amn::test {

inline Tensor<double> random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0,
                                    double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> t(r, c);
  for (auto& x : t.values()) x = u(rng);
  return t;
}

// sum(x * w) for a fixed random w, so every output coordinate gets a distinct
// upstream gradient.
inline Var<double> probe(Var<double> x, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tape<double>& tape = *x.tape();
  return sum(mul(x, tape.constant(random_tensor(x.rows(), x.cols(), rng))));
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace amn::test
