#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "amn/tape.hpp"

namespace amn {

// Scalar-valued function of tape variables, used by grad_check.
using GradFn = std::function<Var<double>(Tape<double>&, std::span<const Var<double>>)>;

// Compares reverse-mode gradients of `f` against central differences.
// Returns max over coordinates of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double grad_check(const GradFn& f, const std::vector<Tensor<double>>& inputs,
                         double epsilon = 1e-6) {
  if (epsilon < 1e-7 || epsilon > 1e-3) throw ContractError("grad_check: epsilon outside [1e-7, 1e-3]");

  auto evaluate = [&](const std::vector<Tensor<double>>& xs) {
    Tape<double> tape(false);
    std::vector<Var<double>> vars;
    for (const auto& x : xs) vars.push_back(tape.variable(x, false));
    Var<double> out = f(tape, vars);
    if (out.rows() != 1 || out.cols() != 1) throw ContractError("grad_check: f must return a scalar");
    return out.value()[0];
  };

  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  Var<double> out = f(tape, vars);
  if (out.rows() != 1 || out.cols() != 1) throw ContractError("grad_check: f must return a scalar");
  tape.backward(out);

  double worst = 0.0;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const bool reached = tape.has_grad(vars[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double orig = probe[i][j];
      probe[i][j] = orig + epsilon;
      const double up = evaluate(probe);
      probe[i][j] = orig - epsilon;
      const double down = evaluate(probe);
      probe[i][j] = orig;
      const double numeric = (up - down) / (2 * epsilon);
      const double analytic = reached ? tape.grad(vars[i])[j] : 0.0;
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace amn
