#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "amn/ops.hpp"

namespace amn {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the raw engine output, so the stream is
// identical across standard library implementations.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// GRU weights with the three gates fused column-wise in the order [z | r | h]:
//   w_x  = [W_z | W_r | W_h]   (d_in x 3d)
//   u_zr = [U_z | U_r]         (d x 2d)
//   u_h  = U_h                 (d x d)
//   b    = [b_z | b_r | b_h]   (1 x 3d)
template <typename T>
struct GruParams {
  Tensor<T> w_x;
  Tensor<T> u_zr;
  Tensor<T> u_h;
  Tensor<T> b;

  GruParams() = default;
  GruParams(std::size_t input_size, std::size_t hidden_size)
      : w_x(input_size, 3 * hidden_size),
        u_zr(hidden_size, 2 * hidden_size),
        u_h(hidden_size, hidden_size),
        b(1, 3 * hidden_size) {}

  std::size_t input_size() const { return w_x.rows(); }
  std::size_t hidden_size() const { return u_h.rows(); }

  void validate() const {
    const std::size_t d = hidden_size();
    if (d == 0 || w_x.cols() != 3 * d || u_zr.rows() != d || u_zr.cols() != 2 * d ||
        u_h.cols() != d || b.rows() != 1 || b.cols() != 3 * d) {
      throw ShapeError("GruParams: inconsistent gate shapes for hidden size " + std::to_string(d));
    }
  }
};

// A stack of 1..3 GRU layers; layer k reads layer k-1's outputs.
template <typename T>
struct StackSpec {
  std::vector<GruParams<T>> layers;

  StackSpec() = default;
  StackSpec(std::size_t depth, std::size_t input_size, std::size_t hidden_size) {
    for (std::size_t l = 0; l < depth; ++l) layers.emplace_back(l == 0 ? input_size : hidden_size, hidden_size);
  }

  std::size_t depth() const { return layers.size(); }
  std::size_t hidden_size() const { return layers.front().hidden_size(); }

  void validate() const {
    if (layers.empty() || layers.size() > 3) {
      throw ConfigError("StackSpec: depth must be 1, 2 or 3, got " + std::to_string(layers.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].validate();
      if (l > 0 && layers[l].input_size() != layers[l - 1].hidden_size()) {
        throw ShapeError("StackSpec: layer " + std::to_string(l) + " input size mismatch");
      }
    }
  }
};

// Inverted dropout configuration for one forward pass. A null rng or rate 0
// or training == false makes apply_dropout the identity.
struct DropoutConfig {
  double rate = 0.0;
  bool training = false;
  Rng* rng = nullptr;

  bool active() const { return training && rate > 0.0 && rng != nullptr; }
};

template <typename T>
Var<T> apply_dropout(Var<T> x, double rate, bool training, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  Tensor<T> mask(x.rows(), x.cols());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask.values()) m = uniform01(rng) < rate ? T(0) : keep_scale;
  return mask_scale(x, std::move(mask));
}

template <typename T>
Var<T> apply_dropout(Var<T> x, const DropoutConfig& cfg) {
  if (!cfg.active()) return x;
  return apply_dropout(x, cfg.rate, cfg.training, *cfg.rng);
}

// One GRU update:
//   z  = sigmoid(x W_z + h U_z + b_z)
//   r  = sigmoid(x W_r + h U_r + b_r)
//   h~ = tanh(x W_h + (r * h) U_h + b_h)
//   h' = (1 - z) * h + z * h~
template <typename T>
Var<T> gru_step(Var<T> x, Var<T> h_prev, const GruParams<T>& p) {
  const std::size_t d = p.hidden_size();
  if (x.cols() != p.input_size() || h_prev.cols() != d || x.rows() != h_prev.rows()) {
    throw ShapeError("gru_step: input " + x.value().shape_str() + " / state " +
                     h_prev.value().shape_str() + " do not fit cell " +
                     Tensor<T>::shape_string(p.input_size(), d));
  }
  Tape<T>& tape = *x.tape();
  Var<T> xw = add(matmul(x, tape.param(p.w_x)), tape.param(p.b));
  Var<T> hu = matmul(h_prev, tape.param(p.u_zr));
  Var<T> z = sigmoid(add(slice_cols(xw, 0, d), slice_cols(hu, 0, d)));
  Var<T> r = sigmoid(add(slice_cols(xw, d, d), slice_cols(hu, d, d)));
  Var<T> candidate =
      tanh(add(slice_cols(xw, 2 * d, d), matmul(mul(r, h_prev), tape.param(p.u_h))));
  return add(mul(one_minus(z), h_prev), mul(z, candidate));
}

// Output of a (possibly stacked) sequence run.
template <typename T>
struct SequenceResult {
  std::vector<Var<T>> states;        // top-layer output per step, [B x d] each
  Var<T> final;                      // top-layer state at each row's last live step
  std::vector<Var<T>> layer_finals;  // per-layer final states, bottom first
};

// Runs a GRU stack over `inputs` (one [B x d_in] Var per step). mask[t][b] == 0
// marks padding: that row's state is carried forward unchanged. `h0` holds one
// initial state per layer.
template <typename T>
SequenceResult<T> run_sequence(const std::vector<Var<T>>& inputs, const std::vector<Var<T>>& h0,
                               const StackSpec<T>& spec,
                               const std::vector<std::vector<std::uint8_t>>& mask,
                               const DropoutConfig& dropout = {}) {
  if (inputs.empty()) throw ContractError("run_sequence: empty sequence");
  spec.validate();
  if (h0.size() != spec.depth()) {
    throw ContractError("run_sequence: expected " + std::to_string(spec.depth()) + " initial states");
  }
  if (mask.size() != inputs.size()) throw ShapeError("run_sequence: mask length disagrees with inputs");

  std::vector<Var<T>> h = h0;
  SequenceResult<T> out;
  out.states.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto& live = mask[t];
    const bool all_live = std::all_of(live.begin(), live.end(), [](std::uint8_t m) { return m != 0; });
    Var<T> x = inputs[t];
    for (std::size_t l = 0; l < spec.depth(); ++l) {
      Var<T> fresh = gru_step(x, h[l], spec.layers[l]);
      h[l] = all_live ? fresh : select_rows(live, fresh, h[l]);
      x = apply_dropout(h[l], dropout);
    }
    out.states.push_back(x);
  }
  out.final = h.back();
  out.layer_finals = h;
  return out;
}

// Single-sequence form: inputs [n x d_in], h0 [1 x d], mask of length n.
// Returns (states [n x d], final [1 x d]).
template <typename T>
std::pair<Var<T>, Var<T>> run_sequence(Var<T> inputs, Var<T> h0, const StackSpec<T>& spec,
                                       const std::vector<std::uint8_t>& mask) {
  const std::size_t n = inputs.rows();
  if (n == 0) throw ContractError("run_sequence: empty sequence");
  if (mask.size() != n) throw ShapeError("run_sequence: mask length disagrees with inputs");
  std::vector<Var<T>> steps;
  std::vector<std::vector<std::uint8_t>> step_mask;
  for (std::size_t t = 0; t < n; ++t) {
    steps.push_back(gather_rows(inputs, {t}));
    step_mask.push_back({mask[t]});
  }
  Tape<T>& tape = *inputs.tape();
  std::vector<Var<T>> init{h0};
  for (std::size_t l = 1; l < spec.depth(); ++l) init.push_back(tape.constant(Tensor<T>(1, spec.hidden_size())));
  auto res = run_sequence(steps, init, spec, step_mask);
  return {interleave_rows(res.states), res.final};
}

// Bidirectional run fused by summation: states[t] = fwd[t] + bwd[t], and the
// final state is fwd_final + bwd_final (per layer in layer_finals). The
// backward direction reads the steps in reverse; padding at the tail is
// skipped because masked steps carry the initial state unchanged.
template <typename T>
SequenceResult<T> run_bidirectional(const std::vector<Var<T>>& inputs,
                                    const std::vector<Var<T>>& h0_fwd,
                                    const std::vector<Var<T>>& h0_bwd, const StackSpec<T>& fwd,
                                    const StackSpec<T>& bwd,
                                    const std::vector<std::vector<std::uint8_t>>& mask,
                                    const DropoutConfig& dropout = {}) {
  if (inputs.empty()) throw ContractError("run_bidirectional: empty sequence");
  const std::size_t n = inputs.size();
  auto f = run_sequence(inputs, h0_fwd, fwd, mask, dropout);
  std::vector<Var<T>> rev_inputs(inputs.rbegin(), inputs.rend());
  std::vector<std::vector<std::uint8_t>> rev_mask(mask.rbegin(), mask.rend());
  auto b = run_sequence(rev_inputs, h0_bwd, bwd, rev_mask, dropout);

  SequenceResult<T> out;
  out.states.reserve(n);
  for (std::size_t t = 0; t < n; ++t) out.states.push_back(add(f.states[t], b.states[n - 1 - t]));
  for (std::size_t l = 0; l < f.layer_finals.size(); ++l) {
    out.layer_finals.push_back(add(f.layer_finals[l], b.layer_finals[l]));
  }
  out.final = out.layer_finals.back();
  return out;
}

// Single-sequence bidirectional form: inputs [n x d_in] -> (states [n x d], final [1 x d]).
template <typename T>
std::pair<Var<T>, Var<T>> run_bidirectional(Var<T> inputs, Var<T> h0_fwd, Var<T> h0_bwd,
                                            const StackSpec<T>& fwd, const StackSpec<T>& bwd,
                                            const std::vector<std::uint8_t>& mask) {
  const std::size_t n = inputs.rows();
  if (n == 0) throw ContractError("run_bidirectional: empty sequence");
  if (mask.size() != n) throw ShapeError("run_bidirectional: mask length disagrees with inputs");
  Tape<T>& tape = *inputs.tape();
  std::vector<Var<T>> steps;
  std::vector<std::vector<std::uint8_t>> step_mask;
  for (std::size_t t = 0; t < n; ++t) {
    steps.push_back(gather_rows(inputs, {t}));
    step_mask.push_back({mask[t]});
  }
  auto init = [&](Var<T> bottom, std::size_t depth) {
    std::vector<Var<T>> v{bottom};
    for (std::size_t l = 1; l < depth; ++l) v.push_back(tape.constant(Tensor<T>(1, fwd.hidden_size())));
    return v;
  };
  auto res = run_bidirectional(steps, init(h0_fwd, fwd.depth()), init(h0_bwd, bwd.depth()), fwd, bwd,
                               step_mask);
  return {interleave_rows(res.states), res.final};
}

}  // namespace amn
