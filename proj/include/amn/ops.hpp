#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "amn/kernels.hpp"
#include "amn/tape.hpp"

// Differentiable operations over Var. Each op computes its forward value
// eagerly and registers a closure that pushes the output gradient back to the
// inputs. Broadcasting exists only for adding a 1 x n bias row to an m x n
// operand; every other shape disagreement is a ShapeError.
namespace amn {

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace detail

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  if (A.cols() != B.rows()) {
    throw ShapeError("matmul: inner dimensions disagree " + A.shape_str() + " x " +
                     B.shape_str());
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  Tensor<T> C(m, n);
  kernels::gemm(A.data(), B.data(), C.data(), m, k, n, false);
  mac_counter() += m * k * n;
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(
      std::move(C), {a, b},
      [ai, bi, m, k, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(ai)) {
          kernels::gemm_nt_acc(G.data(), t.value(bi).data(), t.grad_ref(ai).data(), m, n, k);
        }
        if (t.requires_grad(bi)) {
          kernels::gemm_tn_acc(t.value(ai).data(), G.data(), t.grad_ref(bi).data(), m, k, n);
        }
      },
      "matmul");
}

// a + b, where b may be a 1 x n bias row broadcast over the rows of a.
template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  const bool bias = !A.same_shape(B) && B.rows() == 1 && B.cols() == A.cols();
  if (!bias) detail::require_same_shape(A, B, "add");
  Tensor<T> C = A;
  const std::size_t n = A.cols();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] += bias ? B[i % n] : B[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(
      std::move(C), {a, b},
      [ai, bi, bias, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(ai)) {
          Tensor<T>& ga = t.grad_ref(ai);
          for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
        }
        if (t.requires_grad(bi)) {
          Tensor<T>& gb = t.grad_ref(bi);
          for (std::size_t i = 0; i < G.size(); ++i) gb[bias ? i % n : i] += G[i];
        }
      },
      "add");
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::require_same_shape(a.value(), b.value(), "sub");
  Tensor<T> C = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] -= B[i];
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(
      std::move(C), {a, b},
      [ai, bi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(ai)) {
          Tensor<T>& ga = t.grad_ref(ai);
          for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
        }
        if (t.requires_grad(bi)) {
          Tensor<T>& gb = t.grad_ref(bi);
          for (std::size_t i = 0; i < G.size(); ++i) gb[i] -= G[i];
        }
      },
      "sub");
}

// Elementwise (Hadamard) product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_shape(a.value(), b.value(), "mul");
  Tensor<T> C = a.value();
  const Tensor<T>& B = b.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
  mac_counter() += C.size();
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(
      std::move(C), {a, b},
      [ai, bi](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(ai)) {
          Tensor<T>& ga = t.grad_ref(ai);
          const Tensor<T>& bv = t.value(bi);
          for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * bv[i];
        }
        if (t.requires_grad(bi)) {
          Tensor<T>& gb = t.grad_ref(bi);
          const Tensor<T>& av = t.value(ai);
          for (std::size_t i = 0; i < G.size(); ++i) gb[i] += G[i] * av[i];
        }
      },
      "mul");
}

// 1 - a
template <typename T>
Var<T> one_minus(Var<T> a) {
  Tensor<T> C = a.value();
  for (auto& x : C.values()) x = T(1) - x;
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] -= G[i];
      },
      "one_minus");
}

template <typename T>
Var<T> tanh(Var<T> a) {
  Tensor<T> C = a.value();
  for (auto& x : C.values()) x = std::tanh(x);
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * (T(1) - y[i] * y[i]);
      },
      "tanh");
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tensor<T> C = a.value();
  for (auto& x : C.values()) x = detail::stable_sigmoid(x);
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * y[i] * (T(1) - y[i]);
      },
      "sigmoid");
}

// a * c for a constant scalar c.
template <typename T>
Var<T> scale(Var<T> a, T c) {
  Tensor<T> C = a.value();
  for (auto& x : C.values()) x *= c;
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai, c](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * c;
      },
      "scale");
}

// a * mask for a constant mask (dropout). Not counted as MACs.
template <typename T>
Var<T> mask_scale(Var<T> a, Tensor<T> mask) {
  detail::require_same_shape(a.value(), mask, "mask_scale");
  Tensor<T> C = a.value();
  for (std::size_t i = 0; i < C.size(); ++i) C[i] *= mask[i];
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai, mask = std::move(mask)](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i] * mask[i];
      },
      "mask_scale");
}

// Row r of the result is taken from `fresh` when keep[r] != 0, else from `held`.
// Used to carry recurrent state through padding positions.
template <typename T>
Var<T> select_rows(const std::vector<std::uint8_t>& keep, Var<T> fresh, Var<T> held) {
  detail::require_same_shape(fresh.value(), held.value(), "select_rows");
  const std::size_t rows = fresh.rows(), cols = fresh.cols();
  if (keep.size() != rows) throw ShapeError("select_rows: mask length disagrees with rows");
  Tensor<T> C = held.value();
  const Tensor<T>& F = fresh.value();
  for (std::size_t r = 0; r < rows; ++r) {
    if (keep[r]) std::copy_n(F.data() + r * cols, cols, C.data() + r * cols);
  }
  const std::size_t fi = fresh.id(), hi = held.id();
  return fresh.tape()->record(
      std::move(C), {fresh, held},
      [fi, hi, keep, cols](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        const bool gf = t.requires_grad(fi), gh = t.requires_grad(hi);
        for (std::size_t r = 0; r < keep.size(); ++r) {
          if (keep[r] ? !gf : !gh) continue;
          Tensor<T>& dst = t.grad_ref(keep[r] ? fi : hi);
          for (std::size_t c = 0; c < cols; ++c) dst[r * cols + c] += G[r * cols + c];
        }
      },
      "select_rows");
}

template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  const Tensor<T>& A = a.value();
  const Tensor<T>& B = b.value();
  if (A.rows() != B.rows()) {
    throw ShapeError("concat_cols: row counts differ " + A.shape_str() + " vs " + B.shape_str());
  }
  const std::size_t rows = A.rows(), na = A.cols(), nb = B.cols();
  Tensor<T> C(rows, na + nb);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(A.data() + r * na, na, C.data() + r * (na + nb));
    std::copy_n(B.data() + r * nb, nb, C.data() + r * (na + nb) + na);
  }
  const std::size_t ai = a.id(), bi = b.id();
  return a.tape()->record(
      std::move(C), {a, b},
      [ai, bi, rows, na, nb](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(ai)) {
          Tensor<T>& ga = t.grad_ref(ai);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < na; ++c) ga[r * na + c] += G[r * (na + nb) + c];
        }
        if (t.requires_grad(bi)) {
          Tensor<T>& gb = t.grad_ref(bi);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < nb; ++c) gb[r * nb + c] += G[r * (na + nb) + na + c];
        }
      },
      "concat_cols");
}

template <typename T>
Var<T> slice_cols(Var<T> a, std::size_t start, std::size_t len) {
  const Tensor<T>& A = a.value();
  if (start + len > A.cols()) throw ShapeError("slice_cols: range exceeds " + A.shape_str());
  const std::size_t rows = A.rows(), n = A.cols();
  Tensor<T> C(rows, len);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(A.data() + r * n + start, len, C.data() + r * len);
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai, rows, n, start, len](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < len; ++c) ga[r * n + start + c] += G[r * len + c];
      },
      "slice_cols");
}

// Row lookup: result row r is a[ids[r]]. Serves as the embedding lookup.
template <typename T>
Var<T> gather_rows(Var<T> a, std::vector<std::size_t> ids) {
  const Tensor<T>& A = a.value();
  const std::size_t n = A.cols();
  Tensor<T> C(ids.size(), n);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= A.rows()) {
      throw IndexError("gather_rows: index " + std::to_string(ids[r]) + " out of range for " +
                       A.shape_str());
    }
    std::copy_n(A.data() + ids[r] * n, n, C.data() + r * n);
  }
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai, ids = std::move(ids), n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t r = 0; r < ids.size(); ++r)
          for (std::size_t c = 0; c < n; ++c) ga[ids[r] * n + c] += G[r * n + c];
      },
      "gather_rows");
}

// Each row of a repeated k times consecutively: [B x n] -> [B*k x n].
template <typename T>
Var<T> repeat_rows(Var<T> a, std::size_t k) {
  const Tensor<T>& A = a.value();
  const std::size_t rows = A.rows(), n = A.cols();
  Tensor<T> C(rows * k, n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j) std::copy_n(A.data() + r * n, n, C.data() + (r * k + j) * n);
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai, rows, k, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < k; ++j)
            for (std::size_t c = 0; c < n; ++c) ga[r * n + c] += G[(r * k + j) * n + c];
      },
      "repeat_rows");
}

// steps[s] is [B x n]; result row b*S + s holds steps[s] row b.
template <typename T>
Var<T> interleave_rows(const std::vector<Var<T>>& steps) {
  if (steps.empty()) throw ContractError("interleave_rows: no inputs");
  const std::size_t S = steps.size();
  const std::size_t B = steps[0].rows(), n = steps[0].cols();
  Tensor<T> C(B * S, n);
  for (std::size_t s = 0; s < S; ++s) {
    detail::require_same_shape(steps[0].value(), steps[s].value(), "interleave_rows");
    const Tensor<T>& X = steps[s].value();
    for (std::size_t b = 0; b < B; ++b) std::copy_n(X.data() + b * n, n, C.data() + (b * S + s) * n);
  }
  std::vector<std::size_t> ids;
  ids.reserve(S);
  for (const auto& v : steps) ids.push_back(v.id());
  return steps[0].tape()->record_many(
      std::move(C), steps,
      [ids, B, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        const std::size_t S = ids.size();
        for (std::size_t s = 0; s < S; ++s) {
          if (!t.requires_grad(ids[s])) continue;
          Tensor<T>& gs = t.grad_ref(ids[s]);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < n; ++c) gs[b * n + c] += G[(b * S + s) * n + c];
        }
      },
      "interleave_rows");
}

template <typename T>
Var<T> reshape(Var<T> a, std::size_t rows, std::size_t cols) {
  const Tensor<T>& A = a.value();
  if (rows * cols != A.size()) {
    throw ShapeError("reshape: cannot view " + A.shape_str() + " as " +
                     Tensor<T>::shape_string(rows, cols));
  }
  Tensor<T> C(rows, cols, std::vector<T>(A.values().begin(), A.values().end()));
  const std::size_t ai = a.id();
  return a.tape()->record(
      std::move(C), {a},
      [ai](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        Tensor<T>& ga = t.grad_ref(ai);
        for (std::size_t i = 0; i < G.size(); ++i) ga[i] += G[i];
      },
      "reshape");
}

// Row-wise softmax restricted to entries where mask == 1. Masked entries are
// exactly zero. Uses max-subtraction, so large logits do not overflow.
template <typename T>
Var<T> softmax_masked(Var<T> logits, const Tensor<T>& mask) {
  const Tensor<T>& L = logits.value();
  detail::require_same_shape(L, mask, "softmax_masked");
  const std::size_t rows = L.rows(), n = L.cols();
  Tensor<T> Y(rows, n);
  for (std::size_t r = 0; r < rows; ++r) {
    T mx = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t c = 0; c < n; ++c) {
      const T m = mask(r, c);
      if (m != T(0) && m != T(1)) throw ContractError("softmax_masked: mask must be binary");
      if (m == T(1)) {
        mx = std::max(mx, L(r, c));
        any = true;
      }
    }
    if (!any) throw ContractError("softmax_masked: invalid mask, row " + std::to_string(r) + " has no live entry");
    T total = T(0);
    for (std::size_t c = 0; c < n; ++c) {
      if (mask(r, c) == T(1)) {
        Y(r, c) = std::exp(L(r, c) - mx);
        total += Y(r, c);
      }
    }
    for (std::size_t c = 0; c < n; ++c) Y(r, c) /= total;
  }
  const std::size_t li = logits.id();
  return logits.tape()->record(
      std::move(Y), {logits},
      [li, rows, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        const Tensor<T>& y = t.value(self);
        Tensor<T>& gl = t.grad_ref(li);
        for (std::size_t r = 0; r < rows; ++r) {
          T dot = T(0);
          for (std::size_t c = 0; c < n; ++c) dot += G(r, c) * y(r, c);
          for (std::size_t c = 0; c < n; ++c) gl(r, c) += y(r, c) * (G(r, c) - dot);
        }
      },
      "softmax_masked");
}

// weights [B x k], states [B*k x n] -> [B x n]; row b is sum_s weights(b,s) * states[b*k+s].
template <typename T>
Var<T> weighted_row_sum(Var<T> weights, Var<T> states) {
  const Tensor<T>& W = weights.value();
  const Tensor<T>& H = states.value();
  const std::size_t B = W.rows(), k = W.cols(), n = H.cols();
  if (H.rows() != B * k) {
    throw ShapeError("weighted_row_sum: weights " + W.shape_str() + " incompatible with states " +
                     H.shape_str());
  }
  Tensor<T> C(B, n);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t s = 0; s < k; ++s) {
      const T w = W(b, s);
      const T* h = H.data() + (b * k + s) * n;
      T* out = C.data() + b * n;
      for (std::size_t c = 0; c < n; ++c) out[c] += w * h[c];
    }
  mac_counter() += B * k * n;
  const std::size_t wi = weights.id(), hi = states.id();
  return weights.tape()->record(
      std::move(C), {weights, states},
      [wi, hi, B, k, n](Tape<T>& t, std::size_t self) {
        const Tensor<T>& G = t.grad_ref(self);
        if (t.requires_grad(wi)) {
          Tensor<T>& gw = t.grad_ref(wi);
          const Tensor<T>& Hv = t.value(hi);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t s = 0; s < k; ++s) {
              T acc = T(0);
              for (std::size_t c = 0; c < n; ++c) acc += G(b, c) * Hv((b * k + s), c);
              gw(b, s) += acc;
            }
        }
        if (t.requires_grad(hi)) {
          Tensor<T>& gh = t.grad_ref(hi);
          const Tensor<T>& Wv = t.value(wi);
          for (std::size_t b = 0; b < B; ++b)
            for (std::size_t s = 0; s < k; ++s)
              for (std::size_t c = 0; c < n; ++c) gh((b * k + s), c) += Wv(b, s) * G(b, c);
        }
      },
      "weighted_row_sum");
}

// -log softmax(row)[target] per row, weighted and summed into a scalar.
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::vector<std::size_t> targets, std::vector<T> weights) {
  const Tensor<T>& L = logits.value();
  const std::size_t rows = L.rows(), V = L.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw ShapeError("cross_entropy: targets/weights length disagrees with logits " + L.shape_str());
  }
  Tensor<T> probs(rows, V);
  T total = T(0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= V) {
      throw IndexError("cross_entropy: target " + std::to_string(targets[r]) +
                       " outside vocabulary of size " + std::to_string(V));
    }
    T mx = L(r, 0);
    for (std::size_t c = 1; c < V; ++c) mx = std::max(mx, L(r, c));
    T z = T(0);
    for (std::size_t c = 0; c < V; ++c) {
      probs(r, c) = std::exp(L(r, c) - mx);
      z += probs(r, c);
    }
    for (std::size_t c = 0; c < V; ++c) probs(r, c) /= z;
    const T nll = std::log(z) + mx - L(r, targets[r]);
    total += weights[r] * nll;
  }
  const std::size_t li = logits.id();
  return logits.tape()->record(
      Tensor<T>(1, 1, total), {logits},
      [li, probs = std::move(probs), targets = std::move(targets), weights = std::move(weights)](
          Tape<T>& t, std::size_t self) {
        const T g = t.grad_ref(self)[0];
        Tensor<T>& gl = t.grad_ref(li);
        for (std::size_t r = 0; r < probs.rows(); ++r) {
          const T w = g * weights[r];
          if (w == T(0)) continue;
          for (std::size_t c = 0; c < probs.cols(); ++c) gl(r, c) += w * probs(r, c);
          gl(r, targets[r]) -= w;
        }
      },
      "cross_entropy");
}

// Single-distribution form: logits [1 x V].
template <typename T>
Var<T> cross_entropy(Var<T> logits, std::size_t target) {
  if (logits.rows() != 1) throw ShapeError("cross_entropy: expected a single logit row");
  return cross_entropy(logits, std::vector<std::size_t>{target}, std::vector<T>{T(1)});
}

template <typename T>
Var<T> sum(Var<T> a) {
  T total = T(0);
  for (const T x : a.value().values()) total += x;
  const std::size_t ai = a.id();
  return a.tape()->record(
      Tensor<T>(1, 1, total), {a},
      [ai](Tape<T>& t, std::size_t self) {
        const T g = t.grad_ref(self)[0];
        Tensor<T>& ga = t.grad_ref(ai);
        for (auto& x : ga.values()) x += g;
      },
      "sum");
}

}  // namespace amn
