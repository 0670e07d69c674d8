#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "amn/kernels.hpp"
#include "helpers.hpp"
#include "op_gradchecks.hpp"

using namespace amn;
using amn::test::probe;
using amn::test::random_tensor;
using D = Tensor<double>;

TEST_CASE("matmul identity and hand-computed product") {
  Tape<double> t;
  auto a = t.constant(D::identity(2));
  auto b = t.constant(D(2, 2, {1, 2, 3, 4}));
  CHECK(matmul(a, b).value() == D(2, 2, {1, 2, 3, 4}));
  auto row = t.constant(D(1, 2, {1, 2}));
  auto col = t.constant(D(2, 1, {3, 4}));
  CHECK(matmul(row, col).value()[0] == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape<double> t;
  auto a = t.constant(D(2, 3));
  auto b = t.constant(D(2, 3));
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("matmul gradient of sum matches finite differences") {
  std::mt19937_64 rng(1);
  const double err = grad_check(
      [](Tape<double>&, std::span<const Var<double>> x) { return sum(matmul(x[0], x[1])); },
      {random_tensor(5, 4, rng), random_tensor(4, 3, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("elementwise examples") {
  Tape<double> t;
  CHECK(sigmoid(t.constant(D(1, 1, 0.0))).value()[0] == 0.5);
  CHECK(amn::tanh(t.constant(D(1, 1, 0.0))).value()[0] == 0.0);
  CHECK(add(t.constant(D::row({1, 2})), t.constant(D::row({3, 4}))).value() == D::row({4, 6}));
  // saturation without overflow
  auto big = sigmoid(t.constant(D::row({-800, 800})));
  CHECK(big.value()[0] == doctest::Approx(0.0));
  CHECK(big.value()[1] == 1.0);
  CHECK(amn::tanh(t.constant(D::row({-800, 800}))).value() == D::row({-1, 1}));
}

TEST_CASE("bias-row broadcast is the only broadcast") {
  Tape<double> t;
  auto m = t.constant(D(2, 3, {1, 2, 3, 4, 5, 6}));
  CHECK(add(m, t.constant(D::row({10, 20, 30}))).value() == D(2, 3, {11, 22, 33, 14, 25, 36}));
  CHECK_THROWS_AS(add(m, t.constant(D(2, 2))), ShapeError);
  CHECK_THROWS_AS(mul(m, t.constant(D::row({1, 2, 3}))), ShapeError);
  CHECK_THROWS_AS(add(m, t.constant(D(3, 1))), ShapeError);
}

TEST_CASE("softmax_masked examples") {
  Tape<double> t;
  auto u = softmax_masked(t.constant(D::row({2, 2, 2})), D::row({1, 1, 1}));
  for (int i = 0; i < 3; ++i) CHECK(u.value()[i] == doctest::Approx(1.0 / 3).epsilon(1e-12));
  auto one = softmax_masked(t.constant(D::row({0, 0})), D::row({1, 0}));
  CHECK(one.value() == D::row({1.0, 0.0}));
  auto big = softmax_masked(t.constant(D::row({1000, 0})), D::row({1, 1}));
  CHECK(std::isfinite(big.value()[0]));
  CHECK(big.value()[0] == doctest::Approx(1.0));
  CHECK(big.value()[1] == doctest::Approx(0.0));
}

TEST_CASE("softmax_masked rejects empty and non-binary masks") {
  Tape<double> t;
  CHECK_THROWS_AS(softmax_masked(t.constant(D::row({1, 2})), D::row({0, 0})), ContractError);
  CHECK_THROWS_AS(softmax_masked(t.constant(D::row({1, 2})), D::row({0.5, 1})), ContractError);
}

TEST_CASE("softmax_masked: sums to one, masked exactly zero, shift invariant") {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution coin(0.6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + rng() % 4, c = 1 + rng() % 6;
    D logits = random_tensor(r, c, rng, -20, 20);
    D mask(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) mask(i, j) = coin(rng) ? 1 : 0;
      mask(i, rng() % c) = 1;
    }
    D shifted = logits;
    const double k = random_tensor(1, 1, rng, -50, 50)[0];
    for (auto& x : shifted.values()) x += k;
    Tape<double> t;
    auto a = softmax_masked(t.constant(logits), mask).value();
    auto b = softmax_masked(t.constant(shifted), mask).value();
    for (std::size_t i = 0; i < r; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < c; ++j) {
        if (mask(i, j) == 0) CHECK(a(i, j) == 0.0);
        else CHECK(a(i, j) > 0.0);
        total += a(i, j);
        CHECK(std::abs(a(i, j) - b(i, j)) < 1e-6);
      }
      CHECK(std::abs(total - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("cross_entropy examples") {
  Tape<double> t;
  for (std::size_t target = 0; target < 4; ++target) {
    CHECK(cross_entropy(t.constant(D::row({0.3, 0.3, 0.3, 0.3})), target).value()[0] ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  CHECK(cross_entropy(t.constant(D::row({0, 30, 0})), 1).value()[0] < 1e-12);
  CHECK_THROWS_AS(cross_entropy(t.constant(D::row({0, 0})), 2), IndexError);

  // direct formula oracle
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t V = 2 + rng() % 9;
    D logits = random_tensor(1, V, rng, -5, 5);
    const std::size_t target = rng() % V;
    double z = 0;
    for (double l : logits.values()) z += std::exp(l);
    const double expect = -std::log(std::exp(logits[target]) / z);
    Tape<double> tt;
    const double got = cross_entropy(tt.constant(logits), target).value()[0];
    CHECK(got >= 0.0);
    CHECK(std::abs(got - expect) < 1e-10);
  }
}

TEST_CASE("backward basics") {
  Tape<double> t;
  auto x = t.variable(D(3, 2, 0.7));
  auto loss = sum(x);
  t.backward(loss);
  CHECK(t.grad(x) == D(3, 2, 1.0));
  CHECK_THROWS_AS(t.backward(loss), ContractError);

  Tape<double> t2;
  auto y = t2.variable(D(2, 2, 1.0));
  CHECK_THROWS_AS(t2.backward(y), ContractError);

  Tape<double> t3;
  auto frozen = t3.variable(D(2, 2, 1.0), false);
  auto live = t3.variable(D(2, 2, 2.0));
  t3.backward(sum(mul(frozen, live)));
  CHECK_FALSE(t3.has_grad(frozen));
  CHECK(t3.grad(live) == D(2, 2, 1.0));
}

TEST_CASE("loss from another tape is rejected") {
  Tape<double> a, b;
  auto x = a.variable(D(1, 1, 1.0));
  CHECK_THROWS_AS(b.backward(sum(x)), ContractError);
}

TEST_CASE("backward through a depth-3 matmul chain") {
  std::mt19937_64 rng(11);
  const double err = grad_check(
      [](Tape<double>&, std::span<const Var<double>> x) {
        return probe(matmul(matmul(matmul(x[0], x[1]), x[2]), x[3]), 5);
      },
      {random_tensor(2, 3, rng), random_tensor(3, 4, rng), random_tensor(4, 2, rng), random_tensor(2, 3, rng)});
  CHECK(err < 1e-4);
}

TEST_CASE("non-finite forward values are an error") {
  Tape<double> t;
  auto x = t.constant(D::row({1e308, 1e308}));
  CHECK_THROWS_AS(add(x, x), NumericError);
}

TEST_CASE("tied parameters share one node and one gradient") {
  D w(2, 2, 1.0);
  Tape<double> t;
  auto a = t.param(w);
  auto b = t.param(w);
  CHECK(a.id() == b.id());
  auto x = t.constant(D(1, 2, {1, 2}));
  t.backward(sum(add(matmul(x, a), matmul(x, b))));
  const D* g = t.param_grad(w);
  REQUIRE(g != nullptr);
  CHECK(*g == D(2, 2, {2, 2, 4, 4}));
}

TEST_CASE("grad_check contract and examples") {
  std::mt19937_64 rng(2);
  const D x = random_tensor(3, 4, rng);
  auto f_sig = [](Tape<double>&, std::span<const Var<double>> v) { return sum(sigmoid(v[0])); };
  CHECK(grad_check(f_sig, {x}) < 1e-6);
  auto f_lin = [](Tape<double>& t, std::span<const Var<double>> v) {
    return sum(mul(v[0], t.constant(D(3, 4, 2.5))));
  };
  CHECK(grad_check(f_lin, {x}) < 1e-8);
  auto f_vec = [](Tape<double>&, std::span<const Var<double>> v) { return v[0]; };
  CHECK_THROWS_AS(grad_check(f_vec, {x}), ContractError);
  CHECK_THROWS_AS(grad_check(f_sig, {x}, 1e-2), ContractError);
  CHECK_THROWS_AS(grad_check(f_sig, {x}, 1e-9), ContractError);
}

// Every op, random shapes up to 6 per axis.
TEST_CASE("grad_check on every registered op") {
  std::mt19937_64 rng(2024);
  for (const auto& [name, err] : amn::test::op_grad_errors(rng, 5)) {
    CAPTURE(name);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("gather_rows out of range is an index error") {
  Tape<double> t;
  auto a = t.constant(D(2, 2));
  CHECK_THROWS_AS(gather_rows(a, {0, 2}), IndexError);
}

TEST_CASE("forward results are deterministic") {
  std::mt19937_64 rng(9);
  const auto A = random_tensor(6, 5, rng), B = random_tensor(5, 4, rng);
  Tape<double> t1, t2;
  auto f = [&](Tape<double>& t) {
    return softmax_masked(amn::tanh(matmul(t.constant(A), t.constant(B))), D(6, 4, 1.0)).value();
  };
  CHECK(f(t1) == f(t2));
}

TEST_CASE("MAC counter counts matmul, mul and weighted sums only") {
  Tape<double> t;
  auto a = t.constant(D(3, 4, 1.0));
  auto b = t.constant(D(4, 5, 1.0));
  const auto before = mac_counter();
  auto c = matmul(a, b);  // 60
  auto d = mul(c, c);     // 15
  amn::tanh(d);
  sigmoid(d);
  softmax_masked(d, D(3, 5, 1.0));
  weighted_row_sum(t.constant(D(1, 3, 1.0)), c);  // 15
  CHECK(mac_counter() - before == 90);
}

TEST_CASE("parallel kernels agree with the serial reference") {
  std::mt19937_64 rng(5);
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {7, 3, 5}, {64, 64, 64}, {300, 97, 130}, {5, 400, 3}}) {
    CAPTURE(m);
    const auto A = random_tensor(m, k, rng), B = random_tensor(k, n, rng), G = random_tensor(m, n, rng);
    D c1(m, n), c2(m, n);
    kernels::gemm(A.data(), B.data(), c1.data(), m, k, n, false);
    kernels::reference::gemm(A.data(), B.data(), c2.data(), m, k, n, false);
    CHECK(amn::test::max_abs_diff(c1, c2) < 1e-10);
    kernels::gemm(A.data(), B.data(), c1.data(), m, k, n, true);
    kernels::reference::gemm(A.data(), B.data(), c2.data(), m, k, n, true);
    CHECK(amn::test::max_abs_diff(c1, c2) < 1e-10);

    D tn1(k, n, 0.5), tn2(k, n, 0.5);
    kernels::gemm_tn_acc(A.data(), G.data(), tn1.data(), m, k, n);
    kernels::reference::gemm_tn_acc(A.data(), G.data(), tn2.data(), m, k, n);
    CHECK(amn::test::max_abs_diff(tn1, tn2) < 1e-10);

    D nt1(m, k, -0.5), nt2(m, k, -0.5);
    kernels::gemm_nt_acc(G.data(), B.data(), nt1.data(), m, n, k);
    kernels::reference::gemm_nt_acc(G.data(), B.data(), nt2.data(), m, n, k);
    CHECK(amn::test::max_abs_diff(nt1, nt2) < 1e-10);
  }
}

TEST_CASE("tensor construction checks length") {
  CHECK_THROWS_AS(D(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  D t(2, 3, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.cast<float>().cast<double>() == t);
}
