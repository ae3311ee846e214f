// Copyright 2026 The metaspoof Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "metaspoof/grad_check.hpp"
#include "metaspoof/tensor.hpp"

using namespace metaspoof;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, sd);
  Tensor t(std::move(shape));
  for (double& x : t.values()) x = d(rng);
  return t;
}

// Weighted sum with fixed pseudo-random weights, so every output element
// contributes a distinct gradient.
Var probe(Graph& g, Var v) {
  return sum(mul(v, g.input(random_tensor(v.shape(), 99))));
}

}  // namespace

TEST_CASE("tensor construction enforces its invariants") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{0, 3}), DimensionError);
  Tensor t({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK_FALSE(t.has_grad());
  t.accumulate_grad(std::vector<double>(6, 1.0));
  t.accumulate_grad(std::vector<double>(6, 2.0));
  CHECK(t.grad()[5] == 3.0);
  CHECK_THROWS_AS(t.accumulate_grad(std::vector<double>(5, 1.0)), DimensionError);
  t.zero_grad();
  CHECK(t.grad()[0] == 0.0);
}

TEST_CASE("matmul") {
  Graph g;
  SUBCASE("identity") {
    const Var out = matmul(g.input(Tensor::matrix({{1, 0}, {0, 1}})), g.input(Tensor::matrix({{1, 2}, {3, 4}})));
    CHECK(out.value().values()[0] == 1);
    CHECK(out.value().values()[1] == 2);
    CHECK(out.value().values()[2] == 3);
    CHECK(out.value().values()[3] == 4);
  }
  SUBCASE("orthogonal vectors") {
    const Var out = matmul(g.input(Tensor::matrix({{1, 0}})), g.input(Tensor::matrix({{0}, {1}})));
    CHECK(out.shape() == Shape{1, 1});
    CHECK(out.value()[0] == 0.0);
  }
  SUBCASE("shape mismatch names both shapes") {
    try {
      matmul(g.input(Tensor({3, 4})), g.input(Tensor({3, 2})));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[3x4]") != std::string::npos);
      CHECK(msg.find("[3x2]") != std::string::npos);
    }
  }
  SUBCASE("gradients match central differences") {
    Tensor a = random_tensor({3, 4}, 1), b = random_tensor({4, 2}, 2);
    Tensor* pts[] = {&a, &b};
    const auto report = grad_check([](Graph& gr, std::span<const Var> v) { return probe(gr, matmul(v[0], v[1])); },
                                   pts);
    CHECK(report.coords_checked == 20);
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("elementwise ops") {
  Graph g;
  CHECK(add(g.input(Tensor::vector({1, 2})), g.input(Tensor::vector({3, 4}))).value().values()[1] == 6.0);
  CHECK_THROWS_AS(add(g.input(Tensor::vector({1, 2})), g.input(Tensor::vector({1, 2, 3}))), DimensionError);

  SUBCASE("multiplying by a zero scalar zeroes value and gradient") {
    Tensor x = random_tensor({2, 3}, 3);
    x.set_requires_grad(true);
    Graph gr;
    const Var out = mul(gr.parameter(x), gr.input(Tensor::scalar(0.0)));
    for (double v : out.value().values()) CHECK(v == 0.0);
    gr.backward(sum(out));
    for (double v : x.grad()) CHECK(v == 0.0);
  }
  SUBCASE("sub, mul and scalar broadcast gradients") {
    Tensor a = random_tensor({2, 3}, 4), b = random_tensor({2, 3}, 5), s = Tensor::scalar(0.7);
    Tensor* pts[] = {&a, &b, &s};
    const auto report = grad_check(
        [](Graph& gr, std::span<const Var> v) {
          return probe(gr, add(sub(v[0], v[1]), mul(mul(v[0], v[1]), v[2])));
        },
        pts);
    CHECK(report.max_rel_error < 1e-5);
  }
}

TEST_CASE("relu") {
  Graph g;
  const Var out = relu(g.input(Tensor::vector({-1, 0, 2})));
  CHECK(out.value()[0] == 0.0);
  CHECK(out.value()[1] == 0.0);
  CHECK(out.value()[2] == 2.0);

  SUBCASE("all-negative input has zero output and zero gradient") {
    Tensor x({4}, -2.0);
    x.set_requires_grad(true);
    Graph gr;
    const Var r = relu(gr.parameter(x));
    gr.backward(sum(r));
    for (double v : r.value().values()) CHECK(v == 0.0);
    for (double v : x.grad()) CHECK(v == 0.0);
  }
  SUBCASE("gradient is the positive-part mask away from zero") {
    Tensor x = random_tensor({5, 6}, 6);
    Tensor* pts[] = {&x};
    GradCheckOptions opts;
    opts.exclude = [&](std::size_t, std::size_t, double v) { return std::abs(v) < 10 * opts.step; };
    const auto report =
        grad_check([](Graph& gr, std::span<const Var> v) { return probe(gr, relu(v[0])); }, pts, opts);
    CHECK(report.max_rel_error < 1e-6);
  }
}

TEST_CASE("sq_euclidean") {
  Graph g;
  CHECK(sq_euclidean(g.input(Tensor::matrix({{1, 2}})), g.input(Tensor::matrix({{1, 2}}))).value()[0] == 0.0);
  CHECK(sq_euclidean(g.input(Tensor::matrix({{0, 0}})), g.input(Tensor::matrix({{3, 4}}))).value()[0] == 25.0);
  CHECK_THROWS_AS(sq_euclidean(g.input(Tensor({2, 3})), g.input(Tensor({2, 4}))), DimensionError);

  const Tensor a = random_tensor({4, 8}, 7), b = random_tensor({3, 8}, 8);
  const Tensor d = sq_euclidean(g.input(a), g.input(b)).value();
  SUBCASE("equals the double-loop distances exactly") {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < 8; ++t) s += (a.at(i, t) - b.at(j, t)) * (a.at(i, t) - b.at(j, t));
        CHECK(d.at(i, j) == s);
      }
    }
  }
  SUBCASE("swapping arguments transposes the output") {
    const Tensor dt = sq_euclidean(g.input(b), g.input(a)).value();
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 3; ++j) CHECK(dt.at(j, i) == d.at(i, j));
    }
  }
  SUBCASE("gradients w.r.t. both inputs") {
    Tensor x = a, y = b;
    Tensor* pts[] = {&x, &y};
    const auto report =
        grad_check([](Graph& gr, std::span<const Var> v) { return probe(gr, sq_euclidean(v[0], v[1])); }, pts);
    CHECK(report.max_rel_error < 1e-4);
  }
}

TEST_CASE("log_softmax") {
  Graph g;
  const Tensor sym = log_softmax(g.input(Tensor::matrix({{0, 0}}))).value();
  CHECK(sym[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(sym[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  const Tensor big = log_softmax(g.input(Tensor::matrix({{1000, 0}}))).value();
  CHECK(std::isfinite(big[0]));
  CHECK(big[0] == doctest::Approx(0.0));
  CHECK(big[1] == doctest::Approx(-1000.0));

  const Tensor gap = log_softmax(g.input(Tensor::matrix({{0, -4}}))).value();
  // softmax(0, -4)[0] = 1 / (1 + e^-4)
  CHECK(std::exp(gap[0]) == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-14));
  CHECK(std::exp(gap[0]) == doctest::Approx(0.98201).epsilon(1e-5));

  CHECK_THROWS_AS(log_softmax(g.input(Tensor::matrix({{0, std::nan("")}}))), std::domain_error);

  SUBCASE("rows exponentiate to one") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor x = random_tensor({7, 5}, rng(), 30.0);
      const Tensor lp = log_softmax(g.input(x)).value();
      for (std::size_t i = 0; i < 7; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 5; ++j) s += std::exp(lp.at(i, j));
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
    }
  }
  SUBCASE("gradient") {
    Tensor x = random_tensor({4, 6}, 12, 2.0);
    CHECK(grad_check([](Graph& gr, Var v) { return probe(gr, log_softmax(v)); }, x) < 1e-4);
  }
}

TEST_CASE("nll_loss") {
  Graph g;
  const std::vector<std::size_t> t01 = {0, 1};
  CHECK(nll_loss(g.input(Tensor::matrix({{0, -50}, {-50, 0}})), t01).value()[0] == 0.0);
  const double l3 = -std::log(3.0);
  CHECK(nll_loss(g.input(Tensor::matrix({{l3, l3, l3}, {l3, l3, l3}})), t01).value()[0] ==
        doctest::Approx(std::log(3.0)).epsilon(1e-15));
  const std::vector<std::size_t> bad = {0, 3};
  CHECK_THROWS_AS(nll_loss(g.input(Tensor::matrix({{0, 0, 0}, {0, 0, 0}})), bad), std::out_of_range);

  SUBCASE("random instance matches a hand-computed mean") {
    const Tensor lp = random_tensor({5, 4}, 13);
    const std::vector<std::size_t> tgt = {3, 0, 2, 2, 1};
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += -lp.at(i, tgt[i]);
    CHECK(nll_loss(g.input(lp), tgt).value()[0] == doctest::Approx(s / 5.0).epsilon(1e-15));
  }
}

TEST_CASE("backward") {
  SUBCASE("sum gives all-ones gradient") {
    Tensor x = random_tensor({3, 2, 2}, 14);
    x.set_requires_grad(true);
    Graph g;
    g.backward(sum(g.parameter(x)));
    for (double v : x.grad()) CHECK(v == 1.0);
  }
  SUBCASE("half squared norm gives x") {
    Tensor x = random_tensor({6}, 15);
    x.set_requires_grad(true);
    Graph g;
    const Var v = g.parameter(x);
    g.backward(scale(sum(mul(v, v)), 0.5));
    for (std::size_t i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(x[i]).epsilon(1e-15));
  }
  SUBCASE("non-scalar loss is rejected") {
    Tensor x({2, 2}, 1.0);
    Graph g;
    CHECK_THROWS_AS(g.backward(g.parameter(x)), DimensionError);
  }
  SUBCASE("repeated backward accumulates; zeroing restores determinism") {
    Tensor w = random_tensor({3, 3}, 16);
    w.set_requires_grad(true);
    const Tensor xin = random_tensor({4, 3}, 17);
    Graph g;
    const Var loss = sum(relu(matmul(g.input(xin), g.parameter(w))));
    g.backward(loss);
    const std::vector<double> first(w.grad().begin(), w.grad().end());
    g.backward(loss);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(w.grad()[i] == 2.0 * first[i]);
    w.zero_grad();
    g.backward(loss);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(w.grad()[i] == first[i]);
  }
  SUBCASE("graph records nodes in insertion order") {
    Tensor x = random_tensor({2, 2}, 18);
    Graph g;
    const Var a = g.input(x);
    const Var b = relu(a);
    const Var c = sum(b);
    CHECK(g.size() == 3);
    CHECK(g.kind(b) == OpKind::kRelu);
    CHECK(g.inputs(c) == std::vector<std::size_t>{b.id});
    CHECK(b.id > a.id);
  }
}

TEST_CASE("grad_check") {
  SUBCASE("linear functions are exact") {
    Tensor x = random_tensor({3, 3}, 19);
    CHECK(grad_check([](Graph& g, Var v) { return probe(g, v); }, x) < 1e-9);
  }
  SUBCASE("quadratic function at h = 1e-5") {
    Tensor x = random_tensor({10}, 20);
    CHECK(grad_check([](Graph&, Var v) { return sum(mul(v, v)); }, x, 1e-5) < 1e-6);
  }
  SUBCASE("coordinate sampling and exclusions") {
    Tensor x = random_tensor({20, 20}, 21);
    x[0] = 0.0;
    Tensor* pts[] = {&x};
    GradCheckOptions opts;
    opts.max_coords = 50;
    opts.seed = 3;
    std::size_t excluded_seen = 0;
    opts.exclude = [&](std::size_t, std::size_t i, double) {
      if (i == 0) ++excluded_seen;
      return i == 0;
    };
    const auto report =
        grad_check([](Graph& g, std::span<const Var> v) { return probe(g, relu(v[0])); }, pts, opts);
    CHECK(report.coords_checked == 50);
    CHECK(excluded_seen == 1);
    CHECK(x[0] == 0.0);  // point restored
  }
  SUBCASE("rejects non-positive step") {
    Tensor x({2}, 1.0);
    CHECK_THROWS_AS(grad_check([](Graph&, Var v) { return sum(v); }, x, 0.0), std::invalid_argument);
  }
}

TEST_CASE("class_mean") {
  Graph g;
  const std::vector<std::size_t> labels = {0, 0, 1};
  const Tensor m = class_mean(g.input(Tensor::matrix({{1, 0}, {0, 1}, {5, 5}})), labels, 2).value();
  CHECK(m.at(0, 0) == 0.5);
  CHECK(m.at(0, 1) == 0.5);
  CHECK(m.at(1, 0) == 5.0);
  CHECK_THROWS_AS(class_mean(g.input(Tensor({2, 2})), std::vector<std::size_t>{0, 0}, 2), std::invalid_argument);

  Tensor x = random_tensor({6, 3}, 22);
  const std::vector<std::size_t> lab = {2, 0, 1, 0, 2, 2};
  CHECK(grad_check([&](Graph& gr, Var v) { return probe(gr, class_mean(v, lab, 3)); }, x) < 1e-6);
}

TEST_CASE("transpose, add_row_vector and row_sq_norm gradients") {
  Tensor a = random_tensor({3, 4}, 23), r = random_tensor({3}, 24);
  Tensor* pts[] = {&a, &r};
  const auto report = grad_check(
      [](Graph& g, std::span<const Var> v) {
        const Var shifted = add_row_vector(transpose(v[0]), v[1]);
        return add(probe(g, shifted), sum(row_sq_norm(shifted)));
      },
      pts);
  CHECK(report.max_rel_error < 1e-4);
}
