#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "twotier/autodiff.h"
#include "twotier/checkpoint.h"
#include "twotier/errors.h"
#include "twotier/grad_check.h"
#include "twotier/parameters.h"
#include "twotier/rng.h"

using namespace twotier;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.uniform(-scale, scale);
  return t;
}

}  // namespace

TEST_SUITE("numeric-core") {
  TEST_CASE("forward op examples") {
    Graph g;
    auto s = softmax(g.constant(Tensor({2}, {0.0, 0.0})), 0);
    CHECK(g.value(s)[0] == doctest::Approx(0.5));
    CHECK(g.value(s)[1] == doctest::Approx(0.5));

    Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
    auto p = matmul(g.constant(Tensor::identity(2)), g.constant(m));
    CHECK(g.value(p) == m);

    CHECK(g.value(sigmoid(g.constant(Tensor::scalar(0.0))))[0] == 0.5);
  }

  TEST_CASE("shape mismatches name both shapes") {
    Graph g;
    auto a = g.constant(Tensor({2, 3}));
    auto b = g.constant(Tensor({2, 2}));
    try {
      (void)matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      std::string what = e.what();
      CHECK(what.find("[2,3]") != std::string::npos);
      CHECK(what.find("[2,2]") != std::string::npos);
    }
    CHECK_THROWS_AS((void)add(a, b), DimensionError);
    CHECK_THROWS_AS((void)mul(a, b), DimensionError);
    CHECK_THROWS_AS((void)concat(a, g.constant(Tensor({3, 3})), 1), DimensionError);
  }

  TEST_CASE("backward examples") {
    {
      Graph g;
      auto x = g.variable(Tensor({2, 3}, 0.7));
      g.backward(sum(x));
      for (double v : g.grad(x).data()) CHECK(v == 1.0);
    }
    {
      Graph g;
      auto x = g.variable(Tensor::scalar(0.0));
      g.backward(sum(tanh(x)));
      CHECK(g.grad(x)[0] == doctest::Approx(1.0));
    }
    {
      Graph g;
      auto x = g.variable(Tensor::scalar(3.0));
      g.backward(sum(x * x));
      CHECK(g.grad(x)[0] == doctest::Approx(6.0));
    }
  }

  TEST_CASE("backward needs a scalar root and resets accumulators") {
    Graph g;
    auto x = g.variable(Tensor({3}, 1.0));
    CHECK_THROWS_AS(g.backward(x), ContractError);
    auto root = sum(scale(x, 2.0));
    g.backward(root);
    g.backward(root);
    CHECK(g.grad(x)[0] == doctest::Approx(2.0));
  }

  TEST_CASE("grad_check examples") {
    Rng rng(1);
    auto x = random_tensor({10}, rng);
    CHECK(grad_check([](Graph&, Var v) { return sum(v * v); }, x, 1e-5) < 1e-6);
    CHECK(grad_check([](Graph&, Var v) { return sum(tanh(v)); }, x, 1e-5) < 1e-6);
    CHECK(grad_check([](Graph& g, Var v) { return sum(scale(v, 3.0) + g.constant(Tensor({10}, 2.0))); }, x, 1e-5) <
          1e-9);
  }

  TEST_CASE("every op passes a gradient check") {
    Rng rng(2);
    const double eps = 1e-5;
    auto x = random_tensor({3, 4}, rng);
    Tensor w = random_tensor({4, 2}, rng);
    Tensor other = random_tensor({3, 4}, rng);
    Tensor bias = random_tensor({1, 4}, rng);
    Tensor weights = random_tensor({3, 4}, rng);
    auto check = [&](auto f) { CHECK(grad_check(f, x, eps) < 1e-6); };
    check([&](Graph& g, Var v) { return sum(matmul(v, g.constant(w)) * matmul(v, g.constant(w))); });
    check([&](Graph& g, Var v) { return sum((v - g.constant(other)) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(sigmoid(v) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(relu(v + g.constant(Tensor({3, 4}, 0.05))) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(softmax(v, 1) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(softmax(v, 0) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(concat(v, v * v, 1) * concat(g.constant(weights), g.constant(other), 1)); });
    check([&](Graph& g, Var v) { return sum(concat(v, tanh(v), 0) * concat(g.constant(weights), g.constant(other), 0)); });
    check([&](Graph& g, Var v) { return sum(transpose(v) * transpose(g.constant(weights))); });
    check([&](Graph& g, Var v) { return sum(row(v, 1) * row(g.constant(weights), 2)); });
    check([&](Graph& g, Var v) { return sum(shift_rows(v, 1) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(shift_rows(v, -2) * g.constant(weights)); });
    check([&](Graph& g, Var v) { return sum(tanh(add_bias(v, g.constant(bias)))); });
    check([&](Graph& g, Var v) { return sum(add_bias(g.constant(other), row(v, 0)) * g.constant(weights)); });
    check([&](Graph& g, Var v) {
      Var rows[] = {row(v, 2), row(v, 0), row(v, 2)};
      return sum(stack_rows(rows) * g.constant(weights));
    });
    check([&](Graph& g, Var v) { return bce_with_logits(sum(v * g.constant(weights)), 1.0); });
    check([&](Graph& g, Var v) { return bce_with_logits(sum(v * g.constant(weights)), 0.0); });
  }

  TEST_CASE("softmax rows are distributions") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      Graph g;
      auto s = softmax(g.constant(random_tensor({5, 7}, rng, 30.0)), 1);
      const Tensor& v = g.value(s);
      for (std::size_t r = 0; r < 5; ++r) {
        double total = 0.0;
        for (double p : v.row_span(r)) {
          CHECK(p >= 0.0);
          total += p;
        }
        CHECK(std::abs(total - 1.0) <= 1e-9);
      }
    }
  }

  TEST_CASE("a node used twice accumulates both contributions") {
    Rng rng(5);
    auto x = random_tensor({4}, rng);
    auto f = [](Graph&, Var v) {
      Var t = tanh(v);
      return sum(t * t + scale(t, 3.0));
    };
    CHECK(grad_check(f, x, 1e-5) < 1e-6);
    Graph g;
    auto v = g.variable(x);
    g.backward(f(g, v));
    for (std::size_t i = 0; i < 4; ++i) {
      double t = std::tanh(x[i]);
      CHECK(g.grad(v)[i] == doctest::Approx((2 * t + 3) * (1 - t * t)).epsilon(1e-12));
    }
  }

  TEST_CASE("bce_with_logits stays finite for saturated logits") {
    Graph g;
    auto x = g.variable(Tensor::scalar(800.0));
    auto loss = bce_with_logits(x, 0.0);
    g.backward(loss);
    CHECK(g.value(loss)[0] == doctest::Approx(800.0));
    CHECK(std::isfinite(g.grad(x)[0]));
  }

  TEST_CASE("parameter set clipping and optimizers") {
    ParameterSet ps;
    auto i = ps.add("w", Tensor({2}, {3.0, 4.0}));
    ps.grad(i) = Tensor({2}, {3.0, 4.0});
    CHECK(ps.grad_norm() == doctest::Approx(5.0));
    ps.clip_grad_norm(1.0);
    CHECK(ps.grad_norm() == doctest::Approx(1.0));
    sgd_step(ps, 0.0);
    CHECK(ps.value(i) == Tensor({2}, {3.0, 4.0}));
    sgd_step(ps, 1.0);
    CHECK(ps.value(i)[0] == doctest::Approx(3.0 - 0.6));

    Adam adam(ps, 0.1);
    ps.grad(i) = Tensor({2}, {1.0, -1.0});
    Tensor before = ps.value(i);
    adam.step(ps);
    // The first bias-corrected Adam step moves each entry by lr against the sign.
    CHECK(ps.value(i)[0] == doctest::Approx(before[0] - 0.1).epsilon(1e-6));
    CHECK(ps.value(i)[1] == doctest::Approx(before[1] + 0.1).epsilon(1e-6));
  }

  TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(6);
    Checkpoint c;
    c.metadata["kind"] = "test";
    c.blocks.emplace_back("a", random_tensor({3, 5}, rng));
    c.blocks.emplace_back("b", Tensor({2}, {std::nextafter(1.0, 2.0), -0.0}));
    auto path = std::filesystem::temp_directory_path() / "twotier_ckpt_test.bin";
    write_checkpoint(path, c);
    auto back = read_checkpoint(path);
    CHECK(back.meta("kind") == "test");
    REQUIRE(back.blocks.size() == 2);
    CHECK(back.block("a") == c.block("a"));
    CHECK(std::signbit(back.block("b")[1]));
    CHECK(back.block("b")[0] == std::nextafter(1.0, 2.0));
    {
      std::ofstream out(path, std::ios::binary);
      out << "JUNKJUNK";
    }
    CHECK_THROWS_AS(read_checkpoint(path), FormatError);
    std::filesystem::remove(path);
  }

  TEST_CASE("rng streams are reproducible and distinct") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    CHECK(derive_seed(1, "skipgram") != derive_seed(1, "glove"));
    CHECK(derive_seed(1, "skipgram") != derive_seed(2, "skipgram"));
    Rng c(7);
    for (int i = 0; i < 1000; ++i) {
      double u = c.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(c.below(13) < 13);
    }
  }
}
