#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <vector>

#include "resolv/nn.hpp"
#include "resolv/rng.hpp"
#include "resolv/tape.hpp"

using namespace resolv;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = rng.uniform_sym(scale);
  return m;
}

// Finite-difference verification of one op composition. The closure maps
// tape plus imported parameters to a scalar; every parameter coordinate is
// checked.
void check_op(ParameterStore& ps, const std::function<Var(Tape&)>& f,
              double tol = 1e-5) {
  GradCheckReport rep = grad_check(ps, f, 512, 1e-5, 7);
  CAPTURE(rep.worst);
  CAPTURE(rep.max_rel_err);
  CHECK(rep.checked > 0);
  CHECK(rep.max_rel_err < tol);
}

}  // namespace

TEST_CASE("every primitive matches central finite differences") {
  Rng shapes(101);
  for (int rep = 0; rep < 3; ++rep) {
    int r = shapes.uniform_int(1, 16);
    int c = shapes.uniform_int(1, 16);
    int k = shapes.uniform_int(1, 16);
    Rng init(1000 + rep);
    ParameterStore ps;
    ps.define("A", r, c, init, 1.0);
    ps.define("B", c, k, init, 1.0);
    ps.define("C", r, c, init, 1.0);
    ps.define("R", 1, c, init, 1.0);
    Matrix weights = random_matrix(r, k, init);
    Matrix wc = random_matrix(r, c, init);

    check_op(ps, [&](Tape& t) {
      return sum_all(t, cmul(t, matmul(t, param(t, ps, "A"),
                                       param(t, ps, "B")),
                             t.constant(weights)));
    });
    check_op(ps, [&](Tape& t) {  // A (r x c) x B' won't fit; use A Aᵀ style
      return sum_all(t, matmul_nt(t, param(t, ps, "A"), param(t, ps, "C")));
    });
    check_op(ps, [&](Tape& t) {
      return sum_all(t, matmul_tn(t, param(t, ps, "A"), param(t, ps, "C")));
    });
    check_op(ps, [&](Tape& t) {
      Var s = add(t, param(t, ps, "A"), param(t, ps, "C"));
      s = sub(t, s, param(t, ps, "A"));
      s = cmul(t, s, param(t, ps, "C"));
      return sum_all(t, cmul(t, s, t.constant(wc)));
    });
    check_op(ps, [&](Tape& t) {
      return sum_all(t, scale(t, param(t, ps, "A"), -2.5));
    });
    check_op(ps, [&](Tape& t) {
      return sum_all(t, cmul(t, add_row(t, param(t, ps, "A"),
                                        param(t, ps, "R")),
                             t.constant(wc)));
    });
    check_op(ps, [&](Tape& t) {
      return sum_all(t, cmul(t, tanh_op(t, param(t, ps, "A")),
                             t.constant(wc)));
    });
    check_op(ps, [&](Tape& t) {
      return sum_all(t, cmul(t, sigmoid_op(t, param(t, ps, "A")),
                             t.constant(wc)));
    });
    check_op(ps, [&](Tape& t) {
      Var cc = concat_cols(t, param(t, ps, "A"), param(t, ps, "C"));
      return sum_all(t, slice_cols(t, cc, c / 2, c));
    });
    Matrix wv = random_matrix(3 * r, c, init);
    check_op(ps, [&](Tape& t) {
      Var v = vstack(t, {param(t, ps, "A"), param(t, ps, "C"),
                         param(t, ps, "A")});
      return sum_all(t, cmul(t, v, t.constant(wv)));
    });
  }
}

TEST_CASE("row indexing primitives accumulate through collisions") {
  Rng init(7);
  ParameterStore ps;
  ps.define("A", 5, 3, init, 1.0);
  std::vector<int> gather_idx = {4, 0, 0, 2, 4, 4};
  std::vector<int> scatter_idx = {1, 1, 0, 3, 1};
  Matrix wg = random_matrix(6, 3, init);
  Matrix ws = random_matrix(4, 3, init);
  check_op(ps, [&](Tape& t) {
    return sum_all(t, cmul(t, gather_rows(t, param(t, ps, "A"), gather_idx),
                           t.constant(wg)));
  });
  check_op(ps, [&](Tape& t) {
    return sum_all(t, cmul(t, scatter_rows(t, param(t, ps, "A"),
                                           scatter_idx, 4),
                           t.constant(ws)));
  });

  ParameterStore ps2;
  ps2.define("row", 1, 4, init, 1.0);
  Matrix wt = random_matrix(5, 4, init);
  check_op(ps2, [&](Tape& t) {
    return sum_all(t, cmul(t, tile_rows(t, param(t, ps2, "row"), 5),
                           t.constant(wt)));
  });

  ParameterStore ps3;
  ps3.define("M", 6, 4, init, 1.0);
  Matrix wm = random_matrix(1, 4, init);
  check_op(ps3, [&](Tape& t) {
    return sum_all(t, cmul(t, mean_rows(t, param(t, ps3, "M")),
                           t.constant(wm)));
  });
  check_op(ps3, [&](Tape& t) { return pick(t, param(t, ps3, "M"), 3, 2); });
}

TEST_CASE("masked_log_softmax normalizes over unmasked cells only") {
  Tape t;
  Matrix x(2, 3);
  x << 1.0, 2.0, 3.0, 0.5, -1.0, 4.0;
  Matrix mask(2, 3);
  mask << 1, 0, 1, 0, 1, 0;
  Var y = masked_log_softmax(t, t.constant(x), mask);
  const Matrix& ly = t.val(y);
  // Masked cells emit exactly zero.
  CHECK(ly(0, 1) == 0.0);
  CHECK(ly(1, 0) == 0.0);
  CHECK(ly(1, 2) == 0.0);
  // Unmasked probabilities form a distribution.
  double z = std::exp(1.0) + std::exp(3.0) + std::exp(-1.0);
  CHECK(ly(0, 0) == doctest::Approx(1.0 - std::log(z)));
  CHECK(ly(0, 2) == doctest::Approx(3.0 - std::log(z)));
  CHECK(ly(1, 1) == doctest::Approx(-1.0 - std::log(z)));
  double total = std::exp(ly(0, 0)) + std::exp(ly(0, 2)) + std::exp(ly(1, 1));
  CHECK(total == doctest::Approx(1.0));

  CHECK_THROWS_AS(masked_log_softmax(t, t.constant(x), Matrix::Zero(2, 3)),
                  ShapeMismatch);
}

TEST_CASE("masked_log_softmax gradients ignore masked cells") {
  Rng init(21);
  ParameterStore ps;
  ps.define("S", 4, 4, init, 2.0);
  Matrix mask = Matrix::Zero(4, 4);
  mask(0, 1) = 1;
  mask(2, 3) = 1;
  mask(3, 0) = 1;
  Matrix w = random_matrix(4, 4, init);
  check_op(ps, [&](Tape& t) {
    Var y = masked_log_softmax(t, param(t, ps, "S"), mask);
    return sum_all(t, cmul(t, y, t.constant(w)));
  });
  // A single unmasked cell is a forced choice: log-prob 0, zero gradient.
  Matrix one = Matrix::Zero(4, 4);
  one(1, 2) = 1;
  Tape t;
  Var y = masked_log_softmax(t, param(t, ps, "S"), one);
  CHECK(t.val(y)(1, 2) == 0.0);
  t.backward(pick(t, y, 1, 2));
  for (const auto& [name, grad] : t.param_grads()) {
    CAPTURE(name);
    CHECK(grad.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("bce_logits_mean matches the closed form and its gradient") {
  Tape t;
  Matrix z = Matrix::Zero(2, 1);
  Matrix targets(2, 1);
  targets << 1.0, 0.0;
  Var loss = bce_logits_mean(t, t.constant(z), targets);
  CHECK(t.val(loss)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Large logits stay finite (softplus-stable form).
  Matrix big(2, 1);
  big << 500.0, -500.0;
  Var l2 = bce_logits_mean(t, t.constant(big), targets);
  CHECK(t.val(l2)(0, 0) == doctest::Approx(0.0));

  Rng init(33);
  ParameterStore ps;
  ps.define("z", 3, 2, init, 3.0);
  Matrix y(3, 2);
  y << 1, 0, 0.25, 0.75, 0.5, 1;
  check_op(ps, [&](Tape& t2) {
    return bce_logits_mean(t2, param(t2, ps, "z"), y);
  });
}

TEST_CASE("gradients accumulate across reuse of one node") {
  Rng init(5);
  ParameterStore ps;
  ps.define("w", 2, 2, init, 1.0);
  Tape t;
  Var w = param(t, ps, "w");
  Var both = add(t, cmul(t, w, w), w);  // d/dw (w*w + w) = 2w + 1
  t.backward(sum_all(t, both));
  Matrix expect = 2.0 * ps.value("w") + Matrix::Ones(2, 2);
  CHECK((t.grad(w) - expect).cwiseAbs().maxCoeff() < 1e-12);

  // Importing the same name twice references the same node.
  CHECK(param(t, ps, "w") == w);
}

TEST_CASE("constants carry no gradient work") {
  Tape t;
  Var c = t.constant(Matrix::Ones(3, 3));
  Var d = tanh_op(t, c);
  CHECK_FALSE(t.needs_grad(d));
  Var s = sum_all(t, d);
  t.backward(s);  // no parameters anywhere: a no-op
  CHECK(t.param_grads().empty());
}

TEST_CASE("shape violations throw ShapeMismatch") {
  Tape t;
  Var a = t.constant(Matrix::Zero(2, 3));
  Var b = t.constant(Matrix::Zero(2, 3));
  CHECK_THROWS_AS(matmul(t, a, b), ShapeMismatch);
  CHECK_THROWS_AS(add(t, a, t.constant(Matrix::Zero(3, 2))), ShapeMismatch);
  CHECK_THROWS_AS(add_row(t, a, t.constant(Matrix::Zero(1, 2))),
                  ShapeMismatch);
  CHECK_THROWS_AS(slice_cols(t, a, 2, 2), ShapeMismatch);
  CHECK_THROWS_AS(pick(t, a, 2, 0), ShapeMismatch);
  CHECK_THROWS_AS(gather_rows(t, a, {0, 2}), ShapeMismatch);
  CHECK_THROWS_AS(vstack(t, {a, t.constant(Matrix::Zero(1, 2))}),
                  ShapeMismatch);
  CHECK_THROWS_AS(t.backward(a), ShapeMismatch);
}

TEST_CASE("finite checking traps NaN and Inf at the offending node") {
  Tape strict(true);
  Matrix bad(1, 1);
  bad << std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(strict.constant(bad), NonFinite);

  Tape lax(false);
  CHECK_NOTHROW(lax.constant(bad));
}

TEST_CASE("forward evaluation is bit-deterministic") {
  auto run = [] {
    Rng init(77);
    ParameterStore ps;
    ps.define("W", 8, 8, init, 0.5);
    Tape t;
    Var x = t.constant(Matrix::Ones(4, 8) * 0.25);
    Var y = tanh_op(t, matmul(t, x, param(t, ps, "W")));
    Var l = sum_all(t, cmul(t, y, y));
    t.backward(l);
    return std::make_pair(t.val(l)(0, 0), t.param_grads().at("W"));
  };
  auto [la, ga] = run();
  auto [lb, gb] = run();
  CHECK(la == lb);
  CHECK(ga == gb);
}

TEST_CASE("reset clears nodes and the import memo") {
  Rng init(9);
  ParameterStore ps;
  ps.define("w", 1, 1, init, 1.0);
  Tape t;
  param(t, ps, "w");
  CHECK(t.size() == 1);
  t.reset();
  CHECK(t.size() == 0);
  Var again = param(t, ps, "w");
  CHECK(again == 0);
}
