#include <functional>

#include "doctest.h"
#include "test_support.hpp"
#include "uranker/errors.hpp"
#include "uranker/ops.hpp"

using namespace uranker;
using namespace uranker::ag;
using uranker::testing::gradient_check;
using uranker::testing::random_tensor;

namespace {

// Projects an op's output onto fixed random weights so every output entry
// contributes to the scalar being differentiated.
std::function<Var(const Var&)> probe(std::function<Var(const Var&)> op, Shape out_shape, std::uint64_t seed) {
  nn::Rng rng(seed);
  Var w(random_tensor(std::move(out_shape), rng));
  return [op, w](const Var& x) { return sum(mul(op(x), w)); };
}

}  // namespace

TEST_CASE("elementwise op gradients match central differences") {
  nn::Rng rng(10);
  Tensor x = random_tensor({4, 5}, rng);
  Var other(random_tensor({4, 5}, rng));
  Var s(Tensor::scalar(0.7));
  CHECK(gradient_check(probe([&](const Var& v) { return add(v, other); }, {4, 5}, 1), x) < 1e-8);
  CHECK(gradient_check(probe([&](const Var& v) { return sub(other, v); }, {4, 5}, 2), x) < 1e-8);
  CHECK(gradient_check(probe([&](const Var& v) { return mul(v, v); }, {4, 5}, 3), x) < 1e-8);
  CHECK(gradient_check(probe([&](const Var& v) { return mul_scalar(s, v); }, {4, 5}, 4), x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return gelu(v); }, {4, 5}, 5), x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return elu(v); }, {4, 5}, 6), x) < 1e-7);
  CHECK(gradient_check(probe([](const Var& v) { return sigmoid(v); }, {4, 5}, 7), x) < 1e-8);
  CHECK(gradient_check([&](const Var& v) { return mean_abs_diff(v, other); }, x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return clamp(v, -0.5, 0.5); }, {4, 5}, 8), x) < 1e-8);
}

TEST_CASE("scale argument of mul_scalar gets the right gradient") {
  nn::Rng rng(11);
  Var x(random_tensor({3, 3}, rng));
  CHECK(gradient_check([&](const Var& s) { return sum(mul(mul_scalar(s, x), x)); }, Tensor::scalar(0.3)) < 1e-8);
}

TEST_CASE("matmul gradients for all transpose flags") {
  nn::Rng rng(12);
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      Tensor a = random_tensor(ta ? Shape{4, 3} : Shape{3, 4}, rng);
      Var b(random_tensor(tb ? Shape{5, 4} : Shape{4, 5}, rng));
      CHECK(gradient_check(probe([&](const Var& v) { return matmul(v, b, ta, tb); }, {3, 5}, 20), a) < 1e-8);
      Var av(a);
      Tensor bt = b.value();
      CHECK(gradient_check(probe([&](const Var& v) { return matmul(av, v, ta, tb); }, {3, 5}, 21), bt) < 1e-8);
    }
  }
}

TEST_CASE("normalisation, softmax and layout op gradients") {
  nn::Rng rng(13);
  Tensor x = random_tensor({5, 6}, rng);
  Var gamma(random_tensor({6}, rng)), beta(random_tensor({6}, rng));
  Var rg(random_tensor({5}, rng)), rb(random_tensor({5}, rng));
  CHECK(gradient_check(probe([&](const Var& v) { return layer_norm(v, gamma, beta); }, {5, 6}, 30), x) < 1e-6);
  CHECK(gradient_check(probe([](const Var& v) { return softmax_rows(v); }, {5, 6}, 31), x) < 1e-7);
  CHECK(gradient_check(probe([](const Var& v) { return transpose(v); }, {6, 5}, 32), x) < 1e-8);
  CHECK(gradient_check(probe([&](const Var& v) { return affine_rows(v, rg, rb); }, {5, 6}, 33), x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return slice_cols(v, 1, 4); }, {5, 3}, 34), x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return slice0(v, 2, 5); }, {3, 6}, 35), x) < 1e-8);
  CHECK(gradient_check(
            probe([](const Var& v) { return concat0({slice0(v, 3, 5), v}); }, {7, 6}, 36), x) < 1e-8);
  CHECK(gradient_check(
            probe([](const Var& v) { return concat_cols({v, slice_cols(v, 0, 2)}); }, {5, 8}, 37), x) < 1e-8);
  CHECK(gradient_check(probe([&](const Var& v) { return add_row_vector(v, gamma); }, {5, 6}, 38), x) < 1e-8);

  Tensor img = random_tensor({3, 4, 5}, rng);
  Var ig(random_tensor({3}, rng)), ib(random_tensor({3}, rng));
  CHECK(gradient_check(probe([&](const Var& v) { return instance_norm(v, ig, ib); }, {3, 4, 5}, 39), img) < 1e-6);
}

TEST_CASE("conv2d and bilinear gradients w.r.t. input, weight and bias") {
  nn::Rng rng(14);
  Tensor x = random_tensor({4, 6, 6}, rng);
  Var w(random_tensor({6, 2, 3, 3}, rng)), b(random_tensor({6}, rng));
  CHECK(gradient_check(probe([&](const Var& v) { return conv2d(v, w, b, 1, 1, 2); }, {6, 6, 6}, 40), x) < 1e-7);
  CHECK(gradient_check(probe([&](const Var& v) { return conv2d(v, w, b, 2, 1, 2); }, {6, 3, 3}, 41), x) < 1e-7);
  Var xv(x);
  Tensor wt = w.value();
  CHECK(gradient_check(probe([&](const Var& v) { return conv2d(xv, v, b, 1, 1, 2); }, {6, 6, 6}, 42), wt) < 1e-7);
  Tensor bt = b.value();
  CHECK(gradient_check(probe([&](const Var& v) { return conv2d(xv, w, v, 1, 1, 2); }, {6, 6, 6}, 43), bt) < 1e-7);
  CHECK(gradient_check(probe([](const Var& v) { return bilinear_resize(v, 3, 3); }, {4, 3, 3}, 44), x) < 1e-8);
  CHECK(gradient_check(probe([](const Var& v) { return bilinear_resize(v, 12, 9); }, {4, 12, 9}, 45), x) < 1e-8);
}

TEST_CASE("graph bookkeeping") {
  SUBCASE("no recording under NoGradGuard") {
    Var x(Tensor({2}, 1.0), true);
    NoGradGuard g;
    Var y = add(x, x);
    CHECK_FALSE(y.requires_grad());
  }
  SUBCASE("shared subexpressions accumulate") {
    Var x(Tensor::scalar(3.0), true);
    Var y = mul(x, x);
    Var z = add(y, y);  // 2x²
    z.backward();
    CHECK(x.grad()[0] == doctest::Approx(12.0));
  }
  SUBCASE("leaves without requires_grad stay untouched") {
    Var x(Tensor::scalar(3.0), false);
    Var p(Tensor::scalar(2.0), true);
    mul(x, p).backward();
    CHECK_FALSE(x.has_grad());
    CHECK(p.grad()[0] == 3.0);
  }
  SUBCASE("shape errors") {
    CHECK_THROWS_AS(add(Var(Tensor({2})), Var(Tensor({3}))), uranker::ShapeError);
    CHECK_THROWS_AS(matmul(Var(Tensor({2, 3})), Var(Tensor({2, 3}))), uranker::ShapeError);
  }
}

TEST_CASE("relu propagates NaN") {
  Var x(Tensor({2}, std::vector<double>{std::nan(""), -1.0}));
  const Tensor y = ag::relu(x).value();
  CHECK(std::isnan(y[0]));
  CHECK(y[1] == 0.0);
}
