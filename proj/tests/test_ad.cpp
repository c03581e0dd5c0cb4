#include <doctest.h>

#include <cmath>

#include "grad_check.hpp"
#include "minotaur/ad.hpp"
#include "minotaur/rng.hpp"

using namespace minotaur;
using ad::Matrix;
using ad::Var;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

void expect_no_failures(const std::vector<gradcheck::Failure>& fails) {
  if (!fails.empty()) {
    const auto& f = fails.front();
    CAPTURE(f.input);
    CAPTURE(f.row);
    CAPTURE(f.col);
    CAPTURE(f.analytic);
    CAPTURE(f.numeric);
  }
  CHECK(fails.empty());
}

}  // namespace

TEST_CASE("forward values of basic ops") {
  Matrix a(2, 2), b(2, 2);
  a << 1, 2, 3, 4;
  b << 5, 6, 7, 8;
  CHECK(ad::add(ad::constant(a), ad::constant(b)).value()(1, 1) == 12);
  CHECK(ad::matmul(ad::constant(a), ad::constant(b)).value()(0, 0) == 19);
  CHECK(ad::sum_all(ad::constant(a)).scalar() == 10);
  CHECK(ad::transpose(ad::constant(a)).value()(0, 1) == 3);
  CHECK(ad::row_sum(ad::constant(a)).value()(1, 0) == 7);
  CHECK(ad::col_sum(ad::constant(a)).value()(0, 1) == 6);
}

TEST_CASE("row_softmax rows sum to one and are stable under shift") {
  Matrix a(2, 3);
  a << 1000, 1001, 1002, -5, 0, 5;
  Matrix p = ad::row_softmax(ad::constant(a)).value();
  CHECK(p.row(0).sum() == doctest::Approx(1.0));
  CHECK(p.row(1).sum() == doctest::Approx(1.0));
  CHECK(p(0, 2) > p(0, 0));
}

TEST_CASE("gradients of arithmetic and reduction ops match finite differences") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a = random_matrix(3, 4, rng);
    Matrix b = random_matrix(3, 4, rng);
    Matrix c = random_matrix(4, 2, rng);
    expect_no_failures(gradcheck::check(
        [](const std::vector<Var>& in) {
          Var prod = ad::matmul(ad::cmul(in[0], in[1]), in[2]);
          return ad::sum_all(ad::relu(prod));
        },
        {a, b, c}));
  }
}

TEST_CASE("gradients of broadcast and concat ops") {
  Rng rng(11);
  Matrix v = random_matrix(3, 1, rng);
  Matrix w = random_matrix(1, 4, rng);
  Matrix a = random_matrix(3, 4, rng);
  expect_no_failures(gradcheck::check(
      [](const std::vector<Var>& in) {
        Var m = ad::add(ad::broadcast_cols(in[0], 4), ad::broadcast_rows(in[1], 3));
        Var both = ad::cmul(m, in[2]);
        Var cat = ad::concat_cols({both, ad::neg(both)});
        return ad::mean_all(cat);
      },
      {v, w, a}));
}

TEST_CASE("gradients of elementwise maps") {
  Rng rng(13);
  Matrix a = random_matrix(2, 3, rng, 0.2, 2.0);  // positive for log/sqrt
  expect_no_failures(gradcheck::check(
      [](const std::vector<Var>& in) {
        Var x = in[0];
        Var y = ad::add(ad::log(x), ad::sqrt(x));
        y = ad::add(y, ad::exp(ad::scale(x, -1.0)));
        y = ad::add(y, ad::softplus(x));
        y = ad::add(y, ad::reciprocal(x));
        return ad::sum_all(y);
      },
      {a}));
}

TEST_CASE("gradient of cdiv and block") {
  Rng rng(17);
  Matrix a = random_matrix(3, 3, rng);
  Matrix b = random_matrix(3, 3, rng, 0.5, 2.0);
  expect_no_failures(gradcheck::check(
      [](const std::vector<Var>& in) {
        Var q = ad::cdiv(in[0], in[1]);
        return ad::sum_all(ad::block(q, 1, 0, 2, 2));
      },
      {a, b}));
}

TEST_CASE("gradient of row_softmax and layer_norm") {
  Rng rng(19);
  Matrix x = random_matrix(3, 5, rng);
  Matrix g = random_matrix(1, 5, rng, 0.5, 1.5);
  Matrix b = random_matrix(1, 5, rng, -0.5, 0.5);
  Matrix mix = random_matrix(3, 5, rng);
  expect_no_failures(gradcheck::check(
      [&](const std::vector<Var>& in) {
        Var sm = ad::row_softmax(in[0]);
        Var ln = ad::layer_norm(in[1], in[2], in[3]);
        return ad::sum_all(ad::cmul(sm, ad::cmul(ln, ad::constant(mix))));
      },
      {x, x, g, b}));
}

TEST_CASE("gradient of gather_rows and cross_entropy_logits") {
  Rng rng(23);
  Matrix table = random_matrix(6, 4, rng);
  std::vector<int> ids = {2, 0, 5, 2};
  std::vector<int> targets = {1, 3, 0, 2};
  Matrix proj = random_matrix(4, 4, rng);
  expect_no_failures(gradcheck::check(
      [&](const std::vector<Var>& in) {
        Var e = ad::gather_rows(in[0], ids);
        Var logits = ad::matmul(e, in[1]);
        return ad::cross_entropy_logits(logits, targets);
      },
      {table, proj}));
}

TEST_CASE("cross_entropy_logits skips rows whose target is the ignore id") {
  Matrix logits(3, 4);
  logits << 1, 2, 3, 4,
            4, 3, 2, 1,
            9, 9, 9, 9;  // would dominate if counted
  double z0 = std::exp(1.0) + std::exp(2.0) + std::exp(3.0) + std::exp(4.0);
  double z1 = z0;
  double expected = 0.5 * (-std::log(std::exp(4.0) / z0) - std::log(std::exp(3.0) / z1));
  double got =
      ad::cross_entropy_logits(ad::constant(logits), {3, 1, 0}, /*ignore_id=*/0).scalar();
  CHECK(got == doctest::Approx(expected));
}

TEST_CASE("gradient of pairwise_sqdist and imq_from_sqdist") {
  Rng rng(29);
  Matrix p = random_matrix(4, 3, rng);
  Matrix q = random_matrix(5, 3, rng);
  expect_no_failures(gradcheck::check(
      [](const std::vector<Var>& in) {
        Var d = ad::pairwise_sqdist(in[0], in[1]);
        Var k = ad::imq_from_sqdist(d, {0.1, 1.0, 10.0}, 6.0);
        return ad::sum_all(k);
      },
      {p, q}));
}

TEST_CASE("fused multihead attention matches finite differences") {
  Rng rng(37);
  Matrix q = random_matrix(4, 6, rng);
  Matrix k = random_matrix(5, 6, rng);
  Matrix v = random_matrix(5, 6, rng);
  Matrix mix = random_matrix(4, 6, rng);
  Matrix bias = Matrix::Zero(4, 5);
  bias(0, 4) = -1e9;  // one masked key
  expect_no_failures(gradcheck::check(
      [&](const std::vector<Var>& in) {
        Var o = ad::multihead_attention_core(in[0], in[1], in[2], 2, &bias);
        return ad::sum_all(ad::cmul(o, ad::constant(mix)));
      },
      {q, k, v}));

  // Self-attention shares one node as q, k, and v.
  Matrix x = random_matrix(3, 4, rng);
  Matrix mix2 = random_matrix(3, 4, rng);
  expect_no_failures(gradcheck::check(
      [&](const std::vector<Var>& in) {
        Var o = ad::multihead_attention_core(in[0], in[0], in[0], 2);
        return ad::sum_all(ad::cmul(o, ad::constant(mix2)));
      },
      {x}));
}

TEST_CASE("backward accumulates when a node feeds multiple consumers") {
  Matrix a(1, 1);
  a << 3.0;
  Var x = ad::leaf(a);
  Var y = ad::add(ad::cmul(x, x), ad::scale(x, 2.0));  // x^2 + 2x
  ad::backward(y);
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));  // 2*3 + 2
}

TEST_CASE("constants carry no gradient state") {
  Matrix a = Matrix::Ones(2, 2);
  Var c = ad::constant(a);
  Var l = ad::leaf(a);
  Var out = ad::sum_all(ad::cmul(c, l));
  ad::backward(out);
  CHECK(c.node->grad.size() == 0);
  CHECK(l.grad().sum() == doctest::Approx(4.0));
}
