#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "grad_check.hpp"
#include "minotaur/divergence.hpp"
#include "minotaur/rng.hpp"

using namespace minotaur;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

// Test-side reference implementation of Eq-style unbiased MMD, written as the
// literal three-term sum over vectors. Kept independent of the library path.
double naive_mmd(const std::vector<Eigen::VectorXd>& p,
                 const std::vector<Eigen::VectorXd>& q, const KernelConfig& cfg) {
  auto k = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double d2 = (a - b).squaredNorm();
    double sum = 0;
    for (double s : cfg.scales) sum += s * cfg.base / (s * cfg.base + d2);
    return sum;
  };
  double within_p = 0, within_q = 0, cross = 0;
  const auto np = static_cast<double>(p.size()), nq = static_cast<double>(q.size());
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = 0; j < p.size(); ++j)
      if (i != j) within_p += k(p[i], p[j]);
  for (size_t i = 0; i < q.size(); ++i)
    for (size_t j = 0; j < q.size(); ++j)
      if (i != j) within_q += k(q[i], q[j]);
  for (const auto& a : p)
    for (const auto& b : q) cross += k(a, b);
  return within_p / (np * (np - 1)) + within_q / (nq * (nq - 1)) - 2 * cross / (np * nq);
}

// Quadrature oracle for KL between 1-D Gaussians: Simpson over [-14, 14].
double kl_quadrature(double mu_p, double var_p, double mu_q, double var_q) {
  auto logpdf = [](double x, double mu, double var) {
    return -0.5 * std::log(2 * M_PI * var) - (x - mu) * (x - mu) / (2 * var);
  };
  const int n = 40000;
  const double lo = -14, hi = 14, h = (hi - lo) / n;
  double acc = 0;
  for (int i = 0; i <= n; ++i) {
    double x = lo + i * h;
    double lp = logpdf(x, mu_p, var_p);
    double f = std::exp(lp) * (lp - logpdf(x, mu_q, var_q));
    double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    acc += w * f;
  }
  return acc * h / 3.0;
}

std::vector<Eigen::VectorXd> gaussian_cloud(int n, int d, Rng& rng, double shift = 0) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(d);
    for (int j = 0; j < d; ++j) v(j) = rng.normal() + shift;
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("imq kernel golden values") {
  KernelConfig cfg = KernelConfig::for_dim(2);  // C = 4
  CHECK(cfg.base == 4.0);

  Eigen::VectorXd p = vec({0.3, -1.2});
  CHECK(imq_kernel(p, p, cfg) == 7.0);  // exact: every term is 1

  // |p-q|^2 = C pairs s with 1/s, each pair of terms sums to 1.
  Eigen::VectorXd q = vec({0.3 + 2.0, -1.2});
  CHECK(imq_kernel(p, q, cfg) == doctest::Approx(3.5).epsilon(1e-13));

  Eigen::VectorXd far = vec({std::sqrt(1e6 * cfg.base), 0.0});
  Eigen::VectorXd zero = vec({0.0, 0.0});
  CHECK(imq_kernel(far, zero, cfg) < 1e-4);
}

TEST_CASE("imq kernel is strictly decreasing and bounded") {
  KernelConfig cfg = KernelConfig::for_dim(3);
  Eigen::VectorXd zero = vec({0, 0, 0});
  double prev = imq_kernel(zero, zero, cfg);
  CHECK(prev == doctest::Approx(cfg.scales.size()));
  for (double r : {0.1, 0.5, 1.0, 3.0, 10.0, 100.0}) {
    double k = imq_kernel(zero, vec({r, 0, 0}), cfg);
    CHECK(k < prev);
    CHECK(k > 0);
    prev = k;
  }
}

TEST_CASE("imq kernel rejects invalid input") {
  KernelConfig cfg = KernelConfig::for_dim(2);
  CHECK_THROWS_AS(imq_kernel(vec({1, 2}), vec({1}), cfg), std::invalid_argument);
  CHECK_THROWS_AS(imq_kernel(vec({std::nan(""), 0}), vec({0, 0}), cfg),
                  std::invalid_argument);
}

TEST_CASE("mmd hand-expanded golden value") {
  KernelConfig cfg;
  cfg.base = 4.0;
  std::vector<Eigen::VectorXd> s = {vec({0}), vec({2})};
  // within terms are k(0,2) = 3.5 each; cross term = (7 + 3.5 + 3.5 + 7)/2.
  CHECK(mmd_unbiased(s, s, cfg) == doctest::Approx(-3.5).epsilon(1e-13));
}

TEST_CASE("mmd is symmetric, permutation invariant, and matches the naive sum") {
  Rng rng(101);
  KernelConfig cfg = KernelConfig::for_dim(4);
  auto p = gaussian_cloud(7, 4, rng);
  auto q = gaussian_cloud(5, 4, rng, 0.5);
  double pq = mmd_unbiased(p, q, cfg);
  double qp = mmd_unbiased(q, p, cfg);
  CHECK(pq == doctest::Approx(qp).epsilon(1e-12));
  CHECK(pq == doctest::Approx(naive_mmd(p, q, cfg)).epsilon(1e-10));

  auto p_shuffled = p;
  rng.shuffle(p_shuffled);
  CHECK(mmd_unbiased(p_shuffled, q, cfg) == doctest::Approx(pq).epsilon(1e-10));
}

TEST_CASE("mmd estimator is consistent at zero for identical distributions") {
  Rng rng(2024);
  KernelConfig cfg = KernelConfig::for_dim(8);
  auto p = gaussian_cloud(2000, 8, rng);
  auto q = gaussian_cloud(2000, 8, rng);
  CHECK(std::abs(mmd_unbiased(p, q, cfg)) < 0.05);
}

TEST_CASE("mmd rejects undersized inputs") {
  KernelConfig cfg = KernelConfig::for_dim(1);
  std::vector<Eigen::VectorXd> one = {vec({0})};
  std::vector<Eigen::VectorXd> two = {vec({0}), vec({1})};
  CHECK_THROWS_AS(mmd_unbiased(one, two, cfg), std::invalid_argument);
  CHECK_THROWS_AS(mmd_unbiased(two, one, cfg), std::invalid_argument);
}

TEST_CASE("w2 golden values") {
  DiagonalGaussian p{vec({0, 0}), vec({1, 1})};
  CHECK(w2_diag(p, p) == 0.0);

  DiagonalGaussian q{vec({3, 4}), vec({1, 1})};
  CHECK(w2_diag(p, q) == doctest::Approx(25.0).epsilon(1e-13));

  DiagonalGaussian a{vec({0}), vec({1})};
  DiagonalGaussian b{vec({1}), vec({4})};
  CHECK(w2_diag(a, b) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("w2 against the quantile-coupling sampling oracle") {
  // In 1-D the optimal coupling pairs order statistics; W2^2 is the mean
  // squared gap between sorted samples.
  Rng rng(7);
  const int n = 100000;
  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) xs[static_cast<size_t>(i)] = rng.normal();            // N(0,1)
  for (int i = 0; i < n; ++i) ys[static_cast<size_t>(i)] = 1.0 + 2.0 * rng.normal();  // N(1,4)
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  double oracle = 0;
  for (int i = 0; i < n; ++i) {
    double d = xs[static_cast<size_t>(i)] - ys[static_cast<size_t>(i)];
    oracle += d * d;
  }
  oracle /= n;
  DiagonalGaussian a{vec({0}), vec({1})};
  DiagonalGaussian b{vec({1}), vec({4})};
  CHECK(w2_diag(a, b) == doctest::Approx(oracle).epsilon(0.02));
}

TEST_CASE("w2 symmetry and quadratic mean scaling") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    int d = 1 + rng.uniform_int(5);
    Eigen::VectorXd mp(d), mq(d), vp(d), vq(d);
    for (int i = 0; i < d; ++i) {
      mp(i) = rng.uniform(-2, 2);
      mq(i) = rng.uniform(-2, 2);
      vp(i) = rng.uniform(0.25, 4);
      vq(i) = rng.uniform(0.25, 4);
    }
    DiagonalGaussian p{mp, vp}, q{mq, vq};
    double w = w2_diag(p, q);
    CHECK(w >= 0);
    CHECK(w == doctest::Approx(w2_diag(q, p)).epsilon(1e-12));

    // Scaling both means by c scales the mean part by c^2, variance part fixed.
    double c = 3.0;
    DiagonalGaussian pc{c * mp, vp}, qc{c * mq, vq};
    double var_part = (vp.array().sqrt() - vq.array().sqrt()).square().sum();
    double mean_part = (mp - mq).squaredNorm();
    CHECK(w2_diag(pc, qc) ==
          doctest::Approx(c * c * mean_part + var_part).epsilon(1e-10));
  }
}

TEST_CASE("kl golden values and quadrature oracle") {
  DiagonalGaussian p{vec({0}), vec({1})};
  CHECK(kl_diag(p, p) == 0.0);

  DiagonalGaussian q{vec({0}), vec({std::exp(1.0)})};
  double expected = 0.5 * (1.0 - 1.0 + std::exp(-1.0));
  CHECK(kl_diag(p, q) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(kl_diag(p, q) == doctest::Approx(kl_quadrature(0, 1, 0, std::exp(1.0))).epsilon(1e-6));

  DiagonalGaussian a{vec({1}), vec({1})};
  DiagonalGaussian b{vec({0}), vec({1})};
  CHECK(kl_diag(a, b) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(kl_diag(a, b) == doctest::Approx(kl_quadrature(1, 1, 0, 1)).epsilon(1e-6));
}

TEST_CASE("kl is nonnegative, zero iff equal, and asymmetric") {
  Rng rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    int d = 1 + rng.uniform_int(4);
    Eigen::VectorXd mp(d), mq(d), vp(d), vq(d);
    for (int i = 0; i < d; ++i) {
      mp(i) = rng.uniform(-2, 2);
      mq(i) = rng.uniform(-2, 2);
      vp(i) = rng.uniform(0.25, 4);
      vq(i) = rng.uniform(0.25, 4);
    }
    DiagonalGaussian p{mp, vp}, q{mq, vq};
    CHECK(kl_diag(p, q) >= 0);
    CHECK(kl_diag(p, p) == 0.0);
  }
  DiagonalGaussian p{vec({0}), vec({1})};
  DiagonalGaussian q{vec({0}), vec({4})};
  CHECK(kl_diag(p, q) != doctest::Approx(kl_diag(q, p)).epsilon(1e-6));
}

TEST_CASE("kl printed-form flag changes the mean term scaling") {
  DiagonalGaussian p{vec({1}), vec({1})};
  DiagonalGaussian q{vec({0}), vec({4})};
  // standard: .5 (log4 - 1 + 1/4 + 1/4); printed: .5 (log4 - 1 + 1/4 + 4)
  CHECK(kl_diag(p, q, false) ==
        doctest::Approx(0.5 * (std::log(4.0) - 1 + 0.25 + 0.25)).epsilon(1e-12));
  CHECK(kl_diag(p, q, true) ==
        doctest::Approx(0.5 * (std::log(4.0) - 1 + 0.25 + 4.0)).epsilon(1e-12));
}

TEST_CASE("individual divergence equals the brute-force pair enumeration") {
  GaussianSequence a, b;
  a.means = Eigen::MatrixXd(2, 3);
  a.means << 0.5, -1, 2, 1, 0, -0.5;
  a.variance = vec({1, 2, 0.5});
  b.means = Eigen::MatrixXd(1, 3);
  b.means << -0.25, 0.75, 1.5;
  b.variance = vec({2, 1, 1});

  for (auto metric : {IndividualMetric::W2, IndividualMetric::KL}) {
    double brute = 0;
    for (int i = 0; i < a.length(); ++i)
      for (int j = 0; j < b.length(); ++j) {
        brute += metric == IndividualMetric::W2 ? w2_diag(a.token(i), b.token(j))
                                                : kl_diag(a.token(i), b.token(j));
      }
    brute /= a.length() * b.length();
    CHECK(individual_divergence(a, b, metric) == doctest::Approx(brute).epsilon(1e-10));
  }

  // Single identical pair is exactly zero under both metrics.
  GaussianSequence c;
  c.means = Eigen::MatrixXd::Constant(1, 3, 0.7);
  c.variance = vec({1, 1, 1});
  CHECK(individual_divergence(c, c, IndividualMetric::W2) == doctest::Approx(0.0));
  CHECK(individual_divergence(c, c, IndividualMetric::KL) ==
        doctest::Approx(0.0).epsilon(1e-12));

  // W2 symmetry carries over to the symmetric pair enumeration.
  CHECK(individual_divergence(a, b, IndividualMetric::W2) ==
        doctest::Approx(individual_divergence(b, a, IndividualMetric::W2)).epsilon(1e-11));
}

TEST_CASE("aggregate divergence delegates to mmd") {
  KernelConfig cfg;
  cfg.base = 4.0;
  std::vector<Eigen::VectorXd> s = {vec({0}), vec({2})};
  CHECK(aggregate_divergence(s, s, cfg) == doctest::Approx(-3.5).epsilon(1e-13));

  Rng rng(5);
  auto a = gaussian_cloud(6, 3, rng);
  auto b = gaussian_cloud(9, 3, rng, 1.0);
  KernelConfig k3 = KernelConfig::for_dim(3);
  CHECK(aggregate_divergence(a, b, k3) ==
        doctest::Approx(aggregate_divergence(b, a, k3)).epsilon(1e-12));
  CHECK(aggregate_divergence(a, b, k3) ==
        doctest::Approx(mmd_unbiased(a, b, k3)).epsilon(1e-13));
}

TEST_CASE("minotaur divergence combines weighted components") {
  Rng rng(15);
  GaussianSequence en, tgt;
  en.means = Eigen::MatrixXd::Random(3, 4);
  en.variance = vec({1, 1, 1, 1});
  tgt.means = Eigen::MatrixXd::Random(2, 4);
  tgt.variance = vec({2, 1, 0.5, 1});
  auto en_tokens = gaussian_cloud(5, 4, rng);
  auto tgt_tokens = gaussian_cloud(5, 4, rng, 0.3);

  AlignmentConfig cfg;
  cfg.alpha_p = 0;
  cfg.beta_p = 0;
  CHECK(minotaur_divergence(en, tgt, en_tokens, tgt_tokens, cfg) == 0.0);

  cfg.alpha_p = 0.01;
  cfg.beta_p = 0.5;
  KernelConfig kernel = KernelConfig::for_dim(4);
  double dz = aggregate_divergence(en_tokens, tgt_tokens, kernel);
  double dzx = individual_divergence(tgt, en, IndividualMetric::W2);
  CHECK(minotaur_divergence(en, tgt, en_tokens, tgt_tokens, cfg) ==
        doctest::Approx(0.01 * dz + 0.5 * dzx).epsilon(1e-12));

  // Selector contract: individual metric off reproduces the D_Z-only row.
  cfg.individual_metric = IndividualMetric::None;
  CHECK(minotaur_divergence(en, tgt, en_tokens, tgt_tokens, cfg) ==
        doctest::Approx(0.01 * dz).epsilon(1e-12));
}

TEST_CASE("prior regularizer determinism, consistency, and shift monotonicity") {
  KernelConfig cfg = KernelConfig::for_dim(8);
  Rng data_rng(40);
  auto z = gaussian_cloud(2000, 8, data_rng);

  Rng r1(99), r2(99);
  double v1 = prior_regularizer(z, 2000, cfg, r1);
  double v2 = prior_regularizer(z, 2000, cfg, r2);
  CHECK(v1 == v2);  // bitwise determinism given the seed
  CHECK(std::abs(v1) < 0.05);

  auto shifted = z;
  for (auto& v : shifted) v.array() += 100.0;
  Rng r3(99);
  CHECK(prior_regularizer(shifted, 2000, cfg, r3) > v1);
}

TEST_CASE("divergence gradients match finite differences") {
  Rng rng(555);
  auto rand_means = [&](int t, int d) {
    Eigen::MatrixXd m(t, d);
    for (int i = 0; i < t; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(-2, 2);
    return m;
  };
  auto rand_vars = [&](int d) {
    Eigen::MatrixXd m(1, d);
    for (int j = 0; j < d; ++j) m(0, j) = rng.uniform(0.25, 4);
    return m;
  };

  for (int trial = 0; trial < 3; ++trial) {
    int d = 2 + rng.uniform_int(3);
    auto fails = gradcheck::check(
        [&](const std::vector<gradcheck::Var>& in) {
          return w2_diag(in[0], in[1], in[2], in[3]);
        },
        {rand_means(1, d), rand_vars(d), rand_means(1, d), rand_vars(d)});
    CHECK(fails.empty());

    fails = gradcheck::check(
        [&](const std::vector<gradcheck::Var>& in) {
          return kl_diag(in[0], in[1], in[2], in[3]);
        },
        {rand_means(1, d), rand_vars(d), rand_means(1, d), rand_vars(d)});
    CHECK(fails.empty());

    KernelConfig kc = KernelConfig::for_dim(d);
    fails = gradcheck::check(
        [&](const std::vector<gradcheck::Var>& in) {
          return imq_kernel(in[0], in[1], kc);
        },
        {rand_means(1, d), rand_means(1, d)});
    CHECK(fails.empty());

    fails = gradcheck::check(
        [&](const std::vector<gradcheck::Var>& in) {
          return mmd_unbiased(in[0], in[1], kc);
        },
        {rand_means(4, d), rand_means(3, d)});
    CHECK(fails.empty());

    fails = gradcheck::check(
        [&](const std::vector<gradcheck::Var>& in) {
          return individual_divergence(in[0], in[1], in[2], in[3], IndividualMetric::KL);
        },
        {rand_means(3, d), rand_vars(d), rand_means(2, d), rand_vars(d)});
    CHECK(fails.empty());
  }
}

TEST_CASE("divergences reject invalid gaussians") {
  DiagonalGaussian good{vec({0, 0}), vec({1, 1})};
  DiagonalGaussian bad_var{vec({0, 0}), vec({1, -1})};
  DiagonalGaussian bad_dim{vec({0}), vec({1})};
  CHECK_THROWS_AS(w2_diag(good, bad_var), std::invalid_argument);
  CHECK_THROWS_AS(kl_diag(good, bad_var), std::invalid_argument);
  CHECK_THROWS_AS(w2_diag(good, bad_dim), std::invalid_argument);
}
