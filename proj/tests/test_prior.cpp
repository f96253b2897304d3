#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "test_support.hpp"
#include "vml/oracle.hpp"
#include "vml/prior.hpp"

using namespace vml;
namespace ts = testing_support;

namespace {

GaussianMixture symmetric_pair(double a, double s) {
  Eigen::VectorXd w(2);
  w << 0.5, 0.5;
  Eigen::VectorXd mp(1), mm(1);
  mp << a;
  mm << -a;
  return GaussianMixture::isotropic(w, {mp, mm}, s);
}

}  // namespace

TEST_CASE("mixture construction validates its invariants") {
  Eigen::VectorXd w(2);
  w << 0.6, 0.5;  // does not sum to 1
  Eigen::VectorXd m = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(1, 1);
  CHECK_THROWS_AS(GaussianMixture(w, {m, m}, {c, c}), std::invalid_argument);

  Eigen::VectorXd w1(1);
  w1 << 1.0;
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 0.5, 0.4999, 1.0;  // asymmetric beyond 1e-12
  CHECK_THROWS_AS(GaussianMixture(w1, {Eigen::VectorXd::Zero(2)}, {bad}),
                  std::invalid_argument);

  Eigen::MatrixXd indef = Eigen::MatrixXd::Identity(2, 2);
  indef(1, 1) = -0.1;
  CHECK_THROWS_AS(GaussianMixture(w1, {Eigen::VectorXd::Zero(2)}, {indef}),
                  std::invalid_argument);
}

TEST_CASE("standard normal log-density at the mean") {
  const int n = 3;
  const GaussianMixture gmm = GaussianMixture::single(
      Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n));
  const double expected = -0.5 * n * ts::kLog2Pi;
  CHECK(marginal_logpdf(gmm, Eigen::VectorXd::Zero(n), 0.0) ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("smoothed marginal equals the widened gaussian") {
  RandomSource rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const double s = 0.5 + rng.uniform();
    const Eigen::VectorXd mu = rng.gaussian_vector(n);
    const GaussianMixture gmm =
        GaussianMixture::single(mu, s * s * Eigen::MatrixXd::Identity(n, n));
    const double sigma = ts::log_uniform(rng, 1e-3, 50.0);
    const Eigen::VectorXd x = rng.gaussian_vector(n) * 2.0;
    const double expected = ts::ref_gaussian_logpdf(
        x, mu, (s * s + sigma * sigma) * Eigen::MatrixXd::Identity(n, n));
    CHECK(marginal_logpdf(gmm, x, sigma) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("two-component density at the origin, with a quadrature cross-check") {
  const GaussianMixture gmm = symmetric_pair(2.5, 1.0);
  Eigen::VectorXd x(1);
  x << 0.0;
  const double expected = ts::ref_gmm_logpdf(gmm, x, 0.0);
  CHECK(marginal_logpdf(gmm, x, 0.0) == doctest::Approx(expected).epsilon(1e-13));

  // smoothed marginal against a numerical convolution of the prior with the
  // gaussian kernel
  const double sigma = 0.7;
  double conv = 0.0;
  const int pts = 400001;
  const double lo = -12.0, hi = 12.0, step = (hi - lo) / (pts - 1);
  for (int i = 0; i < pts; ++i) {
    const double x0 = lo + i * step;
    Eigen::VectorXd p(1);
    p << x0;
    const double kernel = std::exp(-0.5 * x0 * x0 / (sigma * sigma)) /
                          std::sqrt(ts::kTwoPi * sigma * sigma);
    const double weight = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
    conv += weight * step * kernel * std::exp(ts::ref_gmm_logpdf(gmm, p, 0.0));
  }
  CHECK(marginal_logpdf(gmm, x, sigma) ==
        doctest::Approx(std::log(conv)).epsilon(1e-9));
}

TEST_CASE("score of a single gaussian is the conjugate form") {
  RandomSource rng(22);
  const int n = 2;
  const double s = 1.3, sigma = 0.8;
  const Eigen::VectorXd mu = rng.gaussian_vector(n);
  const GaussianMixture gmm =
      GaussianMixture::single(mu, s * s * Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd x = rng.gaussian_vector(n);
  const Eigen::VectorXd expected = -(x - mu) / (s * s + sigma * sigma);
  CHECK((score(gmm, x, sigma) - expected).norm() < 1e-14);
}

TEST_CASE("score matches finite differences of the marginal") {
  RandomSource rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1 + trial % 4);
    const double sigma = ts::log_uniform(rng, 1e-2, 30.0);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);
    const Eigen::VectorXd fd = oracle::finite_diff_grad(
        [&](const Eigen::VectorXd& p) { return marginal_logpdf(gmm, p, sigma); },
        x, oracle::default_fd_step(x));
    const Eigen::VectorXd s = score(gmm, x, sigma);
    CHECK((s - fd).norm() / (fd.norm() + 1e-12) < 1e-6);
  }
}

TEST_CASE("symmetric mixture has zero score at the origin") {
  const GaussianMixture gmm = symmetric_pair(1.7, 0.9);
  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK(std::abs(score(gmm, x, 0.4)[0]) < 1e-14);
}

TEST_CASE("denoiser at sigma zero returns the input unchanged") {
  RandomSource rng(24);
  const GaussianMixture gmm = ts::random_gmm(rng, 3, 2);
  const Eigen::VectorXd x = rng.gaussian_vector(3);
  CHECK(denoiser(gmm, x, 0.0) == x);
}

TEST_CASE("denoiser of a single gaussian: conjugate mean and mc cross-check") {
  RandomSource rng(25);
  const double s = 0.8, sigma = 1.1;
  Eigen::VectorXd mu(2);
  mu << 0.4, -1.0;
  const GaussianMixture gmm =
      GaussianMixture::single(mu, s * s * Eigen::MatrixXd::Identity(2, 2));
  const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

  const Eigen::VectorXd expected =
      (s * s * x + sigma * sigma * mu) / (s * s + sigma * sigma);
  const Eigen::VectorXd d = denoiser(gmm, x, sigma);
  CHECK((d - expected).norm() < 1e-13);

  const auto mc = oracle::mc_conditional_moments(gmm, x, sigma, 100000, rng);
  for (int i = 0; i < 2; ++i)
    CHECK(std::abs(mc.mean[i] - d[i]) <= 3.0 * mc.se_mean[i]);
}

TEST_CASE("tweedie identity: two algebraic routes agree") {
  RandomSource rng(26);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = std::vector<int>{1, 2, 8}[trial % 3];
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1 + trial % 4);
    const double sigma = ts::log_uniform(rng, 1e-3, 140.0);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);
    const Eigen::VectorXd d = denoiser(gmm, x, sigma);
    const Eigen::VectorXd via_score = x + sigma * sigma * score(gmm, x, sigma);
    CHECK((d - via_score).norm() < 1e-10);
  }
}

TEST_CASE("posterior covariance: conjugate form, fd jacobian, and psd") {
  RandomSource rng(27);
  const double s = 1.2, sigma = 0.6;
  const GaussianMixture single = GaussianMixture::single(
      Eigen::VectorXd::Zero(2), s * s * Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd x(2);
  x << 0.3, -0.9;
  const double expected = s * s * sigma * sigma / (s * s + sigma * sigma);
  CHECK((posterior_cov(single, x, sigma) -
         expected * Eigen::MatrixXd::Identity(2, 2))
            .norm() < 1e-13);

  CHECK_THROWS_AS(posterior_cov(single, x, 0.0), std::invalid_argument);

  for (int trial = 0; trial < 15; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1 + trial % 3);
    const double sig = ts::log_uniform(rng, 0.05, 10.0);
    const Eigen::VectorXd p = ts::sample_marginal(gmm, sig, rng);

    const Eigen::MatrixXd cov = posterior_cov(gmm, p, sig);
    const Eigen::MatrixXd fd = oracle::finite_diff_jacobian(
        [&](const Eigen::VectorXd& q) { return denoiser(gmm, q, sig); }, p,
        oracle::default_fd_step(p));
    CHECK((cov - sig * sig * fd).norm() / cov.norm() < 1e-5);

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("denoiser jacobian: conjugate form, vanishing limit, fd check") {
  RandomSource rng(28);
  const double s = 0.9;
  const GaussianMixture single = GaussianMixture::single(
      Eigen::VectorXd::Zero(2), s * s * Eigen::MatrixXd::Identity(2, 2));
  Eigen::VectorXd x(2);
  x << 1.0, 0.2;

  const double sigma = 0.5;
  const double expected = s * s / (s * s + sigma * sigma);
  CHECK((denoiser_jacobian(single, x, sigma) -
         expected * Eigen::MatrixXd::Identity(2, 2))
            .norm() < 1e-13);

  // sigma far above the prior scale: the jacobian collapses
  const Eigen::MatrixXd j_far = denoiser_jacobian(single, x, 1e6 * s);
  CHECK(j_far.norm() < 1e-3);

  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 2;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 2);
    const double sig = ts::log_uniform(rng, 0.1, 5.0);
    const Eigen::VectorXd p = ts::sample_marginal(gmm, sig, rng);
    const Eigen::MatrixXd jac = denoiser_jacobian(gmm, p, sig);
    const Eigen::MatrixXd fd = oracle::finite_diff_jacobian(
        [&](const Eigen::VectorXd& q) { return denoiser(gmm, q, sig); }, p,
        oracle::default_fd_step(p));
    CHECK((jac - fd).norm() / jac.norm() < 1e-5);
  }
}

TEST_CASE("measurement posterior: conjugate update and evidence reweighting") {
  // identity operator, single component
  {
    const double s = 1.1, sy = 0.3;
    Eigen::VectorXd mu(1), y(1);
    mu << -0.4;
    y << 0.9;
    const GaussianMixture gmm = GaussianMixture::single(
        mu, s * s * Eigen::MatrixXd::Identity(1, 1));
    const GaussianMixture post =
        measurement_posterior(gmm, LinearOperator::identity(1), y, sy);
    const double expected = (s * s * y[0] + sy * sy * mu[0]) / (s * s + sy * sy);
    CHECK(post.mean(0)[0] == doctest::Approx(expected).epsilon(1e-12));
  }

  // observing nothing returns the prior
  {
    RandomSource rng(29);
    const GaussianMixture gmm = ts::random_gmm(rng, 3, 2);
    const LinearOperator nothing = LinearOperator::mask(3, {});
    const GaussianMixture post =
        measurement_posterior(gmm, nothing, Eigen::VectorXd(0), 0.5);
    CHECK(post.weights() == gmm.weights());
    for (int k = 0; k < 2; ++k) {
      CHECK(post.mean(k) == gmm.mean(k));
      CHECK(post.covariance(k) == gmm.covariance(k));
    }
  }

  // informative measurement concentrates the weights
  {
    const GaussianMixture gmm = symmetric_pair(2.5, 1.0);
    Eigen::VectorXd y(1);
    y << 2.5;
    const GaussianMixture post =
        measurement_posterior(gmm, LinearOperator::identity(1), y, 0.05);
    CHECK(post.weight(0) > 0.99);
    CHECK(std::abs(post.weights().sum() - 1.0) <= 1e-12);
  }

  CHECK_THROWS_AS(
      measurement_posterior(symmetric_pair(1.0, 1.0),
                            LinearOperator::identity(1),
                            Eigen::VectorXd::Zero(1), 0.0),
      std::invalid_argument);
}

TEST_CASE("measurement posterior stays positive definite at sigma_y = 1e-9") {
  const GaussianMixture gmm = symmetric_pair(2.5, 1.0);
  Eigen::VectorXd y(1);
  y << 2.5;
  const GaussianMixture post =
      measurement_posterior(gmm, LinearOperator::identity(1), y, 1e-9);
  CHECK(post.weight(0) > 0.999);
  CHECK(post.covariance(0)(0, 0) == doctest::Approx(1e-18).epsilon(1e-6));
  CHECK(std::abs(post.mean(0)[0] - 2.5) < 1e-12);
}

TEST_CASE("map estimate: gaussian mode, weighted modes, and the grid oracle") {
  RandomSource rng(30);

  // single component: the mode is the mean
  {
    const GaussianMixture gmm = ts::random_gmm(rng, 2, 1);
    const MapResult res = map_estimate(gmm, {Eigen::VectorXd::Zero(2)});
    CHECK((res.point - gmm.mean(0)).norm() < 1e-8);
    CHECK(res.converged);
  }

  CHECK_THROWS_AS(map_estimate(symmetric_pair(1.0, 1.0), {}),
                  std::invalid_argument);

  // lopsided two-component: matches the dense scan + refinement
  {
    Eigen::VectorXd w(2);
    w << 0.9, 0.1;
    Eigen::VectorXd m0(1), m1(1);
    m0 << -2.0;
    m1 << 2.0;
    const GaussianMixture gmm = GaussianMixture::isotropic(w, {m0, m1}, 0.7);
    const MapResult res = map_estimate(gmm, {m1});

    oracle::GridSpec grid;
    grid.lower = Eigen::VectorXd::Constant(1, -6.0);
    grid.upper = Eigen::VectorXd::Constant(1, 6.0);
    grid.points = {20001};
    const Eigen::VectorXd scan = oracle::grid_argmax(
        [&](const Eigen::VectorXd& p) { return marginal_logpdf(gmm, p, 0.0); },
        grid);
    CHECK(std::abs(res.point[0] - scan[0]) < 1e-6);
  }

  // symmetric bimodal: lands on one of the two modes
  {
    const GaussianMixture gmm = symmetric_pair(2.5, 1.0);
    Eigen::VectorXd start(1);
    start << 0.3;
    const MapResult res = map_estimate(gmm, {start});
    oracle::GridSpec grid;
    grid.lower = Eigen::VectorXd::Constant(1, 0.0);
    grid.upper = Eigen::VectorXd::Constant(1, 6.0);
    grid.points = {20001};
    const Eigen::VectorXd pos_mode = oracle::grid_argmax(
        [&](const Eigen::VectorXd& p) { return marginal_logpdf(gmm, p, 0.0); },
        grid);
    const double d_pos = std::abs(res.point[0] - pos_mode[0]);
    const double d_neg = std::abs(res.point[0] + pos_mode[0]);
    CHECK(std::min(d_pos, d_neg) < 1e-6);
  }
}

TEST_CASE("second-moment identities against monte carlo") {
  RandomSource rng(31);
  const GaussianMixture gmm = ts::random_gmm(rng, 2, 3);
  const double sigma = 0.8;
  const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);
  const Eigen::VectorXd d = denoiser(gmm, x, sigma);
  const Eigen::MatrixXd cov = posterior_cov(gmm, x, sigma);

  const auto mc1 = oracle::mc_conditional_quadratic(
      gmm, x, sigma, 100000, rng, Eigen::MatrixXd::Identity(2, 2));
  CHECK(std::abs(mc1.mean - (cov.trace() + d.squaredNorm())) <= 3.0 * mc1.se);

  Eigen::MatrixXd h(1, 2);
  h << 0.7, -0.4;
  const auto mc2 = oracle::mc_conditional_quadratic(gmm, x, sigma, 100000, rng, h);
  const double ref = (h * cov * h.transpose())(0, 0) + (h * d).squaredNorm();
  CHECK(std::abs(mc2.mean - ref) <= 3.0 * mc2.se);
}

TEST_CASE("denoiser approaches the identity as sigma vanishes") {
  RandomSource rng(32);
  const GaussianMixture gmm = ts::random_gmm(rng, 2, 2);
  std::vector<Eigen::VectorXd> points;
  for (int i = 0; i < 5; ++i) points.push_back(ts::sample_marginal(gmm, 0.0, rng));

  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01}) {
    double eps = 0.0;
    for (const auto& x : points)
      eps = std::max(eps, (denoiser(gmm, x, sigma) - x).norm());
    CHECK(eps < prev);
    prev = eps;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("dimension mismatches are rejected") {
  const GaussianMixture gmm = symmetric_pair(1.0, 1.0);
  CHECK_THROWS_AS(marginal_logpdf(gmm, Eigen::VectorXd::Zero(2), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(score(gmm, Eigen::VectorXd::Zero(2), 0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(denoiser(gmm, Eigen::VectorXd::Zero(2), 0.5),
                  std::invalid_argument);
}
