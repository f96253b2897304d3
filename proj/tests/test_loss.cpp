#include <doctest.h>

#include <Eigen/LU>

#include "test_support.hpp"
#include "vml/loss.hpp"
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

// normalized log density of p(x0 | x_t) for a 1-D mixture, from the raw
// conjugate formulas
oracle::LogDensity conditional_logpdf_1d(const GaussianMixture& gmm,
                                         double x_t, double sigma) {
  const int kc = gmm.num_components();
  Eigen::VectorXd log_r(kc), m(kc), v(kc);
  for (int k = 0; k < kc; ++k) {
    const double s2k = gmm.covariance(k)(0, 0);
    const double ck = s2k + sigma * sigma;
    const double resid = x_t - gmm.mean(k)[0];
    log_r[k] = std::log(gmm.weight(k)) - 0.5 * resid * resid / ck -
               0.5 * std::log(ck) - 0.5 * ts::kLog2Pi;
    m[k] = gmm.mean(k)[0] + s2k / ck * resid;
    v[k] = sigma * sigma * s2k / ck;
  }
  const double peak = log_r.maxCoeff();
  Eigen::VectorXd r = (log_r.array() - peak).exp().matrix();
  r /= r.sum();
  return [r, m, v, kc](const Eigen::VectorXd& x0) {
    Eigen::VectorXd lt(kc);
    for (int k = 0; k < kc; ++k) {
      const double d = x0[0] - m[k];
      lt[k] = std::log(r[k]) - 0.5 * d * d / v[k] -
              0.5 * std::log(ts::kTwoPi * v[k]);
    }
    const double pk = lt.maxCoeff();
    return pk + std::log((lt.array() - pk).exp().sum());
  };
}

oracle::LogDensity gmm_logpdf_1d(const GaussianMixture& gmm) {
  return [&gmm](const Eigen::VectorXd& x) {
    return ts::ref_gmm_logpdf(gmm, x, 0.0);
  };
}

}  // namespace

TEST_CASE("breakdown totals are consistent") {
  RandomSource rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 2);
    const LinearOperator op = LinearOperator::identity(n);
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, 1.0, rng);
    const LossBreakdown l = vml_full(gmm, op, y, 0.5, x, 1.0);
    CHECK(l.total_full == doctest::Approx(l.neg_log_marginal + l.tweedie_quad +
                                          l.trace_prior + l.meas_consistency +
                                          l.trace_meas)
                              .epsilon(1e-15));
    CHECK(l.total_full - l.total_simplified ==
          doctest::Approx(l.trace_prior + l.trace_meas).epsilon(1e-12));
  }
}

TEST_CASE("full loss plus constant equals the gaussian kl closed form") {
  RandomSource rng(52);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1);
    const LinearOperator op = LinearOperator::identity(n);
    const double sigma = ts::log_uniform(rng, 0.2, 3.0);
    const double sigma_y = 0.5;
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

    const double total = vml_full(gmm, op, y, sigma_y, x, sigma).total_full +
                         vml_constant(gmm, op, y, sigma_y, sigma);

    const ts::ConjugatePosterior cond =
        ts::ref_conditional(gmm.mean(0), gmm.covariance(0), x, sigma);
    const ts::ConjugatePosterior post =
        ts::ref_conditional(gmm.mean(0), gmm.covariance(0), y, sigma_y);
    const double kl = ts::ref_gaussian_kl(cond.mean, cond.cov, post.mean, post.cov);
    CHECK(total == doctest::Approx(kl).epsilon(1e-8));
  }
}

TEST_CASE("full loss matches the numerically integrated kl on 1-d mixtures") {
  RandomSource rng(53);
  oracle::GridSpec grid;
  grid.lower = Eigen::VectorXd::Constant(1, -40.0);
  grid.upper = Eigen::VectorXd::Constant(1, 40.0);
  grid.points = {200001};

  for (int trial = 0; trial < 5; ++trial) {
    const GaussianMixture gmm = ts::random_gmm(rng, 1, 1 + trial % 3);
    const LinearOperator op = LinearOperator::identity(1);
    const double sigma = ts::log_uniform(rng, 0.3, 2.0);
    const double sigma_y = 0.4 + 0.4 * rng.uniform();
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd xa = ts::sample_marginal(gmm, sigma, rng);
    const Eigen::VectorXd xb = ts::sample_marginal(gmm, sigma, rng);

    const GaussianMixture post = measurement_posterior(gmm, op, y, sigma_y);
    const auto q = gmm_logpdf_1d(post);

    // absolute comparison through the constant
    const double kla =
        oracle::kl_numeric(conditional_logpdf_1d(gmm, xa[0], sigma), q, grid).value;
    const double va = vml_full(gmm, op, y, sigma_y, xa, sigma).total_full +
                      vml_constant(gmm, op, y, sigma_y, sigma);
    CHECK(va == doctest::Approx(kla).epsilon(1e-4));

    // constant-free comparison on differences
    const double klb =
        oracle::kl_numeric(conditional_logpdf_1d(gmm, xb[0], sigma), q, grid).value;
    const double vb = vml_full(gmm, op, y, sigma_y, xb, sigma).total_full;
    const double va_raw = vml_full(gmm, op, y, sigma_y, xa, sigma).total_full;
    CHECK(std::abs((va_raw - vb) - (kla - klb)) < 1e-4);
  }
}

TEST_CASE("measurement term vanishes for an uninformative likelihood") {
  const GaussianMixture gmm = GaussianMixture::single(
      Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  const LinearOperator op = LinearOperator::identity(2);
  Eigen::VectorXd y(2), x(2);
  y << 0.5, -0.5;
  x << 1.0, 2.0;
  const LossBreakdown l = vml_simplified(gmm, op, y, 1e6, x, 0.7);
  CHECK(l.meas_consistency < 1e-6 * std::abs(l.neg_log_marginal));
}

TEST_CASE("simplified loss is minimized near the informative measurement") {
  const GaussianMixture gmm = symmetric_pair(2.5, 1.0);
  const LinearOperator op = LinearOperator::identity(1);
  Eigen::VectorXd y(1);
  y << 2.5;
  const double sigma = 0.01, sigma_y = 1e-3;

  double best_x = 0.0, best_v = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 4000; ++i) {
    Eigen::VectorXd x(1);
    x << -4.0 + 8.0 * i / 4000.0;
    const double v = vml_simplified(gmm, op, y, sigma_y, x, sigma).total_simplified;
    if (v < best_v) {
      best_v = v;
      best_x = x[0];
    }
  }
  CHECK(std::abs(best_x - 2.5) < 0.05);
}

TEST_CASE("gradient matches finite differences") {
  RandomSource rng(54);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = std::vector<int>{1, 2, 8}[trial % 3];
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1 + trial % 3);
    const LinearOperator op =
        trial % 2 == 0 ? LinearOperator::identity(n)
                       : LinearOperator::dense(Eigen::MatrixXd::NullaryExpr(
                             std::max(1, n / 2), n,
                             [&](Eigen::Index, Eigen::Index) {
                               return rng.gaussian();
                             }));
    const double sigma = ts::log_uniform(rng, 0.05, 10.0);
    const double sigma_y = 0.2 + rng.uniform();
    const Eigen::VectorXd y = op.apply(ts::sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

    const GradBreakdown g = grad_vml_simplified(gmm, op, y, sigma_y, x, sigma);
    CHECK(g.total == g.meas + g.prior_term);

    const Eigen::VectorXd fd = oracle::finite_diff_grad(
        [&](const Eigen::VectorXd& p) {
          return vml_simplified(gmm, op, y, sigma_y, p, sigma).total_simplified;
        },
        x, oracle::default_fd_step(x));
    CHECK((g.total - fd).norm() / (fd.norm() + 1e-12) < 1e-5);
  }
}

TEST_CASE("gradient vanishes at an exactly consistent fixed point") {
  const GaussianMixture gmm = GaussianMixture::single(
      Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
  const LinearOperator op = LinearOperator::mask(3, {0, 2});
  const double sigma = 0.9;
  const Eigen::VectorXd x = gmm.mean(0);  // D(mu, sigma) = mu
  const Eigen::VectorXd y = op.apply(denoiser(gmm, x, sigma));
  CHECK(grad_vml_simplified(gmm, op, y, 0.3, x, sigma).total.norm() < 1e-10);
}

TEST_CASE("gradient matches the conjugate closed form for one gaussian") {
  RandomSource rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1);
    const LinearOperator op = LinearOperator::identity(n);
    const double sigma = ts::log_uniform(rng, 0.1, 5.0);
    const double sigma_y = 0.4;
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

    const Eigen::MatrixXd c = gmm.covariance(0) +
                              sigma * sigma * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    const Eigen::VectorXd d =
        gmm.mean(0) + gmm.covariance(0) * llt.solve(x - gmm.mean(0));
    const Eigen::MatrixXd jac = llt.solve(gmm.covariance(0)).transpose();
    const Eigen::VectorXd expected = -jac * (y - d) / (sigma_y * sigma_y) -
                                     jac * (d - x) / (sigma * sigma);
    CHECK((grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total - expected)
              .norm() < 1e-10);
  }
}

TEST_CASE("preconditioned gradient: mask and identity reduce to plain") {
  RandomSource rng(56);
  const GaussianMixture gmm = ts::random_gmm(rng, 4, 2);
  const double sigma = 0.7, sigma_y = 0.3;
  const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

  {
    const LinearOperator op = LinearOperator::mask(4, {0, 3});
    const Eigen::VectorXd y = op.apply(ts::sample_marginal(gmm, 0.0, rng));
    const GradBreakdown a = grad_vml_simplified(gmm, op, y, sigma_y, x, sigma);
    const GradBreakdown b = grad_vml_preconditioned(gmm, op, y, sigma_y, x, sigma);
    CHECK(a.total == b.total);  // bitwise
    CHECK(a.meas == b.meas);
    CHECK(a.prior_term == b.prior_term);
  }
  {
    const LinearOperator op = LinearOperator::identity(4);
    const Eigen::VectorXd y = op.apply(ts::sample_marginal(gmm, 0.0, rng));
    CHECK(grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total ==
          grad_vml_preconditioned(gmm, op, y, sigma_y, x, sigma).total);
  }
}

TEST_CASE("preconditioned gradient equals the explicit similarity transform") {
  RandomSource rng(57);
  for (const int n : {2, 4, 8, 16, 32}) {
    const GaussianMixture gmm = ts::random_gmm(rng, n, 2);
    const Eigen::MatrixXd h = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
    const LinearOperator op = LinearOperator::dense(h);
    const double sigma = 0.8, sigma_y = 0.5;
    const Eigen::VectorXd y = op.apply(ts::sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

    const Eigen::MatrixXd jac = denoiser_jacobian(gmm, x, sigma);
    Eigen::MatrixXd sps = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < op.singular_values().size(); ++i)
      if (op.singular_values()[i] > 0.0)
        sps += op.right_factor().col(i) * op.right_factor().col(i).transpose();
    const Eigen::MatrixXd m =
        (Eigen::MatrixXd::Identity(n, n) - sps) + h.transpose() * h;
    const Eigen::MatrixXd p = jac * m.inverse() * jac.inverse();

    const Eigen::VectorXd plain =
        grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total;
    const Eigen::VectorXd pre =
        grad_vml_preconditioned(gmm, op, y, sigma_y, x, sigma).total;
    CHECK((pre - p * plain).norm() / (pre.norm() + 1e-12) < 1e-8);
  }
}

TEST_CASE("higher-order remainder: trace identity and decay") {
  RandomSource rng(58);
  const double sigma_y = 1.0;

  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = ts::random_gmm(rng, n, 1 + trial % 3);
    const LinearOperator op = LinearOperator::identity(n);
    const double sigma = ts::log_uniform(rng, 0.05, 5.0);
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, sigma, rng);

    const LossBreakdown full = vml_full(gmm, op, y, sigma_y, x, sigma);
    const double via_traces = full.trace_prior + full.trace_meas + 0.5 * n;
    CHECK(vml_high_remainder(gmm, op, sigma_y, x, sigma) ==
          doctest::Approx(via_traces).epsilon(1e-10));
  }

  // decay along the sigma sweep
  const GaussianMixture gmm = ts::random_gmm(rng, 2, 2);
  const LinearOperator op = LinearOperator::identity(2);
  std::vector<Eigen::VectorXd> points;
  for (int i = 0; i < 6; ++i) points.push_back(ts::sample_marginal(gmm, 0.0, rng));
  double prev = std::numeric_limits<double>::infinity();
  double sup = 0.0;
  for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003}) {
    sup = 0.0;
    for (const auto& x : points)
      sup = std::max(sup, std::abs(vml_high_remainder(gmm, op, sigma_y, x, sigma)));
    CHECK(sup < prev);
    prev = sup;
  }
  CHECK(sup < 1e-3);
}

TEST_CASE("higher-order remainder closed form for the zero operator") {
  const int n = 3;
  const double s = 0.9;
  const GaussianMixture gmm = GaussianMixture::single(
      Eigen::VectorXd::Zero(n), s * s * Eigen::MatrixXd::Identity(n, n));
  const LinearOperator op = LinearOperator::dense(Eigen::MatrixXd::Zero(n, n));
  RandomSource rng(59);
  for (double sigma : {0.1, 0.5, 2.0}) {
    const Eigen::VectorXd x = rng.gaussian_vector(n);
    const double expected = 0.5 * sigma * sigma * n / (s * s + sigma * sigma);
    CHECK(vml_high_remainder(gmm, op, 1.0, x, sigma) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("limit probe: both shifted losses approach the posterior potential") {
  RandomSource rng(60);
  for (int trial = 0; trial < 3; ++trial) {
    const GaussianMixture gmm = ts::random_gmm(rng, 1, 2);
    const LinearOperator op = LinearOperator::identity(1);
    const double sigma_y = 0.25;
    const Eigen::VectorXd y = ts::sample_marginal(gmm, 0.0, rng);
    const Eigen::VectorXd x = ts::sample_marginal(gmm, 0.0, rng);

    double err_first = 0.0, err_full = 0.0, err_simpl = 0.0, gap = 0.0;
    for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001}) {
      const LimitProbe probe = vml_limit_probe(gmm, op, y, sigma_y, x, sigma);
      err_full = std::abs(probe.full_shifted - probe.target);
      err_simpl = std::abs(probe.simplified_shifted - probe.target);
      gap = std::abs(probe.full_shifted - probe.simplified_shifted);
      if (sigma == 1.0) err_first = err_full;

      // the gap between the shifted forms is exactly the remainder
      CHECK(gap == doctest::Approx(std::abs(vml_high_remainder(
                                       gmm, op, sigma_y, x, sigma)))
                       .epsilon(1e-9));
    }
    CHECK(err_full < 1e-2);
    CHECK(err_full < err_first);
    CHECK(err_simpl < 1e-2);
    CHECK(gap < 1e-3);
  }
}

TEST_CASE("loss input validation") {
  const GaussianMixture gmm = symmetric_pair(1.0, 1.0);
  const LinearOperator op = LinearOperator::identity(1);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(vml_full(gmm, op, y, 0.5, x, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(vml_full(gmm, op, y, 0.0, x, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(vml_full(gmm, op, Eigen::VectorXd::Zero(2), 0.5, x, 0.5),
                  std::invalid_argument);
}
