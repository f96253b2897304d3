#include "vml/checks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "vml/loss.hpp"
#include "vml/oracle.hpp"
#include "vml/prior.hpp"
#include "vml/rng.hpp"
#include "vml/solver.hpp"

namespace vml::checks {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

GaussianMixture random_gmm(RandomSource& rng, int n, int kc) {
  Eigen::VectorXd w(kc);
  for (int k = 0; k < kc; ++k) w[k] = 0.2 + rng.uniform();
  w /= w.sum();
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (int k = 0; k < kc; ++k) {
    means.push_back(3.0 * rng.gaussian_vector(n));
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
    covs.push_back(a * a.transpose() / n + 0.3 * Eigen::MatrixXd::Identity(n, n));
  }
  return GaussianMixture(w, std::move(means), std::move(covs));
}

// a marginal draw: component by weight, then mean + L z + sigma-level noise
Eigen::VectorXd sample_marginal(const GaussianMixture& gmm, double sigma,
                                RandomSource& rng) {
  const double u = rng.uniform();
  int k = 0;
  double acc = 0.0;
  for (; k < gmm.num_components() - 1; ++k) {
    acc += gmm.weight(k);
    if (u <= acc) break;
  }
  const Eigen::Index n = gmm.dimension();
  Eigen::VectorXd x =
      gmm.mean(k) + gmm.cholesky(k).matrixL() * rng.gaussian_vector(n);
  if (sigma > 0.0) x += sigma * rng.gaussian_vector(n);
  return x;
}

double log_uniform(RandomSource& rng, double lo, double hi) {
  return std::exp(std::log(lo) + rng.uniform() * (std::log(hi) - std::log(lo)));
}

LinearOperator random_operator(RandomSource& rng, int n) {
  const double pick = rng.uniform();
  if (pick < 0.34) {
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (rng.uniform() < 0.6 || (i == n - 1 && keep.empty())) keep.push_back(i);
    return LinearOperator::mask(n, keep);
  }
  if (pick < 0.67) {
    const int m = 1 + static_cast<int>(rng.uniform() * n);
    const Eigen::MatrixXd h = Eigen::MatrixXd::NullaryExpr(
        m, n, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
    return LinearOperator::dense(h);
  }
  if (n % 2 == 0) return LinearOperator::block_average(n, 2);
  return LinearOperator::identity(n);
}

double rel_err(double diff, double scale) { return diff / (scale + 1e-12); }

// KL(N(mu0, cov0) || N(mu1, cov1)), the closed form used as a check-side
// reference
double gaussian_kl(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& cov0,
                   const Eigen::VectorXd& mu1, const Eigen::MatrixXd& cov1) {
  const Eigen::Index n = mu0.size();
  const Eigen::LLT<Eigen::MatrixXd> llt1(cov1);
  const Eigen::MatrixXd inv1 = llt1.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::VectorXd dmu = mu1 - mu0;
  const Eigen::MatrixXd l0 = Eigen::LLT<Eigen::MatrixXd>(cov0).matrixL();
  const Eigen::MatrixXd l1 = llt1.matrixL();
  const double log_det0 = 2.0 * l0.diagonal().array().log().sum();
  const double log_det1 = 2.0 * l1.diagonal().array().log().sum();
  return 0.5 * ((inv1 * cov0).trace() + dmu.dot(inv1 * dmu) - n + log_det1 -
                log_det0);
}

// exact 1-D density of p(x0 | x_t = gamma) as a log callback, built from the
// conjugate formulas independently of the prior module
oracle::LogDensity conditional_1d_logpdf(const GaussianMixture& gmm,
                                         double gamma, double sigma) {
  const int kc = gmm.num_components();
  Eigen::VectorXd log_r(kc), m(kc), v(kc);
  for (int k = 0; k < kc; ++k) {
    const double s2k = gmm.covariance(k)(0, 0);
    const double ck = s2k + sigma * sigma;
    const double resid = gamma - gmm.mean(k)[0];
    log_r[k] = gmm.log_weight(k) - 0.5 * resid * resid / ck -
               0.5 * std::log(ck) - 0.5 * kLog2Pi;
    m[k] = gmm.mean(k)[0] + s2k / ck * resid;
    v[k] = sigma * sigma * s2k / ck;
  }
  const double peak = log_r.maxCoeff();
  Eigen::VectorXd r = (log_r.array() - peak).exp().matrix();
  r /= r.sum();
  return [r, m, v, kc](const Eigen::VectorXd& x) {
    Eigen::VectorXd lt(kc);
    for (int k = 0; k < kc; ++k) {
      const double d = x[0] - m[k];
      lt[k] = std::log(r[k]) - 0.5 * d * d / v[k] -
              0.5 * std::log(6.283185307179586476925286766559 * v[k]);
    }
    const double pk = lt.maxCoeff();
    return pk + std::log((lt.array() - pk).exp().sum());
  };
}

oracle::LogDensity gmm_1d_logpdf(const GaussianMixture& gmm) {
  const int kc = gmm.num_components();
  Eigen::VectorXd w(kc), m(kc), v(kc);
  for (int k = 0; k < kc; ++k) {
    w[k] = gmm.weight(k);
    m[k] = gmm.mean(k)[0];
    v[k] = gmm.covariance(k)(0, 0);
  }
  return [w, m, v, kc](const Eigen::VectorXd& x) {
    Eigen::VectorXd lt(kc);
    for (int k = 0; k < kc; ++k) {
      const double d = x[0] - m[k];
      lt[k] = std::log(w[k]) - 0.5 * d * d / v[k] -
              0.5 * std::log(6.283185307179586476925286766559 * v[k]);
    }
    const double pk = lt.maxCoeff();
    return pk + std::log((lt.array() - pk).exp().sum());
  };
}

// ---------------------------------------------------------------- identities

void check_tweedie(std::vector<CheckResult>& out) {
  RandomSource rng(101);
  double worst_identity = 0.0;
  double worst_fd = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::vector<int>{1, 2, 8}[trial % 3];
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 4);
    const double sigma = log_uniform(rng, 1e-3, 140.0);
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const Eigen::VectorXd d = denoiser(gmm, x, sigma);
    const Eigen::VectorXd s = score(gmm, x, sigma);
    worst_identity =
        std::max(worst_identity, (d - (x + sigma * sigma * s)).norm());

    const double h = std::min(6e-6 * (1.0 + x.cwiseAbs().maxCoeff()),
                              std::max(sigma / 10.0, 1e-6));
    const Eigen::VectorXd fd = oracle::finite_diff_grad(
        [&](const Eigen::VectorXd& p) { return marginal_logpdf(gmm, p, sigma); },
        x, h);
    worst_fd = std::max(worst_fd, rel_err((s - fd).norm(), fd.norm()));
  }
  out.push_back({"tweedie_identity", worst_identity, 1e-10,
                 worst_identity < 1e-10});
  out.push_back({"score_finite_difference", worst_fd, 1e-6, worst_fd < 1e-6});
}

void check_covariance(std::vector<CheckResult>& out) {
  RandomSource rng(102);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = std::vector<int>{1, 2, 8}[trial % 3];
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 3);
    const double sigma = log_uniform(rng, 0.05, 20.0);
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const Eigen::MatrixXd cov = posterior_cov(gmm, x, sigma);
    const Eigen::MatrixXd fd_jac = oracle::finite_diff_jacobian(
        [&](const Eigen::VectorXd& p) { return denoiser(gmm, p, sigma); }, x,
        oracle::default_fd_step(x));
    worst = std::max(
        worst, rel_err((cov - sigma * sigma * fd_jac).norm(), cov.norm()));
  }
  out.push_back({"covariance_identity", worst, 1e-5, worst < 1e-5});
}

void check_lemmas(std::vector<CheckResult>& out) {
  RandomSource rng(103);
  double worst1 = 0.0, worst2 = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = std::vector<int>{1, 2, 4}[trial % 3];
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 3);
    const double sigma = log_uniform(rng, 0.2, 5.0);
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);
    const LinearOperator op = random_operator(rng, n);

    const Eigen::VectorXd d = denoiser(gmm, x, sigma);
    const Eigen::MatrixXd cov = posterior_cov(gmm, x, sigma);
    const Eigen::MatrixXd h = op.to_dense();

    const auto mc1 = oracle::mc_conditional_quadratic(
        gmm, x, sigma, 100000, rng, Eigen::MatrixXd::Identity(n, n));
    const double ref1 = cov.trace() + d.squaredNorm();
    worst1 = std::max(worst1, std::abs(mc1.mean - ref1) / (3.0 * mc1.se));

    const auto mc2 =
        oracle::mc_conditional_quadratic(gmm, x, sigma, 100000, rng, h);
    const double ref2 = (h * cov * h.transpose()).trace() +
                        (h * d).squaredNorm();
    if (mc2.se > 0.0)
      worst2 = std::max(worst2, std::abs(mc2.mean - ref2) / (3.0 * mc2.se));
  }
  out.push_back({"second_moment_identity", worst1, 1.0, worst1 <= 1.0});
  out.push_back({"projected_second_moment_identity", worst2, 1.0, worst2 <= 1.0});
}

void check_posterior_weights(std::vector<CheckResult>& out) {
  RandomSource rng(104);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 4);
    const LinearOperator op = random_operator(rng, n);
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const GaussianMixture post = measurement_posterior(gmm, op, y, 0.3);
    worst = std::max(worst, std::abs(post.weights().sum() - 1.0));
  }
  out.push_back({"posterior_weights_sum", worst, 1e-12, worst <= 1e-12});
}

void check_denoiser_limit(std::vector<CheckResult>& out) {
  RandomSource rng(105);
  const GaussianMixture gmm = random_gmm(rng, 2, 3);
  std::vector<Eigen::VectorXd> points;
  for (int i = 0; i < 6; ++i) points.push_back(sample_marginal(gmm, 0.0, rng));

  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  double eps = 0.0;
  for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003}) {
    eps = 0.0;
    for (const auto& x : points)
      eps = std::max(eps, (denoiser(gmm, x, sigma) - x).norm());
    if (eps > prev) monotone = false;
    prev = eps;
  }
  out.push_back({"denoiser_limit_vanishing", eps, 1e-4, monotone && eps < 1e-4});
}

void check_kl_oracle(std::vector<CheckResult>& out) {
  RandomSource rng(106);

  // single Gaussian, H = I: the constant-corrected total matches the
  // Gaussian-Gaussian KL closed form
  double worst_gauss = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = random_gmm(rng, n, 1);
    const LinearOperator op = LinearOperator::identity(n);
    const double sigma = log_uniform(rng, 0.2, 3.0);
    const double sigma_y = 0.5;
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const double total =
        vml_full(gmm, op, y, sigma_y, x, sigma).total_full +
        vml_constant(gmm, op, y, sigma_y, sigma);

    const double s2 = sigma * sigma;
    const Eigen::MatrixXd c =
        gmm.covariance(0) + s2 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    const Eigen::VectorXd m0 =
        gmm.mean(0) + gmm.covariance(0) * llt.solve(x - gmm.mean(0));
    const Eigen::MatrixXd cov0 = s2 * llt.solve(gmm.covariance(0));
    const GaussianMixture post = measurement_posterior(gmm, op, y, sigma_y);
    worst_gauss = std::max(
        worst_gauss, std::abs(total - gaussian_kl(m0, 0.5 * (cov0 + cov0.transpose()),
                                                  post.mean(0), post.covariance(0))));
  }
  out.push_back({"vml_full_gaussian_kl", worst_gauss, 1e-8, worst_gauss < 1e-8});

  // 1-D GMM: differences of the full loss match trapezoid KL differences
  double worst_pair = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const GaussianMixture gmm = random_gmm(rng, 1, 1 + trial % 3);
    const LinearOperator op = LinearOperator::identity(1);
    const double sigma = log_uniform(rng, 0.3, 2.0);
    const double sigma_y = 0.4 + 0.4 * rng.uniform();
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd xa = sample_marginal(gmm, sigma, rng);
    const Eigen::VectorXd xb = sample_marginal(gmm, sigma, rng);

    const GaussianMixture post = measurement_posterior(gmm, op, y, sigma_y);
    const auto q = gmm_1d_logpdf(post);

    oracle::GridSpec grid;
    grid.lower = Eigen::VectorXd::Constant(1, -40.0);
    grid.upper = Eigen::VectorXd::Constant(1, 40.0);
    grid.points = {20001};

    const double kla = oracle::kl_numeric(conditional_1d_logpdf(gmm, xa[0], sigma), q, grid).value;
    const double klb = oracle::kl_numeric(conditional_1d_logpdf(gmm, xb[0], sigma), q, grid).value;
    const double va = vml_full(gmm, op, y, sigma_y, xa, sigma).total_full;
    const double vb = vml_full(gmm, op, y, sigma_y, xb, sigma).total_full;
    worst_pair = std::max(worst_pair, std::abs((va - vb) - (kla - klb)));
  }
  out.push_back({"vml_full_kl_differences", worst_pair, 1e-4, worst_pair < 1e-4});
}

// ---------------------------------------------------------------- gradients

void check_gradients(std::vector<CheckResult>& out) {
  RandomSource rng(201);
  double worst_fd = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = std::vector<int>{1, 2, 8}[trial % 3];
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 3);
    const LinearOperator op = random_operator(rng, n);
    const double sigma = log_uniform(rng, 0.05, 10.0);
    const double sigma_y = 0.2 + rng.uniform();
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const Eigen::VectorXd g = grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total;
    const Eigen::VectorXd fd = oracle::finite_diff_grad(
        [&](const Eigen::VectorXd& p) {
          return vml_simplified(gmm, op, y, sigma_y, p, sigma).total_simplified;
        },
        x, oracle::default_fd_step(x));
    worst_fd = std::max(worst_fd, rel_err((g - fd).norm(), fd.norm()));
  }
  out.push_back({"gradient_finite_difference", worst_fd, 1e-5, worst_fd < 1e-5});

  // fixed point: x at the prior mean with an exact measurement
  double worst_fp = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = random_gmm(rng, n, 1);
    const LinearOperator op = random_operator(rng, n);
    const double sigma = log_uniform(rng, 0.1, 5.0);
    const Eigen::VectorXd x = gmm.mean(0);
    const Eigen::VectorXd y = op.apply(denoiser(gmm, x, sigma));
    worst_fp = std::max(
        worst_fp, grad_vml_simplified(gmm, op, y, 0.5, x, sigma).total.norm());
  }
  out.push_back({"gradient_fixed_point", worst_fp, 1e-10, worst_fp < 1e-10});

  // closed-form conjugate expansion for a single Gaussian
  double worst_cf = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 1 + trial % 3;
    const GaussianMixture gmm = random_gmm(rng, n, 1);
    const LinearOperator op = random_operator(rng, n);
    const double sigma = log_uniform(rng, 0.1, 5.0);
    const double sigma_y = 0.3;
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const double s2 = sigma * sigma;
    const Eigen::MatrixXd c =
        gmm.covariance(0) + s2 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::LLT<Eigen::MatrixXd> llt(c);
    const Eigen::VectorXd d =
        gmm.mean(0) + gmm.covariance(0) * llt.solve(x - gmm.mean(0));
    const Eigen::MatrixXd jac = llt.solve(gmm.covariance(0)).transpose();
    const Eigen::VectorXd expected =
        -jac * op.adjoint(y - op.apply(d)) / (sigma_y * sigma_y) -
        jac * (d - x) / s2;
    const Eigen::VectorXd got =
        grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total;
    worst_cf = std::max(worst_cf, (got - expected).norm());
  }
  out.push_back({"gradient_gaussian_closed_form", worst_cf, 1e-10, worst_cf < 1e-10});
}

void check_preconditioner(std::vector<CheckResult>& out) {
  RandomSource rng(202);

  // mask operators: preconditioned equals plain, bit for bit
  double worst_mask = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 3);
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
      if (rng.uniform() < 0.5 || (i == n - 1 && keep.empty())) keep.push_back(i);
    const LinearOperator op = LinearOperator::mask(n, keep);
    const double sigma = log_uniform(rng, 0.05, 10.0);
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const Eigen::VectorXd plain = grad_vml_simplified(gmm, op, y, 0.4, x, sigma).total;
    const Eigen::VectorXd pre = grad_vml_preconditioned(gmm, op, y, 0.4, x, sigma).total;
    worst_mask = std::max(worst_mask, (plain - pre).cwiseAbs().maxCoeff());
  }
  out.push_back({"preconditioner_mask_bitwise", worst_mask, 0.0, worst_mask == 0.0});

  // dense operators: the factored form equals the explicit similarity transform
  double worst_dense = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = std::vector<int>{2, 4, 8, 16, 32}[trial % 5];
    const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 2);
    const Eigen::MatrixXd h = Eigen::MatrixXd::NullaryExpr(
        n, n, [&](Eigen::Index, Eigen::Index) { return rng.gaussian(); });
    const LinearOperator op = LinearOperator::dense(h);
    const double sigma = log_uniform(rng, 0.1, 3.0);
    const double sigma_y = 0.5;
    const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
    const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

    const Eigen::MatrixXd jac = denoiser_jacobian(gmm, x, sigma);
    Eigen::MatrixXd sps = Eigen::MatrixXd::Zero(n, n);  // S^+ S in the V basis
    for (Eigen::Index i = 0; i < op.singular_values().size(); ++i)
      if (op.singular_values()[i] > 0.0)
        sps += op.right_factor().col(i) * op.right_factor().col(i).transpose();
    const Eigen::MatrixXd m =
        (Eigen::MatrixXd::Identity(n, n) - sps) + h.transpose() * h;
    const Eigen::MatrixXd p = jac * m.inverse() * jac.inverse();

    const Eigen::VectorXd plain = grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total;
    const Eigen::VectorXd pre = grad_vml_preconditioned(gmm, op, y, sigma_y, x, sigma).total;
    worst_dense = std::max(
        worst_dense, rel_err((pre - p * plain).norm(), pre.norm()));
  }
  out.push_back({"preconditioner_explicit_p", worst_dense, 1e-8, worst_dense < 1e-8});

  // both gradient norms vanish together at a stationary point
  double worst_fp = 0.0;
  {
    const GaussianMixture gmm = random_gmm(rng, 2, 1);
    const LinearOperator op = LinearOperator::identity(2);
    const double sigma = 0.5, sigma_y = 0.3;
    const Eigen::VectorXd y = op.apply(gmm.mean(0));
    Eigen::VectorXd x = gmm.mean(0) + 0.5 * rng.gaussian_vector(2);
    for (int it = 0; it < 4000; ++it)
      x -= 0.05 * grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total;
    worst_fp = std::max(grad_vml_simplified(gmm, op, y, sigma_y, x, sigma).total.norm(),
                        grad_vml_preconditioned(gmm, op, y, sigma_y, x, sigma).total.norm());
  }
  out.push_back({"preconditioner_stationarity", worst_fp, 1e-8, worst_fp < 1e-8});
}

// ------------------------------------------------------------------- limits

void check_limits(std::vector<CheckResult>& out) {
  RandomSource rng(301);

  // the higher-order remainder decays uniformly on a bounded sample
  {
    const GaussianMixture gmm = random_gmm(rng, 2, 3);
    const LinearOperator op = random_operator(rng, 2);
    const double sigma_y = 1.0;
    std::vector<Eigen::VectorXd> points;
    for (int i = 0; i < 8; ++i) points.push_back(sample_marginal(gmm, 0.0, rng));

    double prev = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double sup = 0.0;
    for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003}) {
      sup = 0.0;
      for (const auto& x : points)
        sup = std::max(sup, std::abs(vml_high_remainder(gmm, op, sigma_y, x, sigma)));
      if (sup > prev) monotone = false;
      prev = sup;
    }
    out.push_back({"high_remainder_decay", sup, 1e-3, monotone && sup < 1e-3});
  }

  // remainder equals the covariance-trace form plus n/2
  {
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 1 + trial % 3;
      const GaussianMixture gmm = random_gmm(rng, n, 1 + trial % 3);
      const LinearOperator op = random_operator(rng, n);
      const double sigma = log_uniform(rng, 0.05, 5.0);
      const double sigma_y = 0.7;
      const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
      const Eigen::VectorXd x = sample_marginal(gmm, sigma, rng);

      const LossBreakdown full = vml_full(gmm, op, y, sigma_y, x, sigma);
      const double via_traces = full.trace_prior + full.trace_meas + 0.5 * n;
      worst = std::max(worst, std::abs(vml_high_remainder(gmm, op, sigma_y, x, sigma) -
                                       via_traces));
    }
    out.push_back({"high_remainder_trace_identity", worst, 1e-10, worst < 1e-10});
  }

  // zero operator, single Gaussian: scalar closed form
  {
    RandomSource local(303);
    const int n = 3;
    const double s = 0.9;
    const GaussianMixture gmm = GaussianMixture::single(
        Eigen::VectorXd::Zero(n), s * s * Eigen::MatrixXd::Identity(n, n));
    const LinearOperator op = LinearOperator::dense(Eigen::MatrixXd::Zero(n, n));
    double worst = 0.0;
    for (double sigma : {0.1, 0.5, 2.0}) {
      const Eigen::VectorXd x = local.gaussian_vector(n);
      const double expected = 0.5 * sigma * sigma * n / (s * s + sigma * sigma);
      worst = std::max(worst, std::abs(vml_high_remainder(gmm, op, 1.0, x, sigma) -
                                       expected));
    }
    out.push_back({"high_remainder_zero_operator", worst, 1e-10, worst < 1e-10});
  }

  // Props. 4-5: shifted losses approach the posterior potential
  {
    double worst_full = 0.0, worst_simplified = 0.0, worst_gap = 0.0;
    bool decreasing = true;
    for (int trial = 0; trial < 3; ++trial) {
      const GaussianMixture gmm = random_gmm(rng, 1, 2 + trial % 2);
      const LinearOperator op = LinearOperator::identity(1);
      const double sigma_y = 0.25;
      const Eigen::VectorXd y = op.apply(sample_marginal(gmm, 0.0, rng));
      const Eigen::VectorXd x = sample_marginal(gmm, 0.0, rng);

      double err_first = 0.0, err_last = 0.0;
      for (double sigma : {1.0, 0.3, 0.1, 0.03, 0.01, 0.003, 0.001}) {
        const LimitProbe probe = vml_limit_probe(gmm, op, y, sigma_y, x, sigma);
        err_last = std::abs(probe.full_shifted - probe.target);
        if (sigma == 1.0) err_first = err_last;
        if (sigma == 0.001) {
          worst_full = std::max(worst_full, err_last);
          worst_simplified = std::max(
              worst_simplified, std::abs(probe.simplified_shifted - probe.target));
          worst_gap = std::max(
              worst_gap, std::abs(probe.full_shifted - probe.simplified_shifted));
        }
      }
      if (err_last >= err_first) decreasing = false;
    }
    out.push_back({"full_loss_small_sigma_limit", worst_full, 1e-2,
                   decreasing && worst_full < 1e-2});
    out.push_back({"simplified_loss_small_sigma_limit", worst_simplified, 1e-2,
                   worst_simplified < 1e-2});
    out.push_back({"full_simplified_gap_vanishes", worst_gap, 1e-3, worst_gap < 1e-3});
  }
}

}  // namespace

std::vector<CheckResult> run_suite(const std::string& suite) {
  std::vector<CheckResult> out;
  const bool all = suite == "all";
  if (suite == "identities" || all) {
    check_tweedie(out);
    check_covariance(out);
    check_lemmas(out);
    check_posterior_weights(out);
    check_denoiser_limit(out);
    check_kl_oracle(out);
  }
  if (suite == "gradients" || all) {
    check_gradients(out);
    check_preconditioner(out);
  }
  if (suite == "limits" || all) {
    check_limits(out);
  }
  if (out.empty())
    throw std::invalid_argument("unknown check suite '" + suite +
                                "' (expected identities, gradients, limits, or all)");
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.pass; });
}

}  // namespace vml::checks
