#include "vml/oracle.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace vml::oracle {

void GridSpec::validate() const {
  const auto d = points.size();
  if (d < 1 || d > 2)
    throw std::invalid_argument("grid: only 1 or 2 dimensions supported");
  if (lower.size() != static_cast<Eigen::Index>(d) ||
      upper.size() != static_cast<Eigen::Index>(d))
    throw std::invalid_argument("grid: bounds/points dimension mismatch");
  long total = 1;
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) ||
        !(lower[i] < upper[i]))
      throw std::invalid_argument("grid: bounds must be finite with lower < upper");
    if (points[i] < 16)
      throw std::invalid_argument("grid: need at least 16 points per dimension");
    total *= points[i];
  }
  if (total > 2'000'000)
    throw std::invalid_argument("grid: more than 2e6 total points");
}

namespace {

// trapezoid weight along one axis
double axis_weight(int i, int npts) { return (i == 0 || i == npts - 1) ? 0.5 : 1.0; }

template <typename Body>
void for_each_grid_point(const GridSpec& grid, Body&& body) {
  const int d = grid.dims();
  Eigen::VectorXd x(d);
  if (d == 1) {
    const double step = (grid.upper[0] - grid.lower[0]) / (grid.points[0] - 1);
    for (int i = 0; i < grid.points[0]; ++i) {
      x[0] = grid.lower[0] + step * i;
      body(x, axis_weight(i, grid.points[0]) * step);
    }
  } else {
    const double step0 = (grid.upper[0] - grid.lower[0]) / (grid.points[0] - 1);
    const double step1 = (grid.upper[1] - grid.lower[1]) / (grid.points[1] - 1);
    for (int i = 0; i < grid.points[0]; ++i) {
      x[0] = grid.lower[0] + step0 * i;
      const double wi = axis_weight(i, grid.points[0]) * step0;
      for (int j = 0; j < grid.points[1]; ++j) {
        x[1] = grid.lower[1] + step1 * j;
        body(x, wi * axis_weight(j, grid.points[1]) * step1);
      }
    }
  }
}

}  // namespace

KlResult kl_numeric(const LogDensity& p_logpdf, const LogDensity& q_logpdf,
                    const GridSpec& grid) {
  grid.validate();
  double mass = 0.0;
  double kl = 0.0;
  for_each_grid_point(grid, [&](const Eigen::VectorXd& x, double w) {
    const double lp = p_logpdf(x);
    const double p = std::exp(lp);
    mass += w * p;
    if (p > 0.0) {
      const double lq = q_logpdf(x);
      kl += w * p * (lp - lq);
    }
  });
  if (mass < 1.0 - 1e-6)
    throw std::invalid_argument("kl_numeric: grid captures less than 1 - 1e-6 of p's mass");
  return {kl, mass};
}

double default_fd_step(const Eigen::VectorXd& x) {
  return 1e-4 * (1.0 + x.cwiseAbs().maxCoeff());
}

Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x,
                                 double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("finite_diff: non-finite evaluation");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

Eigen::MatrixXd finite_diff_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff: h must be positive");
  Eigen::VectorXd probe = x;
  probe[0] = x[0] + h;
  Eigen::VectorXd fp = f(probe);
  Eigen::MatrixXd jac(fp.size(), x.size());
  probe[0] = x[0] - h;
  jac.col(0) = (fp - f(probe)) / (2.0 * h);
  probe[0] = x[0];
  for (Eigen::Index i = 1; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    fp = f(probe);
    probe[i] = x[i] - h;
    jac.col(i) = (fp - f(probe)) / (2.0 * h);
    probe[i] = x[i];
  }
  return jac;
}

namespace {

// Exact sampler from p(x0 | x_t = x): component by responsibility, then the
// per-component conjugate Gaussian posterior. Built from the mixture data
// directly.
class ConditionalSampler {
 public:
  ConditionalSampler(const GaussianMixture& prior, const Eigen::VectorXd& x,
                     double sigma) {
    if (!(sigma > 0.0))
      throw std::invalid_argument("mc_moments: sigma must be positive");
    if (x.size() != prior.dimension())
      throw std::invalid_argument("mc_moments: dimension mismatch");

    const int kc = prior.num_components();
    const Eigen::Index n = x.size();
    const double s2 = sigma * sigma;
    const Eigen::MatrixXd noise = s2 * Eigen::MatrixXd::Identity(n, n);

    Eigen::VectorXd log_terms(kc);
    post_mean_.resize(kc);
    post_chol_.resize(kc);
    for (int k = 0; k < kc; ++k) {
      const Eigen::MatrixXd ck = prior.covariance(k) + noise;
      const Eigen::LLT<Eigen::MatrixXd> llt(ck);
      const Eigen::VectorXd resid = x - prior.mean(k);
      const Eigen::VectorXd z = llt.matrixL().solve(resid);
      double log_det = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) log_det += std::log(llt.matrixL()(i, i));
      log_terms[k] = prior.log_weight(k) - 0.5 * z.squaredNorm() - log_det -
                     0.5 * n * 1.8378770664093454835606594728112;

      post_mean_[k] = prior.mean(k) + prior.covariance(k) * llt.solve(resid);
      Eigen::MatrixXd post_cov = s2 * llt.solve(prior.covariance(k));
      post_cov = 0.5 * (post_cov + post_cov.transpose());
      const Eigen::LLT<Eigen::MatrixXd> post_llt(post_cov);
      if (post_llt.info() != Eigen::Success)
        throw std::runtime_error("mc_moments: conditional covariance not positive definite");
      post_chol_[k] = post_llt.matrixL();
    }
    const double peak = log_terms.maxCoeff();
    Eigen::VectorXd resp = (log_terms.array() - peak).exp().matrix();
    resp /= resp.sum();

    cum_.resize(kc);
    double acc = 0.0;
    for (int k = 0; k < kc; ++k) {
      acc += resp[k];
      cum_[k] = acc;
    }
    cum_[kc - 1] = 1.0;
  }

  Eigen::VectorXd draw(RandomSource& rng) const {
    const double u = rng.uniform();
    int k = 0;
    const int kc = static_cast<int>(cum_.size());
    while (k < kc - 1 && u > cum_[k]) ++k;
    return post_mean_[k] + post_chol_[k] * rng.gaussian_vector(post_mean_[k].size());
  }

 private:
  Eigen::VectorXd cum_;
  std::vector<Eigen::VectorXd> post_mean_;
  std::vector<Eigen::MatrixXd> post_chol_;
};

}  // namespace

McMoments mc_conditional_moments(const GaussianMixture& prior,
                                 const Eigen::VectorXd& x, double sigma,
                                 int num_samples, RandomSource& rng) {
  if (num_samples < 2)
    throw std::invalid_argument("mc_moments: need at least 2 samples");
  const ConditionalSampler sampler(prior, x, sigma);
  const Eigen::Index n = x.size();

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd sum_outer = Eigen::MatrixXd::Zero(n, n);
  double sum_sq = 0.0, sum_sq2 = 0.0;
  for (int s = 0; s < num_samples; ++s) {
    const Eigen::VectorXd draw = sampler.draw(rng);
    sum += draw;
    sum_outer += draw * draw.transpose();
    const double sq = draw.squaredNorm();
    sum_sq += sq;
    sum_sq2 += sq * sq;
  }

  McMoments out;
  out.num_samples = num_samples;
  out.mean = sum / num_samples;
  out.cov = sum_outer / num_samples - out.mean * out.mean.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.se_mean = (out.cov.diagonal().array() / num_samples).sqrt().matrix();
  const double mean_sq = sum_sq / num_samples;
  const double var_sq = sum_sq2 / num_samples - mean_sq * mean_sq;
  out.se_trace = std::sqrt(std::max(var_sq, 0.0) / num_samples);
  return out;
}

McQuadratic mc_conditional_quadratic(const GaussianMixture& prior,
                                     const Eigen::VectorXd& x, double sigma,
                                     int num_samples, RandomSource& rng,
                                     const Eigen::MatrixXd& a) {
  if (num_samples < 2)
    throw std::invalid_argument("mc_moments: need at least 2 samples");
  if (a.cols() != x.size())
    throw std::invalid_argument("mc_moments: map shape mismatch");
  const ConditionalSampler sampler(prior, x, sigma);

  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < num_samples; ++s) {
    const double sq = (a * sampler.draw(rng)).squaredNorm();
    sum += sq;
    sum2 += sq * sq;
  }
  McQuadratic out;
  out.num_samples = num_samples;
  out.mean = sum / num_samples;
  const double var = sum2 / num_samples - out.mean * out.mean;
  out.se = std::sqrt(std::max(var, 0.0) / num_samples);
  return out;
}

namespace {

// single golden-section pass along one axis; returns the input point when no
// strict improvement is found, preserving the grid tie-break
void golden_refine_axis(const ScalarFn& f, Eigen::VectorXd& best, double& best_f,
                        int axis, double half_width) {
  constexpr double kInvPhi = 0.61803398874989484820458683436564;
  double a = best[axis] - half_width;
  double b = best[axis] + half_width;
  Eigen::VectorXd probe = best;

  auto eval = [&](double t) {
    probe[axis] = t;
    return f(probe);
  };

  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  for (int it = 0; it < 80 && (b - a) > 1e-12 * (1.0 + std::abs(best[axis])); ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = eval(d);
    }
  }
  const double t = (fc > fd) ? c : d;
  const double ft = std::max(fc, fd);
  if (ft > best_f) {
    best[axis] = t;
    best_f = ft;
  }
}

}  // namespace

Eigen::VectorXd grid_argmax(const ScalarFn& f, const GridSpec& grid) {
  grid.validate();
  Eigen::VectorXd best;
  double best_f = -std::numeric_limits<double>::infinity();
  for_each_grid_point(grid, [&](const Eigen::VectorXd& x, double) {
    const double fx = f(x);
    if (fx > best_f) {  // strict: ties keep the first grid point
      best_f = fx;
      best = x;
    }
  });

  for (int axis = 0; axis < grid.dims(); ++axis) {
    const double cell =
        (grid.upper[axis] - grid.lower[axis]) / (grid.points[axis] - 1);
    golden_refine_axis(f, best, best_f, axis, cell);
  }
  return best;
}

}  // namespace vml::oracle
