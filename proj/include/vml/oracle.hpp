#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "vml/gmm.hpp"
#include "vml/rng.hpp"

namespace vml::oracle {

// Brute-force verifiers. Everything here is implemented against the raw
// mixture data, never by calling the analytic modules it is used to check;
// the build carries a dependency-direction test enforcing that.

struct GridSpec {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<int> points;  // per dimension, >= 16; <= 2 dims; <= 2e6 total

  void validate() const;
  int dims() const { return static_cast<int>(points.size()); }
};

using LogDensity = std::function<double(const Eigen::VectorXd&)>;
using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

struct KlResult {
  double value = 0.0;
  double mass_p = 0.0;  // trapezoid integral of p over the grid
};

// Trapezoid-rule estimate of KL(p || q) for normalized log densities.
// Rejects grids capturing less than 1 - 1e-6 of p's mass.
KlResult kl_numeric(const LogDensity& p_logpdf, const LogDensity& q_logpdf,
                    const GridSpec& grid);

// central differences (f(x + h e_i) - f(x - h e_i)) / 2h
Eigen::VectorXd finite_diff_grad(const ScalarFn& f, const Eigen::VectorXd& x,
                                 double h);

// central-difference Jacobian of a vector-valued map
Eigen::MatrixXd finite_diff_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h);

// default step 1e-4 * (1 + max|x_i|)
double default_fd_step(const Eigen::VectorXd& x);

struct McMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::VectorXd se_mean;   // per-coordinate standard error of the mean
  double se_trace = 0.0;     // standard error of the second-moment trace
  int num_samples = 0;
};

// Empirical moments of p(x0 | x_t = x) via the exact two-stage sampler:
// component by responsibility, then the per-component Gaussian posterior.
McMoments mc_conditional_moments(const GaussianMixture& prior,
                                 const Eigen::VectorXd& x, double sigma,
                                 int num_samples, RandomSource& rng);

struct McQuadratic {
  double mean = 0.0;  // estimate of the integral of ||A x0||^2 p(x0|x_t)
  double se = 0.0;
  int num_samples = 0;
};

// Monte-Carlo second moment of A x0 under p(x0 | x_t = x), same sampler.
McQuadratic mc_conditional_quadratic(const GaussianMixture& prior,
                                     const Eigen::VectorXd& x, double sigma,
                                     int num_samples, RandomSource& rng,
                                     const Eigen::MatrixXd& a);

// grid point maximizing f, refined by one golden-section pass per axis;
// ties break to the first (lexicographically smallest) grid index
Eigen::VectorXd grid_argmax(const ScalarFn& f, const GridSpec& grid);

}  // namespace vml::oracle
