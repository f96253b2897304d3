#pragma once

#include <vector>

#include <Eigen/Core>

#include "vml/gmm.hpp"
#include "vml/linear_operator.hpp"

namespace vml {

// Exact diffusion quantities of a GMM prior under the variance-exploding
// perturbation kernel N(x0, sigma^2 I). The marginal at noise level sigma is
// the mixture with each covariance widened by sigma^2 I; responsibilities
// are evaluated in log space with max subtraction so they stay meaningful
// across the full sigma range (components collapse to near-delta weights at
// small sigma).

// log p_sigma(x); sigma = 0 gives the prior log-density
double marginal_logpdf(const GaussianMixture& prior, const Eigen::VectorXd& x,
                       double sigma);

// gradient of marginal_logpdf in x
Eigen::VectorXd score(const GaussianMixture& prior, const Eigen::VectorXd& x,
                      double sigma);

// Hessian of marginal_logpdf in x
Eigen::MatrixXd marginal_hessian(const GaussianMixture& prior,
                                 const Eigen::VectorXd& x, double sigma);

// E[x0 | x_t = x]; sigma = 0 returns x unchanged
Eigen::VectorXd denoiser(const GaussianMixture& prior, const Eigen::VectorXd& x,
                         double sigma);

// Cov[x0 | x_t = x]; rejects sigma = 0 (the limit is the zero matrix and
// callers needing it use that constant)
Eigen::MatrixXd posterior_cov(const GaussianMixture& prior,
                              const Eigen::VectorXd& x, double sigma);

// posterior_cov / sigma^2, i.e. the Jacobian of the denoiser in x
Eigen::MatrixXd denoiser_jacobian(const GaussianMixture& prior,
                                  const Eigen::VectorXd& x, double sigma);

// log p(y) for y = H x0 + noise, noise ~ N(0, sigma_y^2 I)
double log_evidence(const GaussianMixture& prior, const LinearOperator& op,
                    const Eigen::VectorXd& y, double sigma_y);

// Exact GMM for p(x0 | y): per-component Gaussian conditioning (Joseph-form
// covariance update) with weights reweighted by per-component evidence.
GaussianMixture measurement_posterior(const GaussianMixture& prior,
                                      const LinearOperator& op,
                                      const Eigen::VectorXd& y, double sigma_y);

struct MapResult {
  Eigen::VectorXd point;
  double log_density = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Best local maximizer of the mixture log-density found by multi-start
// Newton ascent with backtracking. Component means are always added as
// starts; in 1-D/2-D a dense grid scan seeds one more. Non-convergence is
// reported in the result, never thrown.
MapResult map_estimate(const GaussianMixture& posterior,
                       const std::vector<Eigen::VectorXd>& starts);

}  // namespace vml
