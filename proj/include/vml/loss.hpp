#pragma once

#include <Eigen/Core>

#include "vml/gmm.hpp"
#include "vml/linear_operator.hpp"

namespace vml {

// Per-term decomposition of the mode-seeking loss at one (x, sigma). Both
// totals exclude the additive constant C (see vml_constant); comparisons
// against integration oracles are made on differences or on
// constant-corrected values.
struct LossBreakdown {
  double neg_log_marginal = 0.0;  // -log p(x_t)
  double tweedie_quad = 0.0;      // -||D - x_t||^2 / (2 sigma_t^2)
  double trace_prior = 0.0;       // -Tr{Cov[x0|x_t]} / (2 sigma_t^2)
  double meas_consistency = 0.0;  // ||y - H D||^2 / (2 sigma_y^2)
  double trace_meas = 0.0;        // Tr{H Cov H^T} / (2 sigma_y^2)
  double total_full = 0.0;        // sum of all five terms
  double total_simplified = 0.0;  // without the two trace terms
};

struct GradBreakdown {
  Eigen::VectorXd meas;        // measurement-consistency gradient
  Eigen::VectorXd prior_term;  // prior gradient
  Eigen::VectorXd total;
};

// Full five-term loss (the KL up to the constant C).
LossBreakdown vml_full(const GaussianMixture& prior, const LinearOperator& op,
                       const Eigen::VectorXd& y, double sigma_y,
                       const Eigen::VectorXd& x, double sigma);

// Same evaluation; callers descending this use total_simplified.
LossBreakdown vml_simplified(const GaussianMixture& prior,
                             const LinearOperator& op, const Eigen::VectorXd& y,
                             double sigma_y, const Eigen::VectorXd& x,
                             double sigma);

// The dropped additive constant:
// C = log p(y) - log(sigma^n / sigma_y^m) - ((n - m)/2) log 2 pi.
// C depends on sigma, so totals are only comparable across x at fixed sigma.
double vml_constant(const GaussianMixture& prior, const LinearOperator& op,
                    const Eigen::VectorXd& y, double sigma_y, double sigma);

// -J^T H^T (y - H D)/sigma_y^2 - J^T (D - x)/sigma^2, J the denoiser Jacobian
GradBreakdown grad_vml_simplified(const GaussianMixture& prior,
                                  const LinearOperator& op,
                                  const Eigen::VectorXd& y, double sigma_y,
                                  const Eigen::VectorXd& x, double sigma);

// same with M^-1 applied to both residual terms (M = (I - S^+S) + H^T H)
GradBreakdown grad_vml_preconditioned(const GaussianMixture& prior,
                                      const LinearOperator& op,
                                      const Eigen::VectorXd& y, double sigma_y,
                                      const Eigen::VectorXd& x, double sigma);

// The higher-order terms minus their limit constant (-n/2), evaluated from
// the exact mixture Hessian of log p_sigma:
//   -(sigma^2/2) Tr{Hess} + (sigma^4 / 2 sigma_y^2) Tr{H Hess H^T}
//   + (sigma^2 / 2 sigma_y^2) Tr{H H^T}.
// Converges uniformly to zero on bounded sets as sigma -> 0.
double vml_high_remainder(const GaussianMixture& prior, const LinearOperator& op,
                          double sigma_y, const Eigen::VectorXd& x, double sigma);

struct LimitProbe {
  double full_shifted = 0.0;        // VML(x) + n log sigma, constants included
  double simplified_shifted = 0.0;  // VML_S(x) + n log sigma - n/2
  double target = 0.0;              // -log p0(x|y) - n/2 - (n/2) log 2 pi
};

// Shifted losses and their common small-sigma limit target. Both shifted
// values approach the target pointwise as sigma -> 0, and their difference
// is exactly vml_high_remainder.
LimitProbe vml_limit_probe(const GaussianMixture& prior, const LinearOperator& op,
                           const Eigen::VectorXd& y, double sigma_y,
                           const Eigen::VectorXd& x, double sigma);

}  // namespace vml
