#include "vml/loss.hpp"

#include <cmath>
#include <stdexcept>

#include "vml/prior.hpp"

namespace vml {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_inputs(const GaussianMixture& prior, const LinearOperator& op,
                  const Eigen::VectorXd& y, double sigma_y,
                  const Eigen::VectorXd& x, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("loss: sigma must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("loss: sigma_y must be positive");
  if (x.size() != prior.dimension() || op.input_dim() != prior.dimension())
    throw std::invalid_argument("loss: state dimension mismatch");
  if (y.size() != op.output_dim())
    throw std::invalid_argument("loss: measurement dimension mismatch");
}

// Tr{H A H^T} through the SVD: sum_i s_i^2 (V^T A V)_ii
double trace_h_a_ht(const LinearOperator& op, const Eigen::MatrixXd& a) {
  const Eigen::VectorXd& s = op.singular_values();
  double tr = 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] == 0.0) continue;
    const Eigen::VectorXd vi = op.right_factor().col(i);
    tr += s[i] * s[i] * vi.dot(a * vi);
  }
  return tr;
}

}  // namespace

LossBreakdown vml_full(const GaussianMixture& prior, const LinearOperator& op,
                       const Eigen::VectorXd& y, double sigma_y,
                       const Eigen::VectorXd& x, double sigma) {
  check_inputs(prior, op, y, sigma_y, x, sigma);
  const double s2 = sigma * sigma;
  const double sy2 = sigma_y * sigma_y;

  const Eigen::VectorXd d = denoiser(prior, x, sigma);
  const Eigen::MatrixXd cov = posterior_cov(prior, x, sigma);

  LossBreakdown out;
  out.neg_log_marginal = -marginal_logpdf(prior, x, sigma);
  out.tweedie_quad = -(d - x).squaredNorm() / (2.0 * s2);
  out.trace_prior = -cov.trace() / (2.0 * s2);
  out.meas_consistency = (y - op.apply(d)).squaredNorm() / (2.0 * sy2);
  out.trace_meas = trace_h_a_ht(op, cov) / (2.0 * sy2);
  out.total_full = out.neg_log_marginal + out.tweedie_quad + out.trace_prior +
                   out.meas_consistency + out.trace_meas;
  out.total_simplified =
      out.neg_log_marginal + out.tweedie_quad + out.meas_consistency;
  return out;
}

LossBreakdown vml_simplified(const GaussianMixture& prior,
                             const LinearOperator& op, const Eigen::VectorXd& y,
                             double sigma_y, const Eigen::VectorXd& x,
                             double sigma) {
  return vml_full(prior, op, y, sigma_y, x, sigma);
}

double vml_constant(const GaussianMixture& prior, const LinearOperator& op,
                    const Eigen::VectorXd& y, double sigma_y, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("loss: sigma must be positive");
  const double n = prior.dimension();
  const double m = op.output_dim();
  return log_evidence(prior, op, y, sigma_y) - n * std::log(sigma) +
         m * std::log(sigma_y) - 0.5 * (n - m) * kLog2Pi;
}

GradBreakdown grad_vml_simplified(const GaussianMixture& prior,
                                  const LinearOperator& op,
                                  const Eigen::VectorXd& y, double sigma_y,
                                  const Eigen::VectorXd& x, double sigma) {
  check_inputs(prior, op, y, sigma_y, x, sigma);
  const Eigen::VectorXd d = denoiser(prior, x, sigma);
  const Eigen::MatrixXd jac = denoiser_jacobian(prior, x, sigma);

  const Eigen::VectorXd resid_meas = op.adjoint(y - op.apply(d));
  const Eigen::VectorXd resid_prior = d - x;

  GradBreakdown out;
  out.meas = -(jac * resid_meas) / (sigma_y * sigma_y);
  out.prior_term = -(jac * resid_prior) / (sigma * sigma);
  out.total = out.meas + out.prior_term;
  return out;
}

GradBreakdown grad_vml_preconditioned(const GaussianMixture& prior,
                                      const LinearOperator& op,
                                      const Eigen::VectorXd& y, double sigma_y,
                                      const Eigen::VectorXd& x, double sigma) {
  check_inputs(prior, op, y, sigma_y, x, sigma);
  const Eigen::VectorXd d = denoiser(prior, x, sigma);
  const Eigen::MatrixXd jac = denoiser_jacobian(prior, x, sigma);

  const Eigen::VectorXd resid_meas =
      op.preconditioner_solve(op.adjoint(y - op.apply(d)));
  const Eigen::VectorXd resid_prior = op.preconditioner_solve(d - x);

  GradBreakdown out;
  out.meas = -(jac * resid_meas) / (sigma_y * sigma_y);
  out.prior_term = -(jac * resid_prior) / (sigma * sigma);
  out.total = out.meas + out.prior_term;
  return out;
}

double vml_high_remainder(const GaussianMixture& prior, const LinearOperator& op,
                          double sigma_y, const Eigen::VectorXd& x, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("loss: sigma must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("loss: sigma_y must be positive");
  if (x.size() != prior.dimension() || op.input_dim() != prior.dimension())
    throw std::invalid_argument("loss: state dimension mismatch");

  const double s2 = sigma * sigma;
  const double sy2 = sigma_y * sigma_y;
  const Eigen::MatrixXd hess = marginal_hessian(prior, x, sigma);
  const double trace_hht = op.singular_values().squaredNorm();
  return -0.5 * s2 * hess.trace() +
         0.5 * s2 * s2 / sy2 * trace_h_a_ht(op, hess) +
         0.5 * s2 / sy2 * trace_hht;
}

LimitProbe vml_limit_probe(const GaussianMixture& prior, const LinearOperator& op,
                           const Eigen::VectorXd& y, double sigma_y,
                           const Eigen::VectorXd& x, double sigma) {
  check_inputs(prior, op, y, sigma_y, x, sigma);
  const double n = prior.dimension();
  const double m = op.output_dim();
  const double s2 = sigma * sigma;

  const Eigen::VectorXd sc = score(prior, x, sigma);
  const Eigen::VectorXd d = denoiser(prior, x, sigma);
  const double meas = (y - op.apply(d)).squaredNorm() / (2.0 * sigma_y * sigma_y);
  const double log_py = log_evidence(prior, op, y, sigma_y);

  // constants of the score/Hessian reformulation with the n log sigma shift
  // already cancelled
  const double c_simplified = m * std::log(sigma_y) - 0.5 * (n - m) * kLog2Pi;

  LimitProbe out;
  out.simplified_shifted = -marginal_logpdf(prior, x, sigma) -
                           0.5 * s2 * sc.squaredNorm() + meas + log_py +
                           c_simplified - 0.5 * n;
  out.full_shifted =
      out.simplified_shifted + vml_high_remainder(prior, op, sigma_y, x, sigma);

  const GaussianMixture posterior = measurement_posterior(prior, op, y, sigma_y);
  out.target = -marginal_logpdf(posterior, x, 0.0) - 0.5 * n - 0.5 * n * kLog2Pi;
  return out;
}

}  // namespace vml
