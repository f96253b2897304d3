#include "vml/latent.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

#include "vml/prior.hpp"

namespace vml {

std::string to_string(DecoderKind kind) {
  return kind == DecoderKind::affine ? "affine" : "smooth_nonlinear";
}

SyntheticDecoder::SyntheticDecoder(DecoderKind kind, Eigen::MatrixXd a,
                                   Eigen::VectorXd b, double scale)
    : kind_(kind), a_(std::move(a)), b_(std::move(b)), scale_(scale) {
  if (a_.rows() < 1 || a_.cols() < 1)
    throw std::invalid_argument("decoder: empty matrix");
  if (b_.size() != a_.rows())
    throw std::invalid_argument("decoder: offset dimension mismatch");
  if (a_.cols() > a_.rows())
    throw std::invalid_argument("decoder: latent dimension exceeds output dimension");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a_);
  if (qr.rank() < a_.cols())
    throw std::invalid_argument("decoder: matrix must have full column rank");
  if (kind_ == DecoderKind::smooth_nonlinear && !(scale_ > 0.0))
    throw std::invalid_argument("decoder: nonlinearity scale must be positive");

  identity_ = kind_ == DecoderKind::affine && a_.rows() == a_.cols() &&
              a_ == Eigen::MatrixXd::Identity(a_.rows(), a_.cols()) &&
              b_.isZero(0.0);
}

SyntheticDecoder SyntheticDecoder::affine(Eigen::MatrixXd a, Eigen::VectorXd b) {
  return SyntheticDecoder(DecoderKind::affine, std::move(a), std::move(b), 0.0);
}

SyntheticDecoder SyntheticDecoder::smooth_nonlinear(Eigen::MatrixXd a,
                                                    Eigen::VectorXd b,
                                                    double scale) {
  return SyntheticDecoder(DecoderKind::smooth_nonlinear, std::move(a),
                          std::move(b), scale);
}

SyntheticDecoder SyntheticDecoder::identity(int n) {
  return affine(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n));
}

Eigen::VectorXd SyntheticDecoder::forward(const Eigen::VectorXd& z) const {
  if (z.size() != latent_dim())
    throw std::invalid_argument("decoder: latent dimension mismatch");
  if (kind_ == DecoderKind::affine) return a_ * z + b_;
  const Eigen::VectorXd squashed =
      scale_ * (z.array() / scale_).tanh().matrix();
  return a_ * squashed + b_;
}

Eigen::MatrixXd SyntheticDecoder::jacobian(const Eigen::VectorXd& z) const {
  if (z.size() != latent_dim())
    throw std::invalid_argument("decoder: latent dimension mismatch");
  if (kind_ == DecoderKind::affine) return a_;
  // d/dz of scale * tanh(z/scale) is sech^2(z/scale)
  Eigen::VectorXd diag(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double c = std::cosh(z[i] / scale_);
    diag[i] = 1.0 / (c * c);
  }
  return a_ * diag.asDiagonal();
}

Eigen::VectorXd SyntheticDecoder::inverse(const Eigen::VectorXd& x) const {
  if (kind_ != DecoderKind::affine)
    throw std::logic_error("decoder: inverse is available for the affine kind only");
  if (x.size() != output_dim())
    throw std::invalid_argument("decoder: output dimension mismatch");
  return a_.colPivHouseholderQr().solve(x - b_);
}

LossBreakdown latent_vml_simplified(const GaussianMixture& prior_z,
                                    const SyntheticDecoder& decoder,
                                    const LinearOperator& op,
                                    const Eigen::VectorXd& y, double sigma_y,
                                    const Eigen::VectorXd& z, double sigma) {
  if (decoder.is_identity())
    return vml_simplified(prior_z, op, y, sigma_y, z, sigma);

  if (!(sigma > 0.0)) throw std::invalid_argument("latent loss: sigma must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("latent loss: sigma_y must be positive");
  if (z.size() != prior_z.dimension() || decoder.latent_dim() != prior_z.dimension())
    throw std::invalid_argument("latent loss: latent dimension mismatch");
  if (op.input_dim() != decoder.output_dim() || y.size() != op.output_dim())
    throw std::invalid_argument("latent loss: measurement dimension mismatch");

  const Eigen::VectorXd d = denoiser(prior_z, z, sigma);
  LossBreakdown out;
  out.neg_log_marginal = -marginal_logpdf(prior_z, z, sigma);
  out.tweedie_quad = -(d - z).squaredNorm() / (2.0 * sigma * sigma);
  out.meas_consistency =
      (y - op.apply(decoder.forward(d))).squaredNorm() / (2.0 * sigma_y * sigma_y);
  out.total_simplified =
      out.neg_log_marginal + out.tweedie_quad + out.meas_consistency;
  out.total_full = out.total_simplified;  // higher-order terms not tracked here
  return out;
}

GradBreakdown grad_latent_vml_simplified(const GaussianMixture& prior_z,
                                         const SyntheticDecoder& decoder,
                                         const LinearOperator& op,
                                         const Eigen::VectorXd& y, double sigma_y,
                                         const Eigen::VectorXd& z, double sigma) {
  if (decoder.is_identity())
    return grad_vml_simplified(prior_z, op, y, sigma_y, z, sigma);

  if (!(sigma > 0.0)) throw std::invalid_argument("latent loss: sigma must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("latent loss: sigma_y must be positive");
  if (z.size() != prior_z.dimension() || decoder.latent_dim() != prior_z.dimension())
    throw std::invalid_argument("latent loss: latent dimension mismatch");
  if (op.input_dim() != decoder.output_dim() || y.size() != op.output_dim())
    throw std::invalid_argument("latent loss: measurement dimension mismatch");

  const Eigen::VectorXd d = denoiser(prior_z, z, sigma);
  const Eigen::MatrixXd jac = denoiser_jacobian(prior_z, z, sigma);
  const Eigen::MatrixXd dec_jac = decoder.jacobian(d);

  const Eigen::VectorXd resid = y - op.apply(decoder.forward(d));
  const Eigen::VectorXd pulled = dec_jac.transpose() * op.adjoint(resid);

  GradBreakdown out;
  out.meas = -(jac * pulled) / (sigma_y * sigma_y);
  out.prior_term = -(jac * (d - z)) / (sigma * sigma);
  out.total = out.meas + out.prior_term;
  return out;
}

double latent_meas_trace(const GaussianMixture& prior_z,
                         const SyntheticDecoder& decoder,
                         const LinearOperator& op, double sigma_y,
                         const Eigen::VectorXd& z, double sigma) {
  if (decoder.kind() != DecoderKind::affine)
    throw std::logic_error(
        "latent_meas_trace: linearized trace is exact for affine decoders only");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("latent loss: sigma_y must be positive");

  const Eigen::MatrixXd cov = posterior_cov(prior_z, z, sigma);
  Eigen::MatrixXd g(op.output_dim(), decoder.latent_dim());
  for (int j = 0; j < decoder.latent_dim(); ++j)
    g.col(j) = op.apply(decoder.matrix().col(j));
  return (g * cov * g.transpose()).trace() / (2.0 * sigma_y * sigma_y);
}

LatentResult latent_solve(const GaussianMixture& prior_z,
                          const SyntheticDecoder& decoder,
                          const LinearOperator& op, const Eigen::VectorXd& y,
                          const SolverConfig& config,
                          const LatentOptions& options) {
  config.validate();
  if (decoder.latent_dim() != prior_z.dimension())
    throw std::invalid_argument("latent_solve: decoder/prior dimension mismatch");
  if (op.input_dim() != decoder.output_dim())
    throw std::invalid_argument("latent_solve: operator/decoder dimension mismatch");
  if (y.size() != op.output_dim())
    throw std::invalid_argument("latent_solve: measurement dimension mismatch");
  if (options.project_measurement && op.kind() != OperatorKind::mask)
    throw std::invalid_argument(
        "latent_solve: measurement projection is defined for mask operators only");

  detail::VmlMapProblem problem;
  problem.dimension = prior_z.dimension();
  problem.gradient = [&](const Eigen::VectorXd& z, double sigma) {
    return grad_latent_vml_simplified(prior_z, decoder, op, y, config.sigma_y, z,
                                      sigma);
  };
  problem.denoise = [&](const Eigen::VectorXd& z, double sigma) {
    return denoiser(prior_z, z, sigma);
  };
  problem.loss_eval = [&](const Eigen::VectorXd& z, double sigma) {
    return latent_vml_simplified(prior_z, decoder, op, y, config.sigma_y, z,
                                 sigma);
  };

  LatentResult result;
  result.trajectory = detail::run_vml_map(problem, config);
  result.final_x = decoder.forward(result.trajectory.final_x);
  if (options.project_measurement) {
    const std::vector<int> keep = op.mask_kept_indices();
    for (std::size_t j = 0; j < keep.size(); ++j) result.final_x[keep[j]] = y[j];
  }
  return result;
}

}  // namespace vml
