#pragma once

#include <string>

#include <Eigen/Core>

#include "vml/gmm.hpp"
#include "vml/linear_operator.hpp"
#include "vml/loss.hpp"
#include "vml/solver.hpp"

namespace vml {

enum class DecoderKind { affine, smooth_nonlinear };

std::string to_string(DecoderKind kind);

// Deterministic synthetic decoder x = dec(z) with a closed-form Jacobian.
// The affine kind is x = A z + b with A of full column rank (exactly
// invertible on its range, used by oracles). The smooth_nonlinear kind
// squashes elementwise with scale * tanh(z / scale) before the affine map.
class SyntheticDecoder {
 public:
  static SyntheticDecoder affine(Eigen::MatrixXd a, Eigen::VectorXd b);
  static SyntheticDecoder smooth_nonlinear(Eigen::MatrixXd a, Eigen::VectorXd b,
                                           double scale);
  static SyntheticDecoder identity(int n);

  DecoderKind kind() const { return kind_; }
  int latent_dim() const { return static_cast<int>(a_.cols()); }
  int output_dim() const { return static_cast<int>(a_.rows()); }
  bool is_identity() const { return identity_; }
  double scale() const { return scale_; }
  const Eigen::MatrixXd& matrix() const { return a_; }
  const Eigen::VectorXd& offset() const { return b_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& z) const;
  // affine only; exact on the range of A
  Eigen::VectorXd inverse(const Eigen::VectorXd& x) const;

 private:
  SyntheticDecoder(DecoderKind kind, Eigen::MatrixXd a, Eigen::VectorXd b,
                   double scale);

  DecoderKind kind_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  double scale_ = 0.0;
  bool identity_ = false;
};

// Three-term latent loss: the measurement term is routed through the
// decoder at the denoised latent. With the identity decoder this delegates
// to the pixel-space evaluation (same code path, bitwise equal).
LossBreakdown latent_vml_simplified(const GaussianMixture& prior_z,
                                    const SyntheticDecoder& decoder,
                                    const LinearOperator& op,
                                    const Eigen::VectorXd& y, double sigma_y,
                                    const Eigen::VectorXd& z, double sigma);

// chain-rule gradient using the decoder Jacobian at the denoised latent
GradBreakdown grad_latent_vml_simplified(const GaussianMixture& prior_z,
                                         const SyntheticDecoder& decoder,
                                         const LinearOperator& op,
                                         const Eigen::VectorXd& y, double sigma_y,
                                         const Eigen::VectorXd& z, double sigma);

// Linearized higher-order measurement term Tr{G Cov G^T} / (2 sigma_y^2)
// with G = H A; affine decoders only (the linearization is exact there).
double latent_meas_trace(const GaussianMixture& prior_z,
                         const SyntheticDecoder& decoder,
                         const LinearOperator& op, double sigma_y,
                         const Eigen::VectorXd& z, double sigma);

struct LatentOptions {
  // paste the observed coordinates back into the decoded output;
  // mask operators only
  bool project_measurement = false;
};

struct LatentResult {
  Trajectory trajectory;   // in latent space
  Eigen::VectorXd final_x; // decoder(final_z), optionally projected
};

// Reverse diffusion in latent space with the latent gradient; the decoded
// output is returned alongside the latent trajectory.
LatentResult latent_solve(const GaussianMixture& prior_z,
                          const SyntheticDecoder& decoder,
                          const LinearOperator& op, const Eigen::VectorXd& y,
                          const SolverConfig& config,
                          const LatentOptions& options = {});

}  // namespace vml
