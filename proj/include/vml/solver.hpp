#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "vml/gmm.hpp"
#include "vml/linear_operator.hpp"
#include "vml/loss.hpp"
#include "vml/prior.hpp"
#include "vml/rng.hpp"
#include "vml/schedule.hpp"

namespace vml {

enum class SolverVariant { plain, preconditioned, latent };

std::string to_string(SolverVariant variant);

struct SolverConfig {
  NoiseSchedule schedule;
  int num_inner = 50;      // K gradient steps per noise level
  double gamma0 = 1.0;     // effective learning rate is gamma0 * sigma_y^2
  double sigma_y = 1e-9;   // configs with sigma_y = 0 are floored at ingestion
  SolverVariant variant = SolverVariant::plain;
  std::uint64_t seed = 0;
  int record_every = 1;

  double learning_rate() const { return gamma0 * sigma_y * sigma_y; }
  void validate() const;
};

struct StepRecord {
  int step_index = 0;
  double sigma = 0.0;
  Eigen::VectorXd x_after_opt;
  Eigen::VectorXd denoised;
  LossBreakdown loss;
  double grad_norm = 0.0;
};

struct Trajectory {
  std::vector<StepRecord> steps;  // strictly decreasing sigma order
  Eigen::VectorXd final_x;        // last denoised output, sigma = 0 renoise
  std::uint64_t seed = 0;
};

// Non-finite loss or gradient aborts the run with the offending location.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int step, int inner, const std::string& what_failed);
  int step_index;
  int inner_iteration;  // -1 when the failure is outside the inner loop
};

// K inner gradient-descent iterations on the simplified loss at each grid
// level, then Gaussian renoising to the next level; the terminal level has
// sigma = 0 and copies the denoiser output.
Trajectory solve(const GaussianMixture& prior, const LinearOperator& op,
                 const Eigen::VectorXd& y, const SolverConfig& config);

// denoiser(prior, x_opt, sigma_current) + sigma_next * eps
Eigen::VectorXd renoise(const Eigen::VectorXd& x_opt, double sigma_next,
                        const GaussianMixture& prior, double sigma_current,
                        RandomSource& rng);

namespace detail {

// Shared reverse-diffusion driver: both the pixel and the latent solvers
// route through this, so the identity-decoder reduction is the same code
// path rather than a numerically equivalent one.
struct VmlMapProblem {
  int dimension = 0;
  std::function<GradBreakdown(const Eigen::VectorXd&, double)> gradient;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> denoise;
  std::function<LossBreakdown(const Eigen::VectorXd&, double)> loss_eval;
};

Trajectory run_vml_map(const VmlMapProblem& problem, const SolverConfig& config);

}  // namespace detail

}  // namespace vml
