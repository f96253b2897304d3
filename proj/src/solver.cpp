#include "vml/solver.hpp"

#include <cmath>

namespace vml {

std::string to_string(SolverVariant variant) {
  switch (variant) {
    case SolverVariant::plain: return "plain";
    case SolverVariant::preconditioned: return "preconditioned";
    case SolverVariant::latent: return "latent";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  schedule.validate();
  if (num_inner < 1) throw std::invalid_argument("solver: num_inner must be >= 1");
  if (!(gamma0 > 0.0)) throw std::invalid_argument("solver: gamma0 must be positive");
  if (!(sigma_y > 0.0)) throw std::invalid_argument("solver: sigma_y must be positive");
  if (record_every < 1) throw std::invalid_argument("solver: record_every must be >= 1");
}

DivergenceError::DivergenceError(int step, int inner,
                                 const std::string& what_failed)
    : std::runtime_error("solver diverged at step " + std::to_string(step) +
                         (inner >= 0 ? ", inner iteration " + std::to_string(inner)
                                     : std::string()) +
                         ": " + what_failed),
      step_index(step),
      inner_iteration(inner) {}

namespace detail {

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

bool finite(const LossBreakdown& l) {
  return std::isfinite(l.total_full) && std::isfinite(l.total_simplified);
}

}  // namespace

Trajectory run_vml_map(const VmlMapProblem& problem, const SolverConfig& config) {
  config.validate();
  const std::vector<GridPoint> grid = build_edm_grid(config.schedule);
  const double gamma = config.learning_rate();
  RandomSource rng(config.seed);

  Trajectory traj;
  traj.seed = config.seed;

  Eigen::VectorXd x = grid[0].sigma * rng.gaussian_vector(problem.dimension);

  const int n_steps = config.schedule.num_steps;
  for (int i = 0; i < n_steps; ++i) {
    const double sigma = grid[i].sigma;
    double grad_norm = 0.0;
    for (int j = 1; j <= config.num_inner; ++j) {
      const GradBreakdown g = problem.gradient(x, sigma);
      if (!finite(g.total)) throw DivergenceError(i, j, "non-finite gradient");
      x -= gamma * g.total;
      if (!finite(x)) throw DivergenceError(i, j, "non-finite iterate");
      grad_norm = g.total.norm();
    }

    const Eigen::VectorXd denoised = problem.denoise(x, sigma);
    if (!finite(denoised)) throw DivergenceError(i, -1, "non-finite denoiser output");

    if (i % config.record_every == 0 || i == n_steps - 1) {
      StepRecord rec;
      rec.step_index = i;
      rec.sigma = sigma;
      rec.x_after_opt = x;
      rec.denoised = denoised;
      rec.loss = problem.loss_eval(x, sigma);
      if (!finite(rec.loss)) throw DivergenceError(i, -1, "non-finite loss");
      rec.grad_norm = grad_norm;
      traj.steps.push_back(std::move(rec));
    }

    const double sigma_next = grid[i + 1].sigma;
    if (sigma_next == 0.0) {
      x = denoised;  // terminal renoise is a deterministic copy
    } else {
      x = denoised + sigma_next * rng.gaussian_vector(problem.dimension);
    }
  }

  traj.final_x = x;
  return traj;
}

}  // namespace detail

Trajectory solve(const GaussianMixture& prior, const LinearOperator& op,
                 const Eigen::VectorXd& y, const SolverConfig& config) {
  config.validate();
  if (config.variant == SolverVariant::latent)
    throw std::invalid_argument("solver: latent variant is handled by latent_solve");
  if (op.input_dim() != prior.dimension())
    throw std::invalid_argument("solver: operator/prior dimension mismatch");
  if (y.size() != op.output_dim())
    throw std::invalid_argument("solver: measurement dimension mismatch");

  const bool preconditioned = config.variant == SolverVariant::preconditioned;
  detail::VmlMapProblem problem;
  problem.dimension = prior.dimension();
  problem.gradient = [&, preconditioned](const Eigen::VectorXd& x, double sigma) {
    return preconditioned
               ? grad_vml_preconditioned(prior, op, y, config.sigma_y, x, sigma)
               : grad_vml_simplified(prior, op, y, config.sigma_y, x, sigma);
  };
  problem.denoise = [&](const Eigen::VectorXd& x, double sigma) {
    return denoiser(prior, x, sigma);
  };
  problem.loss_eval = [&](const Eigen::VectorXd& x, double sigma) {
    return vml_simplified(prior, op, y, config.sigma_y, x, sigma);
  };
  return detail::run_vml_map(problem, config);
}

Eigen::VectorXd renoise(const Eigen::VectorXd& x_opt, double sigma_next,
                        const GaussianMixture& prior, double sigma_current,
                        RandomSource& rng) {
  if (!(sigma_current > 0.0))
    throw std::invalid_argument("renoise: sigma_current must be positive");
  if (sigma_next < 0.0 || sigma_next >= sigma_current)
    throw std::invalid_argument("renoise: need 0 <= sigma_next < sigma_current");
  const Eigen::VectorXd d = denoiser(prior, x_opt, sigma_current);
  if (sigma_next == 0.0) return d;
  return d + sigma_next * rng.gaussian_vector(d.size());
}

}  // namespace vml
