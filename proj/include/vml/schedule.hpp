#pragma once

#include <vector>

#include <Eigen/Core>

#include "vml/rng.hpp"

namespace vml {

// Variance-exploding noise schedule with the power-warped (EDM-style)
// discretization, parameterized by (sigma_min, sigma_max, rho, num_steps).
struct NoiseSchedule {
  double sigma_min = 0.002;
  double sigma_max = 140.0;
  double rho = 7.0;
  int num_steps = 20;  // N; the grid has N+1 entries, the last at sigma = 0

  void validate() const;
};

struct GridPoint {
  int index;     // 0 = start of reverse diffusion (largest sigma)
  double sigma;  // strictly decreasing; grid[N].sigma == 0
};

// Grid of N+1 sigma levels: entry 0 is exactly sigma_max, entries 1..N-1
// follow sigma_i = (sigma_max^(1/rho) + (i/(N-1)) * (sigma_min^(1/rho) -
// sigma_max^(1/rho)))^rho, entry N is exactly 0.
std::vector<GridPoint> build_edm_grid(const NoiseSchedule& schedule);

// Draws from the perturbation kernel N(x0, sigma^2 I); sigma = 0 returns x0
// unchanged.
Eigen::VectorXd perturb(const Eigen::VectorXd& x0, double sigma,
                        RandomSource& rng);

}  // namespace vml
