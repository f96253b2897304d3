#include "vml/schedule.hpp"

#include <cmath>
#include <stdexcept>

namespace vml {

void NoiseSchedule::validate() const {
  if (!(sigma_min > 0.0)) throw std::invalid_argument("schedule: sigma_min must be positive");
  if (!(sigma_max > 0.0)) throw std::invalid_argument("schedule: sigma_max must be positive");
  if (!(sigma_min < sigma_max)) throw std::invalid_argument("schedule: sigma_min must be < sigma_max");
  if (!(rho > 0.0)) throw std::invalid_argument("schedule: rho must be positive");
  if (num_steps < 2) throw std::invalid_argument("schedule: num_steps must be >= 2");
}

std::vector<GridPoint> build_edm_grid(const NoiseSchedule& schedule) {
  schedule.validate();
  const int n = schedule.num_steps;
  std::vector<GridPoint> grid;
  grid.reserve(n + 1);

  const double inv_rho = 1.0 / schedule.rho;
  const double hi = std::pow(schedule.sigma_max, inv_rho);
  const double lo = std::pow(schedule.sigma_min, inv_rho);

  grid.push_back({0, schedule.sigma_max});  // endpoint kept exact
  for (int i = 1; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    grid.push_back({i, std::pow(hi + frac * (lo - hi), schedule.rho)});
  }
  grid.push_back({n, 0.0});
  return grid;
}

Eigen::VectorXd perturb(const Eigen::VectorXd& x0, double sigma,
                        RandomSource& rng) {
  if (sigma < 0.0) throw std::invalid_argument("perturb: sigma must be >= 0");
  if (sigma == 0.0) return x0;
  return x0 + sigma * rng.gaussian_vector(x0.size());
}

}  // namespace vml
