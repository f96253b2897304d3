#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "vml/solver.hpp"

namespace vml {

// CSV cells and summary floats carry 17 significant digits so files
// round-trip doubles exactly.
std::string format_double(double v);

// One row per recorded step; loss terms flattened, then the state and the
// denoised vectors as x_0.., denoised_0..
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

nlohmann::json trajectory_to_json(const Trajectory& traj);

nlohmann::json loss_to_json(const LossBreakdown& loss);

void write_text_file(const std::string& path, const std::string& content);

// rows of (x, density)
void write_density_csv(const std::string& path,
                       const std::vector<double>& xs,
                       const std::vector<double>& densities);

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

void write_checks_csv(const std::string& path,
                      const std::vector<CheckResult>& results);

}  // namespace vml
