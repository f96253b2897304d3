#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vml/gmm.hpp"
#include "vml/latent.hpp"
#include "vml/linear_operator.hpp"
#include "vml/solver.hpp"

namespace vml {

// Raised with a field-level message when a config fails validation.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DensitySweep {
  std::vector<double> sigmas;
  std::vector<double> gammas;  // conditioning points
  double grid_lower = -8.0;
  double grid_upper = 8.0;
  int grid_points = 4001;
};

// Declarative experiment description. Exactly one of {explicit y, synthesis
// spec} may be present; synthesis draws y = H x* + sigma_y * eps from the
// stated seed at ingestion, so a resolved config always carries an explicit
// y. sigma_y = 0 is floored to 1e-9.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;
  static constexpr double kSigmaYFloor = 1e-9;

  ExperimentConfig(GaussianMixture prior_in, LinearOperator op_in)
      : prior(std::move(prior_in)), op(std::move(op_in)) {}

  std::string run_id;
  std::string output_dir;  // may be empty; resolution order: --out, this, $VML_LAB_OUT, "."

  GaussianMixture prior;  // latent-space prior when the variant is latent
  LinearOperator op;
  Eigen::VectorXd y;
  bool sigma_y_floored = false;
  bool y_synthesized = false;

  SolverConfig solver;
  bool report_oracle_map = false;

  std::optional<SyntheticDecoder> decoder;  // required iff variant == latent
  bool project_measurement = false;

  std::optional<DensitySweep> densities;

  nlohmann::json source_json;  // the ingested document, kept for echoing

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);

  // The source document with synthesis resolved to an explicit y, the
  // sigma_y floor applied, and the effective seed written back. Everything
  // else is echoed verbatim so re-ingesting reproduces the run bit for bit.
  nlohmann::json resolved_json() const;
};

}  // namespace vml
