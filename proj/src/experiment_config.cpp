#include "vml/experiment_config.hpp"

#include <fstream>

#include "vml/rng.hpp"

namespace vml {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& msg) {
  throw ConfigError("config error: " + field + ": " + msg);
}

const json& require(const json& j, const std::string& field,
                    const std::string& context) {
  if (!j.contains(field)) fail(context + field, "missing");
  return j.at(field);
}

double require_number(const json& j, const std::string& field,
                      const std::string& context) {
  const json& v = require(j, field, context);
  if (!v.is_number()) fail(context + field, "must be a number");
  return v.get<double>();
}

Eigen::VectorXd parse_vector(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "must be an array of numbers");
  Eigen::VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(field, "must be an array of numbers");
    out[i] = j[i].get<double>();
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const json& j, const std::string& field) {
  if (!j.is_array() || j.empty()) fail(field, "must be a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  if (cols == 0) fail(field, "rows must be non-empty arrays");
  Eigen::MatrixXd out(j.size(), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      fail(field, "rows must all have the same length");
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = j[r][c].get<double>();
  }
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

GaussianMixture parse_prior(const json& j, const std::string& context) {
  const Eigen::VectorXd weights =
      parse_vector(require(j, "weights", context), context + "weights");
  const json& jm = require(j, "means", context);
  const json& jc = require(j, "covariances", context);
  if (!jm.is_array() || !jc.is_array()) fail(context, "means/covariances must be arrays");
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  for (std::size_t k = 0; k < jm.size(); ++k)
    means.push_back(parse_vector(jm[k], context + "means[" + std::to_string(k) + "]"));
  for (std::size_t k = 0; k < jc.size(); ++k)
    covs.push_back(parse_matrix(jc[k], context + "covariances[" + std::to_string(k) + "]"));
  try {
    return GaussianMixture(weights, std::move(means), std::move(covs));
  } catch (const std::exception& e) {
    fail(context.substr(0, context.size() - 1), e.what());
  }
}

LinearOperator parse_operator(const json& j) {
  const std::string context = "operator.";
  const json& jk = require(j, "kind", context);
  if (!jk.is_string()) fail("operator.kind", "must be a string");
  const std::string kind = jk.get<std::string>();

  auto build = [&]() -> LinearOperator {
    if (kind == "mask") {
      const int n = static_cast<int>(require_number(j, "n", context));
      const json& jkeep = require(j, "keep", context);
      if (!jkeep.is_array()) fail("operator.keep", "must be an array of indices");
      std::vector<int> keep;
      for (const auto& v : jkeep) keep.push_back(v.get<int>());
      return LinearOperator::mask(n, keep);
    }
    if (kind == "block_average") {
      const int n = static_cast<int>(require_number(j, "n", context));
      const int block = static_cast<int>(require_number(j, "block", context));
      return LinearOperator::block_average(n, block);
    }
    if (kind == "separable_blur") {
      const int rows = static_cast<int>(require_number(j, "rows", context));
      const int cols = static_cast<int>(require_number(j, "cols", context));
      const int width = static_cast<int>(require_number(j, "width", context));
      return LinearOperator::separable_blur(rows, cols, width);
    }
    if (kind == "dense")
      return LinearOperator::dense(parse_matrix(require(j, "matrix", context),
                                                "operator.matrix"));
    fail("operator.kind", "unknown kind '" + kind + "'");
  };

  try {
    LinearOperator op = build();
    if (j.contains("threshold"))
      return op.threshold_singulars(require_number(j, "threshold", context));
    return op;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail("operator", e.what());
  }
}

SyntheticDecoder parse_decoder(const json& j) {
  const std::string context = "latent.decoder.";
  const std::string kind = require(j, "kind", context).get<std::string>();
  const Eigen::MatrixXd a =
      parse_matrix(require(j, "matrix", context), context + "matrix");
  const Eigen::VectorXd b =
      parse_vector(require(j, "offset", context), context + "offset");
  try {
    if (kind == "affine") return SyntheticDecoder::affine(a, b);
    if (kind == "smooth_nonlinear")
      return SyntheticDecoder::smooth_nonlinear(
          a, b, require_number(j, "scale", context));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail("latent.decoder", e.what());
  }
  fail("latent.decoder.kind", "unknown kind '" + kind + "'");
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (require(j, "schema_version", "").get<int>() != kSchemaVersion)
    fail("schema_version", "unsupported version");

  ExperimentConfig cfg(parse_prior(require(j, "prior", ""), "prior."),
                       parse_operator(require(j, "operator", "")));

  cfg.run_id = require(j, "run_id", "").get<std::string>();
  if (cfg.run_id.empty()) fail("run_id", "must be non-empty");
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  const json& jsched = require(j, "schedule", "");
  cfg.solver.schedule.sigma_min = require_number(jsched, "sigma_min", "schedule.");
  cfg.solver.schedule.sigma_max = require_number(jsched, "sigma_max", "schedule.");
  cfg.solver.schedule.rho = require_number(jsched, "rho", "schedule.");
  cfg.solver.schedule.num_steps =
      static_cast<int>(require_number(jsched, "num_steps", "schedule."));
  try {
    cfg.solver.schedule.validate();
  } catch (const std::exception& e) {
    fail("schedule", e.what());
  }

  const json& jsolver = require(j, "solver", "");
  cfg.solver.num_inner = static_cast<int>(require_number(jsolver, "num_inner", "solver."));
  cfg.solver.gamma0 = require_number(jsolver, "gamma0", "solver.");
  cfg.solver.record_every = jsolver.value("record_every", 1);
  cfg.solver.seed = jsolver.value("seed", 0ULL);
  cfg.report_oracle_map = jsolver.value("oracle_map", false);
  const std::string variant = jsolver.value("variant", std::string("plain"));
  if (variant == "plain") cfg.solver.variant = SolverVariant::plain;
  else if (variant == "preconditioned") cfg.solver.variant = SolverVariant::preconditioned;
  else if (variant == "latent") cfg.solver.variant = SolverVariant::latent;
  else fail("solver.variant", "must be plain, preconditioned, or latent");

  const json& jmeas = require(j, "measurement", "");
  double sigma_y = require_number(jmeas, "sigma_y", "measurement.");
  if (sigma_y < 0.0) fail("measurement.sigma_y", "must be nonnegative");
  if (sigma_y < kSigmaYFloor) {
    sigma_y = kSigmaYFloor;
    cfg.sigma_y_floored = true;
  }
  cfg.solver.sigma_y = sigma_y;

  const bool has_y = jmeas.contains("y");
  const bool has_synth = jmeas.contains("synthesize");
  if (has_y == has_synth)
    fail("measurement", "exactly one of 'y' and 'synthesize' must be present");
  if (has_y) {
    cfg.y = parse_vector(jmeas.at("y"), "measurement.y");
  } else {
    const json& js = jmeas.at("synthesize");
    const Eigen::VectorXd x_star =
        parse_vector(require(js, "x_star", "measurement.synthesize."),
                     "measurement.synthesize.x_star");
    if (x_star.size() != cfg.op.input_dim())
      fail("measurement.synthesize.x_star", "dimension does not match the operator input");
    const auto seed = static_cast<std::uint64_t>(
        require_number(js, "seed", "measurement.synthesize."));
    RandomSource rng(seed);
    cfg.y = cfg.op.apply(x_star) + sigma_y * rng.gaussian_vector(cfg.op.output_dim());
    cfg.y_synthesized = true;
  }

  if (cfg.solver.variant == SolverVariant::latent) {
    const json& jlat = require(j, "latent", "");
    cfg.decoder = parse_decoder(require(jlat, "decoder", "latent."));
    cfg.project_measurement = jlat.value("project_measurement", false);
  } else if (j.contains("latent")) {
    fail("latent", "present but solver.variant is not 'latent'");
  }

  if (j.contains("densities")) {
    const json& jd = j.at("densities");
    DensitySweep sweep;
    for (const auto& v : require(jd, "sigmas", "densities."))
      sweep.sigmas.push_back(v.get<double>());
    for (const auto& v : require(jd, "gammas", "densities."))
      sweep.gammas.push_back(v.get<double>());
    if (jd.contains("grid")) {
      const json& jg = jd.at("grid");
      sweep.grid_lower = require_number(jg, "lower", "densities.grid.");
      sweep.grid_upper = require_number(jg, "upper", "densities.grid.");
      sweep.grid_points =
          static_cast<int>(require_number(jg, "points", "densities.grid."));
    }
    if (sweep.sigmas.empty()) fail("densities.sigmas", "must be non-empty");
    if (!(sweep.grid_lower < sweep.grid_upper))
      fail("densities.grid", "lower must be < upper");
    if (sweep.grid_points < 16) fail("densities.grid.points", "need at least 16");
    cfg.densities = std::move(sweep);
  }

  // cross-field dimension checks, before any compute happens
  const int state_dim = cfg.decoder ? cfg.decoder->output_dim() : cfg.prior.dimension();
  if (cfg.op.input_dim() != state_dim)
    fail("operator", "input dimension " + std::to_string(cfg.op.input_dim()) +
                         " does not match the state dimension " +
                         std::to_string(state_dim));
  if (cfg.y.size() != cfg.op.output_dim())
    fail("measurement.y", "dimension " + std::to_string(cfg.y.size()) +
                              " does not match the operator output " +
                              std::to_string(cfg.op.output_dim()));
  if (cfg.decoder && cfg.decoder->latent_dim() != cfg.prior.dimension())
    fail("latent.decoder", "latent dimension does not match the prior");
  try {
    cfg.solver.validate();
  } catch (const std::exception& e) {
    fail("solver", e.what());
  }
  cfg.source_json = j;
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config error: invalid JSON in '" + path + "': " + e.what());
  }
  return from_json(j);
}

nlohmann::json ExperimentConfig::resolved_json() const {
  json j = source_json;
  j["measurement"].erase("synthesize");
  j["measurement"]["y"] = vector_to_json(y);
  j["measurement"]["sigma_y"] = solver.sigma_y;
  j["solver"]["seed"] = solver.seed;
  j["solver"]["variant"] = to_string(solver.variant);
  j["solver"]["record_every"] = solver.record_every;
  j["solver"]["oracle_map"] = report_oracle_map;
  return j;
}

}  // namespace vml
