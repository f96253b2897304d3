#include "vml/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>
#include <vector>

#include "vml/checks.hpp"
#include "vml/experiment_config.hpp"
#include "vml/latent.hpp"
#include "vml/prior.hpp"
#include "vml/table_io.hpp"

namespace vml {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve_out_dir(const CliOverrides& overrides,
                            const std::string& config_dir) {
  if (overrides.out_dir) return *overrides.out_dir;
  if (!config_dir.empty()) return config_dir;
  if (const char* env = std::getenv("VML_LAB_OUT")) return env;
  return ".";
}

std::string ensure_dir(const std::string& dir) {
  fs::create_directories(dir);
  return dir;
}

json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Oracle MAP of the measurement posterior, when it is available in closed
// form: always in pixel space; through the exact affine change of variables
// for affine decoders.
std::optional<Eigen::VectorXd> oracle_map_point(const ExperimentConfig& cfg) {
  if (!cfg.decoder) {
    const GaussianMixture post =
        measurement_posterior(cfg.prior, cfg.op, cfg.y, cfg.solver.sigma_y);
    return map_estimate(post, {cfg.y.size() == post.dimension()
                                   ? cfg.y
                                   : post.mean(0)})
        .point;
  }
  if (cfg.decoder->kind() != DecoderKind::affine) return std::nullopt;
  // y = H (A z + b) + eta: condition the latent prior on the composed map
  Eigen::MatrixXd ha(cfg.op.output_dim(), cfg.decoder->latent_dim());
  for (int j = 0; j < cfg.decoder->latent_dim(); ++j)
    ha.col(j) = cfg.op.apply(cfg.decoder->matrix().col(j));
  const Eigen::VectorXd y_eff = cfg.y - cfg.op.apply(cfg.decoder->offset());
  const GaussianMixture post_z = measurement_posterior(
      cfg.prior, LinearOperator::dense(ha), y_eff, cfg.solver.sigma_y);
  const MapResult map_z = map_estimate(post_z, {post_z.mean(0)});
  return cfg.decoder->forward(map_z.point);
}

}  // namespace

int cmd_solve(const std::string& config_path, const CliOverrides& overrides,
              std::ostream& log) {
  std::optional<ExperimentConfig> cfg;
  try {
    cfg = ExperimentConfig::from_file(config_path);
  } catch (const std::exception& e) {
    log << e.what() << "\n";
    return 1;
  }
  if (overrides.seed) cfg->solver.seed = *overrides.seed;

  const std::string out_dir =
      ensure_dir(resolve_out_dir(overrides, cfg->output_dir));
  const std::string stem =
      out_dir + "/" + cfg->run_id + "_" + std::to_string(cfg->solver.seed);

  Trajectory traj;
  Eigen::VectorXd final_x;
  try {
    if (cfg->solver.variant == SolverVariant::latent) {
      LatentOptions options;
      options.project_measurement = cfg->project_measurement;
      LatentResult res =
          latent_solve(cfg->prior, *cfg->decoder, cfg->op, cfg->y, cfg->solver,
                       options);
      traj = std::move(res.trajectory);
      final_x = std::move(res.final_x);
    } else {
      traj = solve(cfg->prior, cfg->op, cfg->y, cfg->solver);
      final_x = traj.final_x;
    }
  } catch (const DivergenceError& e) {
    log << e.what() << "\n";
    return 2;
  }

  write_trajectory_csv(stem + ".csv", traj);
  write_text_file(stem + ".json", trajectory_to_json(traj).dump(2) + "\n");

  json summary;
  summary["run_id"] = cfg->run_id;
  summary["seed"] = cfg->solver.seed;
  summary["variant"] = to_string(cfg->solver.variant);
  summary["sigma_y"] = cfg->solver.sigma_y;
  summary["sigma_y_floored"] = cfg->sigma_y_floored;
  summary["y_synthesized"] = cfg->y_synthesized;
  summary["final_x"] = vector_to_json(final_x);
  if (!traj.steps.empty()) summary["final_loss"] = loss_to_json(traj.steps.back().loss);
  if (cfg->report_oracle_map) {
    if (const auto oracle_x = oracle_map_point(*cfg)) {
      summary["oracle_map"] = vector_to_json(*oracle_x);
      summary["distance_to_oracle_map"] = (final_x - *oracle_x).norm();
    } else {
      summary["oracle_map_skipped"] =
          "no closed-form posterior for this decoder kind";
    }
  }
  write_text_file(stem + "_summary.json", summary.dump(2) + "\n");

  write_text_file(out_dir + "/" + cfg->run_id + "_resolved.json",
                  cfg->resolved_json().dump(2) + "\n");

  log << "wrote " << stem << ".{csv,json} and summary\n";
  return 0;
}

int cmd_check(const std::string& suite, const CliOverrides& overrides,
              std::ostream& log) {
  std::vector<CheckResult> results;
  try {
    results = checks::run_suite(suite);
  } catch (const std::invalid_argument& e) {
    log << e.what() << "\n";
    return 1;
  }

  const std::string out_dir = ensure_dir(resolve_out_dir(overrides, ""));
  write_checks_csv(out_dir + "/checks_" + suite + ".csv", results);

  for (const CheckResult& r : results)
    log << (r.pass ? "PASS " : "FAIL ") << r.name
        << "  measured=" << format_double(r.measured)
        << " tolerance=" << format_double(r.tolerance) << "\n";
  const bool ok = checks::all_passed(results);
  log << (ok ? "all checks passed" : "some checks FAILED") << " ("
      << results.size() << " checks)\n";
  return ok ? 0 : 3;
}

int cmd_densities(const std::string& config_path, const CliOverrides& overrides,
                  std::ostream& log) {
  std::optional<ExperimentConfig> cfg;
  try {
    cfg = ExperimentConfig::from_file(config_path);
  } catch (const std::exception& e) {
    log << e.what() << "\n";
    return 1;
  }
  if (!cfg->densities) {
    log << "config error: densities: missing\n";
    return 1;
  }
  if (cfg->prior.dimension() != 1) {
    log << "config error: densities need a 1-D prior\n";
    return 1;
  }
  for (double s : cfg->densities->sigmas)
    if (!(s > 0.0)) {
      log << "config error: densities.sigmas must be positive\n";
      return 1;
    }

  const std::string out_dir =
      ensure_dir(resolve_out_dir(overrides, cfg->output_dir));
  const DensitySweep& sweep = *cfg->densities;
  const GaussianMixture& prior = cfg->prior;

  std::vector<double> xs(sweep.grid_points);
  for (int i = 0; i < sweep.grid_points; ++i)
    xs[i] = sweep.grid_lower + (sweep.grid_upper - sweep.grid_lower) * i /
                                   (sweep.grid_points - 1);

  struct Job {
    std::size_t sigma_idx;
    int gamma_idx;  // -1: marginal of x_t; else conditional at gammas[gamma_idx]
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < sweep.sigmas.size(); ++i) {
    jobs.push_back({i, -1});
    for (std::size_t g = 0; g < sweep.gammas.size(); ++g)
      jobs.push_back({i, static_cast<int>(g)});
  }

  // each worker owns its output file; densities are evaluated analytically,
  // so outputs do not depend on scheduling
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto work = [&]() {
    Eigen::VectorXd point(1);
    for (std::size_t j = next.fetch_add(1); j < jobs.size();
         j = next.fetch_add(1)) {
      const Job job = jobs[j];
      const double sigma = sweep.sigmas[job.sigma_idx];
      std::vector<double> density(xs.size());
      std::string path;
      try {
        if (job.gamma_idx < 0) {
          // the marginal widens with sigma; stretch its grid so the emitted
          // density still integrates to 1
          std::vector<double> wide(xs.size());
          const double lo = sweep.grid_lower - 6.0 * sigma;
          const double hi = sweep.grid_upper + 6.0 * sigma;
          for (std::size_t i = 0; i < xs.size(); ++i) {
            wide[i] = lo + (hi - lo) * i / (xs.size() - 1);
            point[0] = wide[i];
            density[i] = std::exp(marginal_logpdf(prior, point, sigma));
          }
          path = out_dir + "/" + cfg->run_id + "_marginal_s" +
                 std::to_string(job.sigma_idx) + ".csv";
          write_density_csv(path, wide, density);
          continue;
        } else {
          // p(x0 | x_t = gamma) = exp(log N(gamma; x0, sigma^2)
          //                           + log p0(x0) - log p_sigma(gamma))
          const double gamma = sweep.gammas[job.gamma_idx];
          point[0] = gamma;
          const double log_norm = marginal_logpdf(prior, point, sigma);
          const double log_kernel_const =
              -std::log(sigma) - 0.5 * std::log(6.283185307179586476925286766559);
          for (std::size_t i = 0; i < xs.size(); ++i) {
            point[0] = xs[i];
            const double resid = (gamma - xs[i]) / sigma;
            density[i] = std::exp(marginal_logpdf(prior, point, 0.0) -
                                  0.5 * resid * resid + log_kernel_const -
                                  log_norm);
          }
          path = out_dir + "/" + cfg->run_id + "_conditional_s" +
                 std::to_string(job.sigma_idx) + "_g" +
                 std::to_string(job.gamma_idx) + ".csv";
        }
        write_density_csv(path, xs, density);
      } catch (...) {
        failed = true;
        return;
      }
    }
  };

  const int workers = std::max(1, std::min<int>(overrides.workers,
                                                static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failed) {
    log << "densities: evaluation failed\n";
    return 1;
  }
  log << "wrote " << jobs.size() << " density files to " << out_dir << "\n";
  return 0;
}

int cmd_schedule(const std::string& config_path, std::ostream& out) {
  std::optional<ExperimentConfig> cfg;
  try {
    cfg = ExperimentConfig::from_file(config_path);
  } catch (const std::exception& e) {
    out << e.what() << "\n";
    return 1;
  }
  out << "index,sigma\n";
  for (const GridPoint& p : build_edm_grid(cfg->solver.schedule))
    out << p.index << ',' << format_double(p.sigma) << "\n";
  return 0;
}

}  // namespace vml
