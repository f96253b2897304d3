#include "vml/table_io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace vml {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");

  const Eigen::Index n = traj.final_x.size();
  out << "step_index,sigma,grad_norm,neg_log_marginal,tweedie_quad,trace_prior,"
         "meas_consistency,trace_meas,total_full,total_simplified";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x_" << i;
  for (Eigen::Index i = 0; i < n; ++i) out << ",denoised_" << i;
  out << "\n";

  for (const StepRecord& s : traj.steps) {
    out << s.step_index << ',' << format_double(s.sigma) << ','
        << format_double(s.grad_norm) << ','
        << format_double(s.loss.neg_log_marginal) << ','
        << format_double(s.loss.tweedie_quad) << ','
        << format_double(s.loss.trace_prior) << ','
        << format_double(s.loss.meas_consistency) << ','
        << format_double(s.loss.trace_meas) << ','
        << format_double(s.loss.total_full) << ','
        << format_double(s.loss.total_simplified);
    for (Eigen::Index i = 0; i < s.x_after_opt.size(); ++i)
      out << ',' << format_double(s.x_after_opt[i]);
    for (Eigen::Index i = 0; i < s.denoised.size(); ++i)
      out << ',' << format_double(s.denoised[i]);
    out << "\n";
  }
}

nlohmann::json loss_to_json(const LossBreakdown& loss) {
  return {{"neg_log_marginal", loss.neg_log_marginal},
          {"tweedie_quad", loss.tweedie_quad},
          {"trace_prior", loss.trace_prior},
          {"meas_consistency", loss.meas_consistency},
          {"trace_meas", loss.trace_meas},
          {"total_full", loss.total_full},
          {"total_simplified", loss.total_simplified}};
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRecord& s : traj.steps) {
    nlohmann::json rec;
    rec["step_index"] = s.step_index;
    rec["sigma"] = s.sigma;
    rec["grad_norm"] = s.grad_norm;
    rec["loss"] = loss_to_json(s.loss);
    rec["x_after_opt"] = std::vector<double>(
        s.x_after_opt.data(), s.x_after_opt.data() + s.x_after_opt.size());
    rec["denoised"] = std::vector<double>(
        s.denoised.data(), s.denoised.data() + s.denoised.size());
    steps.push_back(std::move(rec));
  }
  nlohmann::json j;
  j["seed"] = traj.seed;
  j["steps"] = std::move(steps);
  j["final_x"] = std::vector<double>(traj.final_x.data(),
                                     traj.final_x.data() + traj.final_x.size());
  return j;
}

void write_density_csv(const std::string& path, const std::vector<double>& xs,
                       const std::vector<double>& densities) {
  if (xs.size() != densities.size())
    throw std::invalid_argument("density csv: column length mismatch");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "x,density\n";
  for (std::size_t i = 0; i < xs.size(); ++i)
    out << format_double(xs[i]) << ',' << format_double(densities[i]) << "\n";
}

void write_checks_csv(const std::string& path,
                      const std::vector<CheckResult>& results) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "check,measured_error,tolerance,pass\n";
  for (const CheckResult& r : results)
    out << r.name << ',' << format_double(r.measured) << ','
        << format_double(r.tolerance) << ',' << (r.pass ? "true" : "false")
        << "\n";
}

}  // namespace vml
