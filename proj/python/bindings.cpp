#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vml/latent.hpp"
#include "vml/linear_operator.hpp"
#include "vml/loss.hpp"
#include "vml/prior.hpp"
#include "vml/schedule.hpp"
#include "vml/solver.hpp"

namespace py = pybind11;
using namespace vml;

namespace {

std::vector<double> grid_sigmas(const NoiseSchedule& schedule) {
  std::vector<double> out;
  for (const GridPoint& p : build_edm_grid(schedule)) out.push_back(p.sigma);
  return out;
}

SolverVariant parse_variant(const std::string& name) {
  if (name == "plain") return SolverVariant::plain;
  if (name == "preconditioned") return SolverVariant::preconditioned;
  if (name == "latent") return SolverVariant::latent;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(vmllab, m) {
  m.doc() = "Exact mode-seeking diffusion MAP estimation on Gaussian-mixture "
            "inverse problems";

  py::class_<NoiseSchedule>(m, "NoiseSchedule")
      .def(py::init([](double sigma_min, double sigma_max, double rho,
                       int num_steps) {
             NoiseSchedule s{sigma_min, sigma_max, rho, num_steps};
             s.validate();
             return s;
           }),
           py::arg("sigma_min") = 0.002, py::arg("sigma_max") = 140.0,
           py::arg("rho") = 7.0, py::arg("num_steps") = 20)
      .def_readonly("sigma_min", &NoiseSchedule::sigma_min)
      .def_readonly("sigma_max", &NoiseSchedule::sigma_max)
      .def_readonly("rho", &NoiseSchedule::rho)
      .def_readonly("num_steps", &NoiseSchedule::num_steps)
      .def("grid", &grid_sigmas, "sigma levels, largest first, last is 0");

  m.def(
      "perturb",
      [](const Eigen::VectorXd& x0, double sigma, std::uint64_t seed) {
        RandomSource rng(seed);
        return perturb(x0, sigma, rng);
      },
      py::arg("x0"), py::arg("sigma"), py::arg("seed"),
      "draw from N(x0, sigma^2 I) with an explicit seed");

  py::class_<GaussianMixture>(m, "GaussianMixture")
      .def(py::init<Eigen::VectorXd, std::vector<Eigen::VectorXd>,
                    std::vector<Eigen::MatrixXd>>(),
           py::arg("weights"), py::arg("means"), py::arg("covariances"))
      .def_property_readonly("dimension", &GaussianMixture::dimension)
      .def_property_readonly("num_components", &GaussianMixture::num_components)
      .def("weights", &GaussianMixture::weights)
      .def("mean", &GaussianMixture::mean, py::arg("k"))
      .def("covariance", &GaussianMixture::covariance, py::arg("k"))
      .def("marginal_logpdf",
           [](const GaussianMixture& g, const Eigen::VectorXd& x, double sigma) {
             return marginal_logpdf(g, x, sigma);
           },
           py::arg("x"), py::arg("sigma") = 0.0)
      .def("score",
           [](const GaussianMixture& g, const Eigen::VectorXd& x, double sigma) {
             return score(g, x, sigma);
           },
           py::arg("x"), py::arg("sigma") = 0.0)
      .def("denoiser",
           [](const GaussianMixture& g, const Eigen::VectorXd& x, double sigma) {
             return denoiser(g, x, sigma);
           },
           py::arg("x"), py::arg("sigma"))
      .def("posterior_cov",
           [](const GaussianMixture& g, const Eigen::VectorXd& x, double sigma) {
             return posterior_cov(g, x, sigma);
           },
           py::arg("x"), py::arg("sigma"))
      .def("denoiser_jacobian",
           [](const GaussianMixture& g, const Eigen::VectorXd& x, double sigma) {
             return denoiser_jacobian(g, x, sigma);
           },
           py::arg("x"), py::arg("sigma"));

  m.def("measurement_posterior", &measurement_posterior, py::arg("prior"),
        py::arg("op"), py::arg("y"), py::arg("sigma_y"),
        "exact GMM posterior p(x0|y) for a linear operator");
  m.def("log_evidence", &log_evidence, py::arg("prior"), py::arg("op"),
        py::arg("y"), py::arg("sigma_y"));
  m.def(
      "map_estimate",
      [](const GaussianMixture& posterior,
         const std::vector<Eigen::VectorXd>& starts) {
        const MapResult res = map_estimate(posterior, starts);
        return py::make_tuple(res.point, res.converged, res.grad_norm);
      },
      py::arg("posterior"), py::arg("starts"),
      "returns (point, converged, grad_norm)");

  py::class_<LinearOperator>(m, "LinearOperator")
      .def_static("dense", &LinearOperator::dense, py::arg("matrix"))
      .def_static("mask", &LinearOperator::mask, py::arg("n"), py::arg("keep"))
      .def_static("identity", &LinearOperator::identity, py::arg("n"))
      .def_static("block_average", &LinearOperator::block_average, py::arg("n"),
                  py::arg("block"))
      .def_static("separable_blur", &LinearOperator::separable_blur,
                  py::arg("rows"), py::arg("cols"), py::arg("width"))
      .def_property_readonly("input_dim", &LinearOperator::input_dim)
      .def_property_readonly("output_dim", &LinearOperator::output_dim)
      .def("singular_values", &LinearOperator::singular_values)
      .def("rank", &LinearOperator::rank)
      .def("apply", &LinearOperator::apply, py::arg("x"))
      .def("adjoint", &LinearOperator::adjoint, py::arg("v"))
      .def("pseudoinverse_apply", &LinearOperator::pseudoinverse_apply,
           py::arg("v"))
      .def("preconditioner_solve", &LinearOperator::preconditioner_solve,
           py::arg("g"))
      .def("threshold_singulars", &LinearOperator::threshold_singulars,
           py::arg("tau"))
      .def("to_dense", &LinearOperator::to_dense);

  py::class_<LossBreakdown>(m, "LossBreakdown")
      .def_readonly("neg_log_marginal", &LossBreakdown::neg_log_marginal)
      .def_readonly("tweedie_quad", &LossBreakdown::tweedie_quad)
      .def_readonly("trace_prior", &LossBreakdown::trace_prior)
      .def_readonly("meas_consistency", &LossBreakdown::meas_consistency)
      .def_readonly("trace_meas", &LossBreakdown::trace_meas)
      .def_readonly("total_full", &LossBreakdown::total_full)
      .def_readonly("total_simplified", &LossBreakdown::total_simplified);

  py::class_<GradBreakdown>(m, "GradBreakdown")
      .def_readonly("meas", &GradBreakdown::meas)
      .def_readonly("prior_term", &GradBreakdown::prior_term)
      .def_readonly("total", &GradBreakdown::total);

  m.def("vml_full", &vml_full, py::arg("prior"), py::arg("op"), py::arg("y"),
        py::arg("sigma_y"), py::arg("x"), py::arg("sigma"));
  m.def("vml_simplified", &vml_simplified, py::arg("prior"), py::arg("op"),
        py::arg("y"), py::arg("sigma_y"), py::arg("x"), py::arg("sigma"));
  m.def("vml_constant", &vml_constant, py::arg("prior"), py::arg("op"),
        py::arg("y"), py::arg("sigma_y"), py::arg("sigma"));
  m.def("grad_vml_simplified", &grad_vml_simplified, py::arg("prior"),
        py::arg("op"), py::arg("y"), py::arg("sigma_y"), py::arg("x"),
        py::arg("sigma"));
  m.def("grad_vml_preconditioned", &grad_vml_preconditioned, py::arg("prior"),
        py::arg("op"), py::arg("y"), py::arg("sigma_y"), py::arg("x"),
        py::arg("sigma"));
  m.def("vml_high_remainder", &vml_high_remainder, py::arg("prior"),
        py::arg("op"), py::arg("sigma_y"), py::arg("x"), py::arg("sigma"));
  m.def(
      "vml_limit_probe",
      [](const GaussianMixture& prior, const LinearOperator& op,
         const Eigen::VectorXd& y, double sigma_y, const Eigen::VectorXd& x,
         double sigma) {
        const LimitProbe probe = vml_limit_probe(prior, op, y, sigma_y, x, sigma);
        return py::make_tuple(probe.full_shifted, probe.simplified_shifted,
                              probe.target);
      },
      py::arg("prior"), py::arg("op"), py::arg("y"), py::arg("sigma_y"),
      py::arg("x"), py::arg("sigma"),
      "returns (full_shifted, simplified_shifted, target)");

  py::class_<StepRecord>(m, "StepRecord")
      .def_readonly("step_index", &StepRecord::step_index)
      .def_readonly("sigma", &StepRecord::sigma)
      .def_readonly("x_after_opt", &StepRecord::x_after_opt)
      .def_readonly("denoised", &StepRecord::denoised)
      .def_readonly("loss", &StepRecord::loss)
      .def_readonly("grad_norm", &StepRecord::grad_norm);

  py::class_<Trajectory>(m, "Trajectory")
      .def_readonly("steps", &Trajectory::steps)
      .def_readonly("final_x", &Trajectory::final_x)
      .def_readonly("seed", &Trajectory::seed);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init([](const NoiseSchedule& schedule, int num_inner,
                       double gamma0, double sigma_y, const std::string& variant,
                       std::uint64_t seed, int record_every) {
             SolverConfig cfg;
             cfg.schedule = schedule;
             cfg.num_inner = num_inner;
             cfg.gamma0 = gamma0;
             cfg.sigma_y = sigma_y;
             cfg.variant = parse_variant(variant);
             cfg.seed = seed;
             cfg.record_every = record_every;
             cfg.validate();
             return cfg;
           }),
           py::arg("schedule") = NoiseSchedule{}, py::arg("num_inner") = 50,
           py::arg("gamma0") = 1.0, py::arg("sigma_y") = 1e-9,
           py::arg("variant") = "plain", py::arg("seed") = 0,
           py::arg("record_every") = 1)
      .def_property_readonly("learning_rate", &SolverConfig::learning_rate);

  m.def("solve", &solve, py::arg("prior"), py::arg("op"), py::arg("y"),
        py::arg("config"), "reverse-diffusion MAP solve");

  py::class_<SyntheticDecoder>(m, "SyntheticDecoder")
      .def_static("affine", &SyntheticDecoder::affine, py::arg("matrix"),
                  py::arg("offset"))
      .def_static("smooth_nonlinear", &SyntheticDecoder::smooth_nonlinear,
                  py::arg("matrix"), py::arg("offset"), py::arg("scale"))
      .def_static("identity", &SyntheticDecoder::identity, py::arg("n"))
      .def("forward", &SyntheticDecoder::forward, py::arg("z"))
      .def("jacobian", &SyntheticDecoder::jacobian, py::arg("z"))
      .def("inverse", &SyntheticDecoder::inverse, py::arg("x"))
      .def_property_readonly("latent_dim", &SyntheticDecoder::latent_dim)
      .def_property_readonly("output_dim", &SyntheticDecoder::output_dim);

  m.def("latent_vml_simplified", &latent_vml_simplified, py::arg("prior_z"),
        py::arg("decoder"), py::arg("op"), py::arg("y"), py::arg("sigma_y"),
        py::arg("z"), py::arg("sigma"));
  m.def("grad_latent_vml_simplified", &grad_latent_vml_simplified,
        py::arg("prior_z"), py::arg("decoder"), py::arg("op"), py::arg("y"),
        py::arg("sigma_y"), py::arg("z"), py::arg("sigma"));
  m.def(
      "latent_solve",
      [](const GaussianMixture& prior_z, const SyntheticDecoder& decoder,
         const LinearOperator& op, const Eigen::VectorXd& y,
         const SolverConfig& config, bool project_measurement) {
        LatentOptions options;
        options.project_measurement = project_measurement;
        LatentResult res = latent_solve(prior_z, decoder, op, y, config, options);
        return py::make_tuple(res.trajectory, res.final_x);
      },
      py::arg("prior_z"), py::arg("decoder"), py::arg("op"), py::arg("y"),
      py::arg("config"), py::arg("project_measurement") = false,
      "returns (latent trajectory, decoded final_x)");
}
