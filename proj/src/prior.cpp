#include "vml/prior.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace vml {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_gaussian(const Eigen::VectorXd& resid,
                    const Eigen::LLT<Eigen::MatrixXd>& llt) {
  const Eigen::Index n = resid.size();
  if (n == 0) return 0.0;
  const Eigen::VectorXd z = llt.matrixL().solve(resid);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * z.squaredNorm() - log_det - 0.5 * n * kLog2Pi;
}

// per-component pieces of the sigma-smoothed mixture at a point
struct SmoothedEval {
  Eigen::VectorXd log_terms;                      // log w_k + log N_k(x)
  Eigen::VectorXd resp;                           // responsibilities
  double logpdf = 0.0;                            // log p_sigma(x)
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llt;   // of Sigma_k + sigma^2 I
  std::vector<Eigen::VectorXd> comp_score;        // -C_k^{-1} (x - mu_k)
};

SmoothedEval evaluate_smoothed(const GaussianMixture& prior,
                               const Eigen::VectorXd& x, double sigma) {
  if (x.size() != prior.dimension())
    throw std::invalid_argument("prior: point dimension mismatch");
  if (sigma < 0.0) throw std::invalid_argument("prior: sigma must be >= 0");

  const int kc = prior.num_components();
  const Eigen::Index n = x.size();
  SmoothedEval out;
  out.log_terms.resize(kc);
  out.llt.reserve(kc);
  out.comp_score.reserve(kc);

  const Eigen::MatrixXd noise = sigma * sigma * Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < kc; ++k) {
    out.llt.emplace_back(prior.covariance(k) + noise);
    const Eigen::VectorXd resid = x - prior.mean(k);
    out.log_terms[k] = prior.log_weight(k) + log_gaussian(resid, out.llt[k]);
    out.comp_score.push_back(-out.llt[k].solve(resid));
  }

  const double peak = out.log_terms.maxCoeff();
  out.resp = (out.log_terms.array() - peak).exp().matrix();
  const double total = out.resp.sum();
  out.resp /= total;
  out.logpdf = peak + std::log(total);
  return out;
}

}  // namespace

double marginal_logpdf(const GaussianMixture& prior, const Eigen::VectorXd& x,
                       double sigma) {
  return evaluate_smoothed(prior, x, sigma).logpdf;
}

Eigen::VectorXd score(const GaussianMixture& prior, const Eigen::VectorXd& x,
                      double sigma) {
  const SmoothedEval ev = evaluate_smoothed(prior, x, sigma);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (int k = 0; k < prior.num_components(); ++k)
    g += ev.resp[k] * ev.comp_score[k];
  return g;
}

Eigen::MatrixXd marginal_hessian(const GaussianMixture& prior,
                                 const Eigen::VectorXd& x, double sigma) {
  const SmoothedEval ev = evaluate_smoothed(prior, x, sigma);
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < prior.num_components(); ++k) {
    const Eigen::VectorXd& gk = ev.comp_score[k];
    h += ev.resp[k] * (gk * gk.transpose() - ev.llt[k].solve(eye));
    s += ev.resp[k] * gk;
  }
  h -= s * s.transpose();
  return 0.5 * (h + h.transpose());
}

Eigen::VectorXd denoiser(const GaussianMixture& prior, const Eigen::VectorXd& x,
                         double sigma) {
  if (x.size() != prior.dimension())
    throw std::invalid_argument("prior: point dimension mismatch");
  if (sigma < 0.0) throw std::invalid_argument("prior: sigma must be >= 0");
  if (sigma == 0.0) return x;

  const SmoothedEval ev = evaluate_smoothed(prior, x, sigma);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(x.size());
  for (int k = 0; k < prior.num_components(); ++k) {
    // conjugate posterior mean m_k = mu_k + Sigma_k C_k^{-1} (x - mu_k),
    // deliberately not the Tweedie form x + sigma^2 * comp_score: the two
    // routes are compared by the identity tests
    const Eigen::VectorXd mk =
        prior.mean(k) - prior.covariance(k) * ev.comp_score[k];
    d += ev.resp[k] * mk;
  }
  return d;
}

Eigen::MatrixXd posterior_cov(const GaussianMixture& prior,
                              const Eigen::VectorXd& x, double sigma) {
  if (!(sigma > 0.0))
    throw std::invalid_argument(
        "posterior_cov: sigma must be positive (the sigma = 0 limit is the zero matrix)");
  const SmoothedEval ev = evaluate_smoothed(prior, x, sigma);
  const Eigen::Index n = x.size();
  const int kc = prior.num_components();
  const double s2 = sigma * sigma;

  std::vector<Eigen::VectorXd> mk(kc);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (int k = 0; k < kc; ++k) {
    mk[k] = prior.mean(k) - prior.covariance(k) * ev.comp_score[k];
    d += ev.resp[k] * mk[k];
  }

  // centered mixture decomposition: within-component conditional covariance
  // plus the spread of the component means around the overall mean; avoids
  // forming the huge uncentered second moments
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < kc; ++k) {
    Eigen::MatrixXd cond = s2 * ev.llt[k].solve(prior.covariance(k));
    cond = 0.5 * (cond + cond.transpose());
    const Eigen::VectorXd dev = mk[k] - d;
    cov += ev.resp[k] * (cond + dev * dev.transpose());
  }
  return 0.5 * (cov + cov.transpose());
}

Eigen::MatrixXd denoiser_jacobian(const GaussianMixture& prior,
                                  const Eigen::VectorXd& x, double sigma) {
  return posterior_cov(prior, x, sigma) / (sigma * sigma);
}

double log_evidence(const GaussianMixture& prior, const LinearOperator& op,
                    const Eigen::VectorXd& y, double sigma_y) {
  if (!(sigma_y > 0.0)) throw std::invalid_argument("evidence: sigma_y must be positive");
  if (op.input_dim() != prior.dimension())
    throw std::invalid_argument("evidence: operator/prior dimension mismatch");
  if (y.size() != op.output_dim())
    throw std::invalid_argument("evidence: measurement dimension mismatch");

  const int m = op.output_dim();
  if (m == 0) return 0.0;

  const Eigen::MatrixXd h = op.to_dense();
  Eigen::VectorXd log_terms(prior.num_components());
  for (int k = 0; k < prior.num_components(); ++k) {
    const Eigen::MatrixXd s =
        h * prior.covariance(k) * h.transpose() +
        sigma_y * sigma_y * Eigen::MatrixXd::Identity(m, m);
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("evidence: measurement covariance not positive definite");
    log_terms[k] = prior.log_weight(k) + log_gaussian(y - h * prior.mean(k), llt);
  }
  const double peak = log_terms.maxCoeff();
  return peak + std::log((log_terms.array() - peak).exp().sum());
}

GaussianMixture measurement_posterior(const GaussianMixture& prior,
                                      const LinearOperator& op,
                                      const Eigen::VectorXd& y, double sigma_y) {
  if (!(sigma_y > 0.0))
    throw std::invalid_argument("measurement_posterior: sigma_y must be positive");
  if (op.input_dim() != prior.dimension())
    throw std::invalid_argument("measurement_posterior: operator/prior dimension mismatch");
  if (y.size() != op.output_dim())
    throw std::invalid_argument("measurement_posterior: measurement dimension mismatch");

  const int kc = prior.num_components();
  const Eigen::Index n = prior.dimension();
  const int m = op.output_dim();

  if (m == 0) {
    // nothing observed: the posterior is the prior
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covs;
    for (int k = 0; k < kc; ++k) {
      means.push_back(prior.mean(k));
      covs.push_back(prior.covariance(k));
    }
    return GaussianMixture(prior.weights(), std::move(means), std::move(covs));
  }

  const Eigen::MatrixXd h = op.to_dense();
  const Eigen::MatrixXd eye_n = Eigen::MatrixXd::Identity(n, n);
  const double sy2 = sigma_y * sigma_y;

  std::vector<Eigen::VectorXd> means(kc);
  std::vector<Eigen::MatrixXd> covs(kc);
  Eigen::VectorXd log_terms(kc);

  for (int k = 0; k < kc; ++k) {
    const Eigen::MatrixXd& cov = prior.covariance(k);
    const Eigen::MatrixXd s =
        h * cov * h.transpose() + sy2 * Eigen::MatrixXd::Identity(m, m);
    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("measurement_posterior: innovation covariance not positive definite");

    const Eigen::MatrixXd gain = llt.solve(h * cov).transpose();  // n x m
    const Eigen::VectorXd resid = y - h * prior.mean(k);
    means[k] = prior.mean(k) + gain * resid;

    // Joseph form keeps the update positive definite at tiny sigma_y
    const Eigen::MatrixXd a = eye_n - gain * h;
    Eigen::MatrixXd post = a * cov * a.transpose() + sy2 * gain * gain.transpose();
    covs[k] = 0.5 * (post + post.transpose());

    log_terms[k] = prior.log_weight(k) + log_gaussian(resid, llt);
  }

  const double peak = log_terms.maxCoeff();
  Eigen::VectorXd w = (log_terms.array() - peak).exp().matrix();
  w /= w.sum();
  return GaussianMixture(std::move(w), std::move(means), std::move(covs));
}

namespace {

struct AscentOutcome {
  Eigen::VectorXd point;
  double value;
  double grad_norm;
  bool converged;
  int iterations;
};

AscentOutcome newton_ascent(const GaussianMixture& gmm, Eigen::VectorXd x) {
  constexpr int kMaxIter = 200;
  constexpr double kGradTol = 1e-11;

  double f = marginal_logpdf(gmm, x, 0.0);
  Eigen::VectorXd g = score(gmm, x, 0.0);
  int it = 0;
  for (; it < kMaxIter; ++it) {
    if (g.norm() <= kGradTol * (1.0 + std::abs(f))) break;

    Eigen::VectorXd dir;
    const Eigen::MatrixXd hess = marginal_hessian(gmm, x, 0.0);
    const Eigen::LLT<Eigen::MatrixXd> llt(Eigen::MatrixXd(-hess));
    if (llt.info() == Eigen::Success) {
      dir = llt.solve(g);
      if (dir.dot(g) <= 0.0) dir = g;  // not an ascent direction, fall back
    } else {
      dir = g;
    }

    double step = 1.0;
    bool moved = false;
    for (int bt = 0; bt < 120; ++bt) {
      const Eigen::VectorXd cand = x + step * dir;
      const double fc = marginal_logpdf(gmm, cand, 0.0);
      if (std::isfinite(fc) && fc >= f + 1e-4 * step * g.dot(dir)) {
        x = cand;
        f = fc;
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
    g = score(gmm, x, 0.0);
  }
  return {x, f, g.norm(), g.norm() <= 1e-8 * (1.0 + std::abs(f)), it};
}

// coarse scan over the mixture's bulk, used to seed the ascent in <= 2-D
Eigen::VectorXd bulk_scan(const GaussianMixture& gmm) {
  const int n = gmm.dimension();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::max());
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::lowest());
  for (int k = 0; k < gmm.num_components(); ++k)
    for (int i = 0; i < n; ++i) {
      const double spread = 6.0 * std::sqrt(gmm.covariance(k)(i, i));
      lo[i] = std::min(lo[i], gmm.mean(k)[i] - spread);
      hi[i] = std::max(hi[i], gmm.mean(k)[i] + spread);
    }

  const int points = (n == 1) ? 4001 : 201;
  Eigen::VectorXd best;
  double best_f = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(n);
  if (n == 1) {
    for (int i = 0; i < points; ++i) {
      x[0] = lo[0] + (hi[0] - lo[0]) * i / (points - 1);
      const double f = marginal_logpdf(gmm, x, 0.0);
      if (f > best_f) { best_f = f; best = x; }
    }
  } else {
    for (int i = 0; i < points; ++i)
      for (int j = 0; j < points; ++j) {
        x[0] = lo[0] + (hi[0] - lo[0]) * i / (points - 1);
        x[1] = lo[1] + (hi[1] - lo[1]) * j / (points - 1);
        const double f = marginal_logpdf(gmm, x, 0.0);
        if (f > best_f) { best_f = f; best = x; }
      }
  }
  return best;
}

}  // namespace

MapResult map_estimate(const GaussianMixture& posterior,
                       const std::vector<Eigen::VectorXd>& starts) {
  if (starts.empty())
    throw std::invalid_argument("map_estimate: needs at least one start");

  std::vector<Eigen::VectorXd> candidates = starts;
  for (int k = 0; k < posterior.num_components(); ++k)
    candidates.push_back(posterior.mean(k));
  if (posterior.dimension() <= 2) candidates.push_back(bulk_scan(posterior));

  MapResult best;
  best.log_density = -std::numeric_limits<double>::infinity();
  for (const Eigen::VectorXd& start : candidates) {
    if (start.size() != posterior.dimension())
      throw std::invalid_argument("map_estimate: start dimension mismatch");
    const AscentOutcome run = newton_ascent(posterior, start);
    if (run.value > best.log_density) {
      best.point = run.point;
      best.log_density = run.value;
      best.grad_norm = run.grad_norm;
      best.converged = run.converged;
      best.iterations = run.iterations;
    }
  }
  return best;
}

}  // namespace vml
