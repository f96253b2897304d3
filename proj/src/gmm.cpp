#include "vml/gmm.hpp"

#include <cmath>
#include <stdexcept>

namespace vml {

GaussianMixture::GaussianMixture(Eigen::VectorXd weights,
                                 std::vector<Eigen::VectorXd> means,
                                 std::vector<Eigen::MatrixXd> covariances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      covariances_(std::move(covariances)) {
  const auto kc = static_cast<std::size_t>(weights_.size());
  if (kc == 0) throw std::invalid_argument("mixture: needs at least one component");
  if (means_.size() != kc || covariances_.size() != kc)
    throw std::invalid_argument("mixture: weights/means/covariances count mismatch");

  const Eigen::Index n = means_[0].size();
  if (n < 1) throw std::invalid_argument("mixture: empty mean vector");
  if (n > kMaxDimension)
    throw std::invalid_argument("mixture: dimension exceeds the supported cap of 64");

  if ((weights_.array() < 0.0).any())
    throw std::invalid_argument("mixture: weights must be nonnegative");
  if (std::abs(weights_.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must sum to 1 within 1e-12");

  log_weights_.resize(weights_.size());
  for (Eigen::Index k = 0; k < weights_.size(); ++k)
    log_weights_[k] = weights_[k] > 0.0
                          ? std::log(weights_[k])
                          : -std::numeric_limits<double>::infinity();

  llts_.reserve(kc);
  for (std::size_t k = 0; k < kc; ++k) {
    if (means_[k].size() != n)
      throw std::invalid_argument("mixture: inconsistent mean dimensions");
    const Eigen::MatrixXd& cov = covariances_[k];
    if (cov.rows() != n || cov.cols() != n)
      throw std::invalid_argument("mixture: covariance shape mismatch");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw std::invalid_argument("mixture: covariance must be symmetric within 1e-12");
    llts_.emplace_back(cov);
    if (llts_.back().info() != Eigen::Success)
      throw std::invalid_argument("mixture: covariance must be positive definite");
  }
}

GaussianMixture GaussianMixture::single(Eigen::VectorXd mean,
                                        Eigen::MatrixXd cov) {
  Eigen::VectorXd w(1);
  w[0] = 1.0;
  return GaussianMixture(w, {std::move(mean)}, {std::move(cov)});
}

GaussianMixture GaussianMixture::isotropic(Eigen::VectorXd weights,
                                           std::vector<Eigen::VectorXd> means,
                                           double scale) {
  if (means.empty()) throw std::invalid_argument("mixture: needs at least one component");
  const Eigen::Index n = means[0].size();
  std::vector<Eigen::MatrixXd> covs(means.size(),
                                    scale * scale * Eigen::MatrixXd::Identity(n, n));
  return GaussianMixture(std::move(weights), std::move(means), std::move(covs));
}

}  // namespace vml
