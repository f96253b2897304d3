#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace vml {

// Finite Gaussian mixture with full covariances. Immutable after
// construction; construction validates the simplex and SPD invariants.
// Dimension is capped at 64: every quantity downstream is computed with
// dense exact linear algebra.
class GaussianMixture {
 public:
  static constexpr int kMaxDimension = 64;

  GaussianMixture(Eigen::VectorXd weights, std::vector<Eigen::VectorXd> means,
                  std::vector<Eigen::MatrixXd> covariances);

  // single standard-normal-like component N(mean, cov)
  static GaussianMixture single(Eigen::VectorXd mean, Eigen::MatrixXd cov);
  // isotropic components, all with covariance scale^2 * I
  static GaussianMixture isotropic(Eigen::VectorXd weights,
                                   std::vector<Eigen::VectorXd> means,
                                   double scale);

  int dimension() const { return static_cast<int>(means_[0].size()); }
  int num_components() const { return static_cast<int>(means_.size()); }

  double weight(int k) const { return weights_[k]; }
  double log_weight(int k) const { return log_weights_[k]; }
  const Eigen::VectorXd& weights() const { return weights_; }
  const Eigen::VectorXd& mean(int k) const { return means_[k]; }
  const Eigen::MatrixXd& covariance(int k) const { return covariances_[k]; }
  const Eigen::LLT<Eigen::MatrixXd>& cholesky(int k) const { return llts_[k]; }

 private:
  Eigen::VectorXd weights_;
  Eigen::VectorXd log_weights_;
  std::vector<Eigen::VectorXd> means_;
  std::vector<Eigen::MatrixXd> covariances_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> llts_;
};

}  // namespace vml
