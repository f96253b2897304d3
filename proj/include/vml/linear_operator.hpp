#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace vml {

enum class OperatorKind { dense, mask, block_average, separable_blur };

std::string to_string(OperatorKind kind);

// Linear degradation H with explicit factors H = U diag(s) V^T. U is m x m
// and V is n x n orthogonal; s holds the min(m, n) singular values in
// descending order. The preconditioner M = (I - S^+ S) + H^T H is diagonal
// in the V basis with entries 1 where s_i = 0 (or past the singular list)
// and s_i^2 otherwise, so its solve never divides by zero.
class LinearOperator {
 public:
  static constexpr int kMaxDimension = 4096;

  static LinearOperator dense(const Eigen::MatrixXd& h);
  // keeps the listed coordinates (strictly increasing, in range)
  static LinearOperator mask(int n, const std::vector<int>& keep);
  static LinearOperator identity(int n);
  // non-overlapping block means over a length-n signal, n divisible by block
  static LinearOperator block_average(int n, int block);
  // 2-D separable uniform blur (reflect boundary) over a rows x cols image,
  // flattened column-major; built from per-axis dense kernels via the
  // Kronecker structure of the SVD
  static LinearOperator separable_blur(int rows, int cols, int width);

  int output_dim() const { return m_; }
  int input_dim() const { return n_; }
  OperatorKind kind() const { return kind_; }

  const Eigen::MatrixXd& left_factor() const { return u_; }
  const Eigen::MatrixXd& right_factor() const { return v_; }
  const Eigen::VectorXd& singular_values() const { return s_; }
  int rank() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;        // H x
  Eigen::VectorXd adjoint(const Eigen::VectorXd& v) const;      // H^T v
  Eigen::VectorXd pseudoinverse_apply(const Eigen::VectorXd& v) const;  // H^+ v
  Eigen::VectorXd preconditioner_solve(const Eigen::VectorXd& g) const;  // M^-1 g

  // new operator with singular values below tau zeroed; factors unchanged
  LinearOperator threshold_singulars(double tau) const;

  // the coordinates a mask operator observes, in measurement order
  std::vector<int> mask_kept_indices() const;

  Eigen::MatrixXd to_dense() const;  // U diag(s) V^T materialized

 private:
  LinearOperator(OperatorKind kind, Eigen::MatrixXd u, Eigen::VectorXd s,
                 Eigen::MatrixXd v);

  OperatorKind kind_;
  int m_ = 0;
  int n_ = 0;
  Eigen::MatrixXd u_;
  Eigen::VectorXd s_;
  Eigen::MatrixXd v_;
};

// dense n x n one-axis uniform blur matrix with reflect boundary handling
Eigen::MatrixXd uniform_blur_matrix(int n, int width);

}  // namespace vml
