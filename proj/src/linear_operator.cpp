#include "vml/linear_operator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/SVD>

namespace vml {

namespace {

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

int reflect_index(int j, int n) {
  while (j < 0 || j >= n) {
    if (j < 0) j = -j - 1;
    if (j >= n) j = 2 * n - j - 1;
  }
  return j;
}

}  // namespace

std::string to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::dense: return "dense";
    case OperatorKind::mask: return "mask";
    case OperatorKind::block_average: return "block_average";
    case OperatorKind::separable_blur: return "separable_blur";
  }
  return "unknown";
}

LinearOperator::LinearOperator(OperatorKind kind, Eigen::MatrixXd u,
                               Eigen::VectorXd s, Eigen::MatrixXd v)
    : kind_(kind),
      m_(static_cast<int>(u.rows())),
      n_(static_cast<int>(v.rows())),
      u_(std::move(u)),
      s_(std::move(s)),
      v_(std::move(v)) {
  if (n_ < 1 || n_ > kMaxDimension || m_ > kMaxDimension)
    throw std::invalid_argument("operator: dimension out of supported range");
  if (u_.cols() != m_ || v_.cols() != n_)
    throw std::invalid_argument("operator: factors must be square");
  if (s_.size() != std::min(m_, n_))
    throw std::invalid_argument("operator: singular value count mismatch");
  if ((s_.array() < 0.0).any())
    throw std::invalid_argument("operator: singular values must be nonnegative");
}

LinearOperator LinearOperator::dense(const Eigen::MatrixXd& h) {
  if (h.rows() < 0 || h.cols() < 1)
    throw std::invalid_argument("operator: empty matrix");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return LinearOperator(OperatorKind::dense, svd.matrixU(),
                        svd.singularValues(), svd.matrixV());
}

LinearOperator LinearOperator::mask(int n, const std::vector<int>& keep) {
  if (n < 1 || n > kMaxDimension)
    throw std::invalid_argument("mask: n out of supported range");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= n)
      throw std::invalid_argument("mask: keep index out of range");
    if (i > 0 && keep[i] <= keep[i - 1])
      throw std::invalid_argument("mask: keep indices must be strictly increasing");
  }
  const int m = static_cast<int>(keep.size());

  std::vector<bool> kept(n, false);
  for (int idx : keep) kept[idx] = true;

  // V columns: kept coordinates first, then the unkept completion; V is a
  // permutation, so mask operators stay exact under the SVD route.
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  int col = 0;
  for (int idx : keep) v(idx, col++) = 1.0;
  for (int i = 0; i < n; ++i)
    if (!kept[i]) v(i, col++) = 1.0;

  return LinearOperator(OperatorKind::mask, Eigen::MatrixXd::Identity(m, m),
                        Eigen::VectorXd::Ones(m), v);
}

LinearOperator LinearOperator::identity(int n) {
  std::vector<int> keep(n);
  std::iota(keep.begin(), keep.end(), 0);
  return mask(n, keep);
}

LinearOperator LinearOperator::block_average(int n, int block) {
  if (n < 1 || block < 1 || n % block != 0)
    throw std::invalid_argument("block_average: n must be a positive multiple of block");
  if (n > kMaxDimension)
    throw std::invalid_argument("block_average: n out of supported range");
  const int m = n / block;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(block));

  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
  for (int b = 0; b < m; ++b)
    for (int j = 0; j < block; ++j) v(b * block + j, b) = inv_sqrt;
  // per-block Helmert completion of the constant direction
  int col = m;
  for (int b = 0; b < m; ++b) {
    for (int j = 1; j < block; ++j) {
      const double norm = std::sqrt(static_cast<double>(j) * (j + 1));
      for (int i = 0; i < j; ++i) v(b * block + i, col) = 1.0 / norm;
      v(b * block + j, col) = -static_cast<double>(j) / norm;
      ++col;
    }
  }

  return LinearOperator(OperatorKind::block_average,
                        Eigen::MatrixXd::Identity(m, m),
                        Eigen::VectorXd::Constant(m, inv_sqrt), v);
}

Eigen::MatrixXd uniform_blur_matrix(int n, int width) {
  if (n < 1 || width < 1 || width > n)
    throw std::invalid_argument("blur: need 1 <= width <= n");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const double w = 1.0 / static_cast<double>(width);
  const int left = (width - 1) / 2;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < width; ++k)
      a(i, reflect_index(i - left + k, n)) += w;
  return a;
}

LinearOperator LinearOperator::separable_blur(int rows, int cols, int width) {
  if (rows < 1 || cols < 1 || rows * cols > kMaxDimension)
    throw std::invalid_argument("separable_blur: image size out of supported range");
  const Eigen::MatrixXd ar = uniform_blur_matrix(rows, width);
  const Eigen::MatrixXd ac = uniform_blur_matrix(cols, width);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_r(ar, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_c(ac, Eigen::ComputeFullU | Eigen::ComputeFullV);

  // image flattened column-major: H = A_c (x) A_r
  Eigen::MatrixXd u = kron(svd_c.matrixU(), svd_r.matrixU());
  Eigen::MatrixXd v = kron(svd_c.matrixV(), svd_r.matrixV());
  Eigen::VectorXd s(rows * cols);
  for (int jc = 0; jc < cols; ++jc)
    for (int jr = 0; jr < rows; ++jr)
      s[jc * rows + jr] = svd_c.singularValues()[jc] * svd_r.singularValues()[jr];

  std::vector<int> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s[a] > s[b]; });

  Eigen::MatrixXd u_sorted(u.rows(), u.cols());
  Eigen::MatrixXd v_sorted(v.rows(), v.cols());
  Eigen::VectorXd s_sorted(s.size());
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    u_sorted.col(j) = u.col(order[j]);
    v_sorted.col(j) = v.col(order[j]);
    s_sorted[j] = s[order[j]];
  }
  return LinearOperator(OperatorKind::separable_blur, std::move(u_sorted),
                        std::move(s_sorted), std::move(v_sorted));
}

int LinearOperator::rank() const {
  return static_cast<int>((s_.array() > 0.0).count());
}

Eigen::VectorXd LinearOperator::apply(const Eigen::VectorXd& x) const {
  if (x.size() != n_) throw std::invalid_argument("operator apply: dimension mismatch");
  const Eigen::VectorXd w = v_.transpose() * x;
  Eigen::VectorXd t = Eigen::VectorXd::Zero(m_);
  for (Eigen::Index i = 0; i < s_.size(); ++i) t[i] = s_[i] * w[i];
  return u_ * t;
}

Eigen::VectorXd LinearOperator::adjoint(const Eigen::VectorXd& v) const {
  if (v.size() != m_) throw std::invalid_argument("operator adjoint: dimension mismatch");
  const Eigen::VectorXd z = u_.transpose() * v;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index i = 0; i < s_.size(); ++i) w[i] = s_[i] * z[i];
  return v_ * w;
}

Eigen::VectorXd LinearOperator::pseudoinverse_apply(const Eigen::VectorXd& v) const {
  if (v.size() != m_) throw std::invalid_argument("operator pinv: dimension mismatch");
  const Eigen::VectorXd z = u_.transpose() * v;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n_);
  for (Eigen::Index i = 0; i < s_.size(); ++i)
    if (s_[i] > 0.0) w[i] = z[i] / s_[i];
  return v_ * w;
}

Eigen::VectorXd LinearOperator::preconditioner_solve(const Eigen::VectorXd& g) const {
  if (g.size() != n_) throw std::invalid_argument("operator preconditioner: dimension mismatch");
  Eigen::VectorXd w = v_.transpose() * g;
  for (Eigen::Index i = 0; i < n_; ++i) {
    const double d = (i < s_.size() && s_[i] != 0.0) ? s_[i] * s_[i] : 1.0;
    w[i] /= d;
  }
  return v_ * w;
}

LinearOperator LinearOperator::threshold_singulars(double tau) const {
  if (tau < 0.0) throw std::invalid_argument("threshold: tau must be >= 0");
  Eigen::VectorXd s = s_;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] < tau) s[i] = 0.0;
  return LinearOperator(kind_, u_, std::move(s), v_);
}

std::vector<int> LinearOperator::mask_kept_indices() const {
  if (kind_ != OperatorKind::mask)
    throw std::logic_error("mask_kept_indices: operator is not a mask");
  std::vector<int> keep(m_);
  for (int j = 0; j < m_; ++j) {
    int row = -1;
    for (int i = 0; i < n_; ++i)
      if (v_(i, j) == 1.0) { row = i; break; }
    keep[j] = row;
  }
  return keep;
}

Eigen::MatrixXd LinearOperator::to_dense() const {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(m_, n_);
  for (Eigen::Index i = 0; i < s_.size(); ++i) sigma(i, i) = s_[i];
  return u_ * sigma * v_.transpose();
}

}  // namespace vml
