#include "random_matrix.hpp"

namespace bsl::detail {

Matrix random_orthogonal(std::size_t n, RandomStream& stream) {
  const auto k = static_cast<Eigen::Index>(n);
  Matrix g(k, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < k; ++i) g(i, j) = stream.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

Matrix random_with_spectral_norm(std::size_t rows, std::size_t cols, double norm, RandomStream& stream) {
  const auto r = static_cast<Eigen::Index>(rows);
  const auto c = static_cast<Eigen::Index>(cols);
  if (norm == 0.0) return Matrix::Zero(r, c);
  Matrix g(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) g(i, j) = stream.normal();
  Eigen::JacobiSVD<Matrix> svd(g);
  return g * (norm / svd.singularValues()(0));
}

Matrix random_spd(std::size_t n, double lo, double hi, RandomStream& stream) {
  const auto k = static_cast<Eigen::Index>(n);
  if (lo == hi) return lo * Matrix::Identity(k, k);
  Vector eig(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    eig[i] = k == 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
  }
  const Matrix u = random_orthogonal(n, stream);
  Matrix s = u * eig.asDiagonal() * u.transpose();
  return 0.5 * (s + s.transpose());
}

Vector random_direction(std::size_t n, double norm, RandomStream& stream) {
  if (norm == 0.0) return Vector::Zero(static_cast<Eigen::Index>(n));
  Vector v = stream.normal_vector(n);
  return v * (norm / v.norm());
}

Vector uniform_box(std::size_t n, double half, RandomStream& stream) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = half * (2.0 * stream.uniform() - 1.0);
  return v;
}

}  // namespace bsl::detail
