#include "slq/matrix_kit.hpp"

#include <algorithm>
#include <cmath>

namespace slq {

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  if (symmetric.rows() == 1) return symmetric(0, 0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

PsdReport psd_report(const Matrix& symmetric, double tol) {
  PsdReport r;
  r.min_eigenvalue = min_eigenvalue(symmetric);
  r.is_psd = r.min_eigenvalue >= -tol;
  r.is_uniformly_pd_delta = std::max(0.0, r.min_eigenvalue);
  return r;
}

Matrix pseudo_inverse(const Matrix& symmetric) {
  const auto n = symmetric.rows();
  if (n == 0) return symmetric;
  if (n == 1) {
    const double v = symmetric(0, 0);
    return Matrix::Constant(1, 1, v == 0.0 ? 0.0 : 1.0 / v);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric);
  const auto& lambda = es.eigenvalues();
  const double scale = lambda.cwiseAbs().maxCoeff();
  const double cutoff = kRankTol * scale;
  Vector inv = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lambda(i)) > cutoff && lambda(i) != 0.0) inv(i) = 1.0 / lambda(i);
  }
  const Matrix& V = es.eigenvectors();
  return sym(V * inv.asDiagonal() * V.transpose());
}

bool range_included(const Matrix& S, const Matrix& R) {
  const auto m = R.rows();
  const Matrix residual = S.transpose() * (Matrix::Identity(m, m) - R * pseudo_inverse(R));
  return residual.norm() <= 1e-8 * (1.0 + S.norm());
}

bool schur_psd_test(const Matrix& Q, const Matrix& S, const Matrix& R) {
  if (min_eigenvalue(R) < -kPsdTol) return false;
  if (!range_included(S, R)) return false;
  const Matrix schur = sym(Q - S.transpose() * pseudo_inverse(R) * S);
  return min_eigenvalue(schur) >= -kPsdTol;
}

}  // namespace slq
