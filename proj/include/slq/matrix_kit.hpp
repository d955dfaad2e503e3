#pragma once

#include "slq/matrix_path.hpp"

namespace slq {

/// Tolerance on the minimum eigenvalue used by every PSD test.
inline constexpr double kPsdTol = 1e-9;
/// Relative spectral cutoff of the pseudo-inverse.
inline constexpr double kRankTol = 1e-10;

struct PsdReport {
  double min_eigenvalue = 0.0;
  bool is_psd = false;
  /// Largest delta >= 0 with M >= delta I.
  double is_uniformly_pd_delta = 0.0;
};

double min_eigenvalue(const Matrix& symmetric);
PsdReport psd_report(const Matrix& symmetric, double tol = kPsdTol);

/// Moore-Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.
/// Eigenvalues with |lambda| <= kRankTol * max|lambda| are treated as zero.
Matrix pseudo_inverse(const Matrix& symmetric);

/// Range inclusion R(S) in R(R), tested as ||S'(I - R R^+)||_F <= 1e-8 (1 + ||S||_F).
/// S is m x n, R is m x m symmetric.
bool range_included(const Matrix& S, const Matrix& R);

/// PSD test of [[Q, S'], [S, R]] through the extended Schur lemma:
/// R >= 0, R(S) in R(R) and Q - S'R^+S >= 0.
bool schur_psd_test(const Matrix& Q, const Matrix& S, const Matrix& R);

}  // namespace slq
