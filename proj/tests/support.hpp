#pragma once

#include <random>
#include <string>

#include "slq/problem.hpp"

namespace slq::test {

inline std::string fixture(const std::string& name) {
  return std::string(SLQ_FIXTURE_DIR) + "/" + name;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()),
           static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Constant-coefficient homogeneous problem on [0, T].
inline ProblemData constant_problem(const Matrix& A, const Matrix& B, const Matrix& C,
                                    const Matrix& D, const Matrix& G, const Matrix& Q,
                                    const Matrix& R, std::size_t steps = 2000, double T = 1.0,
                                    Matrix S = Matrix()) {
  ProblemSpec s;
  s.grid = TimeGrid(0.0, T, steps);
  s.n = A.rows();
  s.m = B.cols();
  s.A = MatrixPath::constant(A);
  s.B = MatrixPath::constant(B);
  s.C = MatrixPath::constant(C);
  s.D = MatrixPath::constant(D);
  s.G = G;
  s.Q = MatrixPath::constant(Q, true);
  s.R = MatrixPath::constant(R, true);
  if (S.size() > 0) s.S = MatrixPath::constant(S);
  s.fill_defaults();
  return ProblemData(std::move(s));
}

inline Matrix random_matrix(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(gen);
  }
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& gen, Eigen::Index n, double scale) {
  const Matrix a = random_matrix(gen, n, n, scale);
  return 0.5 * (a + a.transpose());
}

inline Matrix random_spd(std::mt19937_64& gen, Eigen::Index n, double floor, double scale) {
  const Matrix a = random_matrix(gen, n, n, scale);
  return a * a.transpose() + floor * Matrix::Identity(n, n);
}

}  // namespace slq::test
