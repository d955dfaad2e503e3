#include <algorithm>
#include "slq/lyapunov.hpp"

#include <cmath>

#include "slq/errors.hpp"

namespace slq {

namespace {

double closed_loop_rate(const Matrix& At, const Matrix& Ct) {
  return 2.0 * At.norm() + Ct.squaredNorm();
}

void check_law(const ProblemData& p, const FeedbackLaw& law) {
  if (law.Theta.rows() != p.m() || law.Theta.cols() != p.n()) {
    throw DimensionError("feedback gain must be m x n");
  }
  if (law.v.rows() != p.m() || law.v.cols() != 1) {
    throw DimensionError("feedback offset must be m x 1");
  }
}

// Drift and diffusion matrices of the augmented closed-loop state [X; 1].
void augmented(const Coefficients& c, const Matrix& Theta, const Matrix& v, Matrix& Ahat,
               Matrix& Chat) {
  const auto n = c.A.rows();
  Ahat.setZero(n + 1, n + 1);
  Chat.setZero(n + 1, n + 1);
  Ahat.topLeftCorner(n, n) = c.A + c.B * Theta;
  Ahat.topRightCorner(n, 1) = c.B * v + c.b;
  Chat.topLeftCorner(n, n) = c.C + c.D * Theta;
  Chat.topRightCorner(n, 1) = c.D * v + c.sigma;
}

}  // namespace

OdeTrajectory solve_feedback_lyapunov(const ProblemData& p, const MatrixPath& Theta,
                                      const OdeOptions& options) {
  if (Theta.rows() != p.m() || Theta.cols() != p.n()) {
    throw DimensionError("feedback gain must be m x n");
  }
  Coefficients scratch;
  const bool zero_gain = Theta.is_exactly_zero();
  auto rhs = [&](double t, const Matrix& P) -> Matrix {
    const auto& c = p.coefficients(t, scratch);
    if (zero_gain) return -(P * c.A + c.A.transpose() * P + c.C.transpose() * P * c.C + c.Q);
    const Matrix Th = Theta(t);
    const Matrix At = c.A + c.B * Th;
    const Matrix Ct = c.C + c.D * Th;
    const Matrix STh = c.S.transpose() * Th;
    return -(P * At + At.transpose() * P + Ct.transpose() * P * Ct +
             Th.transpose() * c.R * Th + STh + STh.transpose() + c.Q);
  };
  OdeOptions opts = options;
  opts.symmetric = true;
  Coefficients scratch2;
  opts.stiffness = [&](double t, const Matrix&) {
    const auto& c = p.coefficients(t, scratch2);
    if (zero_gain) return closed_loop_rate(c.A, c.C);
    const Matrix Th = Theta(t);
    return closed_loop_rate(c.A + c.B * Th, c.C + c.D * Th);
  };
  return integrate_matrix_ode(rhs, p.G(), p.grid(), Direction::backward, opts);
}

OdeTrajectory solve_M0(const ProblemData& p, const OdeOptions& options) {
  return solve_feedback_lyapunov(p, MatrixPath::zero(p.m(), p.n()), options);
}

OdeTrajectory solve_augmented_cost(const ProblemData& p, const FeedbackLaw& law,
                                   const OdeOptions& options) {
  check_law(p, law);
  const auto n = p.n();
  Coefficients scratch;
  Matrix Ahat, Chat;
  auto weight = [&](const Coefficients& c, const Matrix& Th, const Matrix& v) {
    Matrix K(p.m(), n + 1);
    K << Th, v;
    Matrix Ex = Matrix::Zero(n, n + 1);
    Ex.leftCols(n).setIdentity();
    const Matrix SK = Ex.transpose() * c.S.transpose() * K;
    Matrix W = Ex.transpose() * c.Q * Ex + SK + SK.transpose() + K.transpose() * c.R * K;
    const Vector lin = Ex.transpose() * c.q + K.transpose() * c.rho;
    W.col(n) += lin;
    W.row(n) += lin.transpose();
    return W;
  };
  auto rhs = [&](double t, const Matrix& P) -> Matrix {
    const auto& c = p.coefficients(t, scratch);
    const Matrix Th = law.Theta(t);
    const Matrix v = law.v(t);
    augmented(c, Th, v, Ahat, Chat);
    return -(P * Ahat + Ahat.transpose() * P + Chat.transpose() * P * Chat + weight(c, Th, v));
  };
  OdeOptions opts = options;
  opts.symmetric = true;
  Coefficients scratch2;
  opts.stiffness = [&](double t, const Matrix&) {
    const auto& c = p.coefficients(t, scratch2);
    const Matrix Th = law.Theta(t);
    return closed_loop_rate(c.A + c.B * Th, c.C + c.D * Th);
  };
  Matrix Ghat = Matrix::Zero(n + 1, n + 1);
  Ghat.topLeftCorner(n, n) = p.G();
  Ghat.topRightCorner(n, 1) = p.g();
  Ghat.bottomLeftCorner(1, n) = p.g().transpose();
  return integrate_matrix_ode(rhs, Ghat, p.grid(), Direction::backward, opts);
}

double feedback_cost(const ProblemData& p, const FeedbackLaw& law, double t, const Vector& x) {
  const OdeTrajectory P = solve_augmented_cost(p, law);
  Vector xh(p.n() + 1);
  xh << x, 1.0;
  return xh.dot(P.at(t) * xh);
}

SecondMomentTrajectory second_moment(const ProblemData& p, const FeedbackLaw& law, double t,
                                     const Vector& x, const OdeOptions& options) {
  check_law(p, law);
  if (x.size() != p.n()) throw DimensionError("initial state must have length n");
  const auto n = p.n();
  Coefficients scratch;
  Matrix Ahat, Chat;
  auto rhs = [&](double s, const Matrix& Z) -> Matrix {
    const auto& c = p.coefficients(s, scratch);
    augmented(c, law.Theta(s), law.v(s), Ahat, Chat);
    return Ahat * Z + Z * Ahat.transpose() + Chat * Z * Chat.transpose();
  };
  OdeOptions opts = options;
  opts.symmetric = true;
  // Norms and mean controls are read off small entries of Z, so stiff decay
  // has to be resolved, not merely kept stable.
  opts.stability = std::min(opts.stability, 0.1);
  Coefficients scratch2;
  opts.stiffness = [&](double s, const Matrix&) {
    const auto& c = p.coefficients(s, scratch2);
    const Matrix Th = law.Theta(s);
    return closed_loop_rate(c.A + c.B * Th, c.C + c.D * Th);
  };
  Matrix Z0(n + 1, n + 1);
  Z0.topLeftCorner(n, n) = x * x.transpose();
  Z0.topRightCorner(n, 1) = x;
  Z0.bottomLeftCorner(1, n) = x.transpose();
  Z0(n, n) = 1.0;
  SecondMomentTrajectory out;
  out.n = n;
  out.Z = std::make_shared<const OdeTrajectory>(
      integrate_matrix_ode(rhs, Z0, p.grid().tail_from(t), Direction::forward, opts));
  return out;
}

double control_l2_norm(const FeedbackLaw& law, const SecondMomentTrajectory& moments) {
  const auto n = moments.n;
  const auto m = law.Theta.rows();
  Matrix K(m, n + 1);
  return integrate_dense(*moments.Z, [&](double s, const Matrix& Z) {
    K << law.Theta(s), law.v(s);
    return std::max(0.0, (K * Z * K.transpose()).trace());
  });
}

double control_l2_norm(const ProblemData& p, const FeedbackLaw& law, double t, const Vector& x) {
  return control_l2_norm(law, second_moment(p, law, t, x));
}

Vector mean_control(const FeedbackLaw& law, const SecondMomentTrajectory& moments, double s) {
  return law.Theta(s) * moments.mean_at(s) + law.v(s).col(0);
}

OdeTrajectory fundamental_matrix(const ProblemData& p) {
  Coefficients scratch;
  auto rhs = [&](double t, const Matrix& Phi) -> Matrix {
    return p.coefficients(t, scratch).A * Phi;
  };
  Coefficients scratch2;
  OdeOptions opts;
  opts.stiffness = [&](double t, const Matrix&) { return p.coefficients(t, scratch2).A.norm(); };
  return integrate_matrix_ode(rhs, Matrix::Identity(p.n(), p.n()), p.grid(), Direction::forward,
                              opts);
}

OdeTrajectory lower_bound_N(const ProblemData& p, const Matrix& P0) {
  if (P0.rows() != p.n() || P0.cols() != p.n()) throw DimensionError("P0 must be n x n");
  const OdeTrajectory Phi = fundamental_matrix(p);
  const OdeTrajectory M0 = solve_M0(p);
  const auto& grid = p.grid();
  if (Phi.blew_up() || M0.blew_up()) {
    throw NonFiniteValue("lower bound: fundamental matrix or M0 escaped the norm bound");
  }
  Coefficients scratch;
  auto integrand = [&](std::size_t k) {
    const auto& c = p.coefficients(grid.node(k), scratch);
    const Matrix& F = Phi.value(k);
    return Matrix(F.transpose() * (c.C.transpose() * M0.value(k) * c.C + c.Q) * F);
  };
  std::vector<Matrix> N;
  N.reserve(grid.n_nodes());
  Matrix acc = Matrix::Zero(p.n(), p.n());
  Matrix prev = integrand(0);
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    if (k > 0) {
      const Matrix cur = integrand(k);
      acc += 0.5 * grid.h() * (prev + cur);
      prev = cur;
    }
    const Matrix& F = Phi.value(k);
    Eigen::JacobiSVD<Matrix> svd(F);
    const auto& sv = svd.singularValues();
    const double cond = sv(0) / sv(sv.size() - 1);
    if (!std::isfinite(cond) || cond > 1e12) {
      throw SingularFundamentalMatrix("fundamental matrix is numerically singular at t=" +
                                      std::to_string(grid.node(k)));
    }
    const Matrix Finv = F.inverse();
    N.push_back(sym(Finv.transpose() * (P0 - acc) * Finv));
  }
  return OdeTrajectory::from_nodes(grid, std::move(N));
}

}  // namespace slq
