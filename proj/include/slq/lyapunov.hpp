#pragma once

#include <memory>

#include "slq/feedback.hpp"
#include "slq/ode.hpp"
#include "slq/problem.hpp"

namespace slq {

/// Cost operator of the state feedback u = Theta X on the homogeneous problem:
///
///   P' + P(A+B Theta) + (A+B Theta)'P + (C+D Theta)'P(C+D Theta)
///      + Theta'R Theta + S'Theta + Theta'S + Q = 0,   P(T) = G,
///
/// so that J0(t, x; Theta X) = <P(t)x, x>.
OdeTrajectory solve_feedback_lyapunov(const ProblemData& p, const MatrixPath& Theta,
                                      const OdeOptions& options = {});

/// The Theta = 0 case: M0' + M0 A + A'M0 + C'M0 C + Q = 0, M0(T) = G.
OdeTrajectory solve_M0(const ProblemData& p, const OdeOptions& options = {});

/// Cost of a general law (Theta, v) on the full problem, as a backward
/// Lyapunov equation for the augmented state [X; 1]. The result Phat is
/// (n+1) x (n+1) and J(t, x; Theta X + v) = [x;1]' Phat(t) [x;1].
OdeTrajectory solve_augmented_cost(const ProblemData& p, const FeedbackLaw& law,
                                   const OdeOptions& options = {});
/// J(t, x; Theta X + v) read from solve_augmented_cost.
double feedback_cost(const ProblemData& p, const FeedbackLaw& law, double t, const Vector& x);

/// Joint first and second moments of the closed-loop state started at (t, x).
struct SecondMomentTrajectory {
  /// E[Xhat Xhat'] for Xhat = [X; 1], (n+1) x (n+1), on the grid [t, T].
  std::shared_ptr<const OdeTrajectory> Z;
  Eigen::Index n = 0;

  const TimeGrid& grid() const { return Z->grid(); }
  /// E[X X'] at node k.
  Matrix Y(std::size_t k) const { return Z->value(k).topLeftCorner(n, n); }
  /// E[X] at node k.
  Vector mean(std::size_t k) const { return Z->value(k).topRightCorner(n, 1); }
  Matrix Y_at(double s) const { return Z->at(s).topLeftCorner(n, n); }
  Vector mean_at(double s) const { return Z->at(s).topRightCorner(n, 1); }
};

SecondMomentTrajectory second_moment(const ProblemData& p, const FeedbackLaw& law, double t,
                                     const Vector& x, const OdeOptions& options = {});

/// E int_t^T |Theta X + v|^2 ds, trapezoid rule over the moment trajectory samples.
double control_l2_norm(const ProblemData& p, const FeedbackLaw& law, double t, const Vector& x);
double control_l2_norm(const FeedbackLaw& law, const SecondMomentTrajectory& moments);

/// Mean control E[u(s)] = Theta(s) E[X(s)] + v(s).
Vector mean_control(const FeedbackLaw& law, const SecondMomentTrajectory& moments, double s);

/// Fundamental matrix Phi' = A Phi, Phi(t0) = I, integrated forward.
OdeTrajectory fundamental_matrix(const ProblemData& p);

/// N(t) = Phi(t)^{-T} { P0 - int_{t0}^t Phi' [C'M0 C + Q] Phi ds } Phi(t)^{-1},
/// with the integral accumulated by the trapezoid rule on the grid nodes.
/// Throws SingularFundamentalMatrix when cond(Phi(t)) > 1e12.
OdeTrajectory lower_bound_N(const ProblemData& p, const Matrix& P0);

}  // namespace slq
