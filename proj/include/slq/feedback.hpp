#pragma once

#include <memory>

#include "slq/matrix_path.hpp"
#include "slq/ode.hpp"

namespace slq {

/// Closed-loop strategy u = Theta(s) X + v(s), optionally with the quadratic
/// value representation V(t,x) = <P(t)x,x> + 2<eta(t),x> + c(t).
struct FeedbackLaw {
  MatrixPath Theta;  // m x n
  MatrixPath v;      // m x 1
  std::shared_ptr<const OdeTrajectory> value_P;       // n x n
  std::shared_ptr<const OdeTrajectory> value_eta;     // n x 1
  std::shared_ptr<const OdeTrajectory> value_scalar;  // 1 x 1, the integral term

  Eigen::Index m() const { return Theta.rows(); }
  Eigen::Index n() const { return Theta.cols(); }

  /// Pure state feedback with v = 0.
  static FeedbackLaw state_feedback(MatrixPath Theta) {
    FeedbackLaw law;
    law.v = MatrixPath::zero(Theta.rows(), 1);
    law.Theta = std::move(Theta);
    return law;
  }
};

}  // namespace slq
