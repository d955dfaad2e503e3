#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slq/feedback.hpp"
#include "slq/ode.hpp"
#include "slq/problem.hpp"

namespace slq {

/// Residual bound a successful solve is expected to meet.
inline constexpr double kResidualTol = 1e-6;

enum class RiccatiKind { newton, epsilon, direct_D0, direct_pinv };
const char* to_string(RiccatiKind kind);

struct NewtonOptions {
  std::size_t max_iter = 50;
  /// Stop when max-node |P_i - P_{i+1}|_F <= tol * max(1, max-node |P|_F).
  double tol = 1e-6;
  /// Smallest admissible eigenvalue of R + D'P_i D.
  double uniform_floor = 1e-8;
  /// Relative slack of the monotonicity assertion P_i >= P_{i+1}.
  double monotone_slack = 1e-8;
  /// An iterate above this norm counts as divergence.
  double divergence_norm = 1e10;
  /// After convergence one more Lyapunov solve runs with the substep
  /// stability target lowered to this value (0 disables it). Early iterates
  /// can be stiff over the whole horizon; the converged gain is stiff only
  /// where the solution has a layer, so resolving it there is cheap.
  double polish_stability = 0.1;
  /// Optional first iterate replacing M0 (used by the epsilon ladder).
  std::shared_ptr<const OdeTrajectory> initial;
  OdeOptions ode;
};

struct RiccatiSolution {
  std::shared_ptr<const OdeTrajectory> P;
  RiccatiKind kind = RiccatiKind::newton;
  /// Shift of R for the epsilon kind, 0 otherwise.
  double epsilon = 0.0;
  /// Max-node Frobenius norm of the Riccati right-hand side (NaN after a blow-up).
  double residual = 0.0;
  std::size_t iterations = 0;
  /// min over nodes of the smallest eigenvalue of R + D'PD (shifted R for epsilon).
  double lambda_estimate = 0.0;
  /// min over i >= 1 and nodes of the smallest eigenvalue of P_i - P_{i+1}.
  double monotonicity_margin = std::numeric_limits<double>::infinity();
  /// Newton increments max-node |P_i - P_{i+1}|_F.
  std::vector<double> increments;

  bool blew_up() const { return P && P->blew_up(); }
  std::optional<double> blowup_time() const { return P ? P->blowup_time() : std::nullopt; }
};

enum class Regularity { strongly_regular, regular, solution_not_regular };
const char* to_string(Regularity r);

struct RegularityReport {
  bool range_ok = false;
  bool l2_ok = false;
  bool psd_ok = false;
  double strong_lambda = 0.0;
  Regularity classification = Regularity::solution_not_regular;
  /// Gain integrals on the grid and on the 4x refined grid.
  double gain_integral = 0.0;
  double gain_integral_refined = 0.0;
  /// Always set: square integrability is judged by a refinement proxy.
  bool l2_is_proxy = true;
  /// Names of the failed conditions, empty when regular.
  std::vector<std::string> failed;
};

/// R + D'PD and B'P + D'PC + S at time t.
struct RiccatiBlocks {
  Matrix K;  // m x m
  Matrix L;  // m x n
};
RiccatiBlocks riccati_blocks(const Coefficients& c, const Matrix& P);

/// Gain -(R + D'PD)^{-1}(B'P + D'PC + S) read from a trajectory; the problem
/// is captured by value so the path can outlive the caller.
MatrixPath optimal_gain(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P);
/// Same with the pseudo-inverse.
MatrixPath pseudo_gain(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P);

/// Newton iteration: Theta_i from P_i, P_{i+1} from the feedback Lyapunov
/// equation with Theta_i, starting from M0. Throws NotUniformlyConvex,
/// NoConvergence or MonotonicityViolation.
RiccatiSolution newton_riccati(const ProblemData& p, const NewtonOptions& options = {});

/// Newton iteration on the shifted problem R -> R + eps I. Any failure is
/// reported as NotConvexAtEpsilon.
RiccatiSolution epsilon_riccati(const ProblemData& p, double eps,
                                const NewtonOptions& options = {});

/// Direct backward integration of the Riccati equation when D = 0 and R >> 0.
/// A blow-up is carried in the result. Throws PreconditionD0.
RiccatiSolution direct_riccati_D0(const ProblemData& p, const OdeOptions& options = {});

/// Direct backward integration of the Riccati equation with the pseudo-inverse
/// of R + D'PD. Produces a candidate solution when R + D'PD is singular.
RiccatiSolution direct_riccati_pinv(const ProblemData& p, const OdeOptions& options = {});

/// Residual of the Riccati equation (with pseudo-inverse) at every node.
/// P' is a central difference of the dense interpolant with a step of at most
/// 1e-3 of the local sample spacing.
std::vector<double> riccati_residual_profile(const ProblemData& p, const OdeTrajectory& P);
/// Max of the profile over nodes k >= skip_fraction * n_steps.
double riccati_residual(const ProblemData& p, const OdeTrajectory& P, double skip_fraction = 0.0);

RegularityReport classify_regularity(const ProblemData& p, const RiccatiSolution& sol);

}  // namespace slq
