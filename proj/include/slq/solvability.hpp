#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "slq/feedback.hpp"
#include "slq/problem.hpp"
#include "slq/riccati.hpp"

namespace slq {

enum class Finite { yes, no, undetermined };
enum class OpenLoop { solvable, not_solvable, undetermined };
enum class ClosedLoop { solvable, not_solvable_numerically, undetermined };
const char* to_string(Finite v);
const char* to_string(OpenLoop v);
const char* to_string(ClosedLoop v);

struct LadderConfig {
  double eps_start = 1.0;
  double eps_factor = 0.5;
  std::size_t count = 20;
  /// Boundedness test: last decrement of the level below this.
  double bound_tol = 1e-3;
  /// Divergence test: level below -divergence. Also stops the ladder early.
  double divergence = 1e6;
  /// Start each rung from the previous rung's solution instead of M0.
  bool warm_start = true;
  NewtonOptions newton;

  std::vector<double> epsilons() const;
};

/// Solutions of the shifted Riccati equations for a decreasing sequence of eps.
struct EpsilonLadder {
  LadderConfig config;
  std::vector<double> epsilons;
  std::vector<RiccatiSolution> solutions;
  /// Smallest eigenvalue of P_eps(t0) per solved rung.
  std::vector<double> P0_min_eigs;
  /// Set when some rung failed with NotConvexAtEpsilon.
  std::optional<double> nonconvex_eps;
  std::string failure;
  bool stopped_early = false;

  std::size_t size() const { return solutions.size(); }
};

EpsilonLadder run_ladder(const ProblemData& p, const LadderConfig& config = {});

struct FinitenessResult {
  Finite verdict = Finite::undetermined;
  /// Node-wise extrapolated limit of P_eps; set when verdict is yes.
  std::shared_ptr<const OdeTrajectory> P_limit;
  EpsilonLadder ladder;
  std::string reason;
};

/// Finiteness of the homogeneous problem from the eps-ladder levels at t0.
FinitenessResult finiteness(const ProblemData& p, const LadderConfig& config = {});
FinitenessResult finiteness_from_ladder(EpsilonLadder ladder);
/// The same decision rule applied to the levels min eig P_eps(t).
Finite finiteness_at(const EpsilonLadder& ladder, double t, std::string* reason = nullptr);

/// Optimal law from a Riccati solution of `p`: Theta = -K^{-1}L, eta from its
/// backward equation, v = -K^{-1}(B'eta + D'P sigma + rho) and the scalar value term.
FeedbackLaw synthesize_law(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P);

struct ClosedLoopResult {
  ClosedLoop verdict = ClosedLoop::undetermined;
  std::optional<FeedbackLaw> law;
  std::optional<RiccatiSolution> solution;
  std::optional<RegularityReport> regularity;
  /// Route that produced the candidate: newton, direct_D0 or direct_pinv.
  std::string route;
  /// Failed conditions behind a negative verdict.
  std::vector<std::string> cited;
  std::string reason;
};

ClosedLoopResult closed_loop_solve(const ProblemData& p, const NewtonOptions& options = {});

struct OpenLoopResult {
  OpenLoop verdict = OpenLoop::undetermined;
  double t = 0.0;
  Vector x;
  std::vector<double> epsilons;
  /// E int |u_eps|^2 per rung.
  std::vector<double> norms;
  /// J(t, x; u_eps) per rung, from the feedback cost equation.
  std::vector<double> costs;
  std::optional<double> limit_control_norm;
  /// Law of the last rung and its mean control on the moment samples.
  std::optional<FeedbackLaw> limit_law;
  std::vector<double> limit_control_times;
  std::vector<Vector> limit_control_mean;
  std::string reason;
};

OpenLoopResult open_loop_check(const ProblemData& p, double t, const Vector& x,
                               const LadderConfig& config = {});
/// Reuses a computed ladder (the finiteness verdict at t is recomputed from it).
OpenLoopResult open_loop_check(const ProblemData& p, const EpsilonLadder& ladder, double t,
                               const Vector& x);

struct ThetaNormResult {
  bool bounded = false;
  double sup_norm = 0.0;
  std::vector<double> norms;
};
/// int |Theta_eps|_F^2 ds per rung; bounded when the tail is flat or decreasing below 1e6.
ThetaNormResult theta_norm_criterion(const ProblemData& p, const EpsilonLadder& ladder);

struct CertificateResult {
  bool holds = false;
  bool lambda_psd = false;
  /// min over nodes of the smallest eigenvalue of K - L Delta^{-1} L'.
  double margin = 0.0;
  std::shared_ptr<const OdeTrajectory> P;
};
/// P' = -(PA + A'P + C'PC + Q) + Delta backward from P(T) = terminal (G by
/// default), then K - L Delta^{-1} L' >= 0 and the Lambda block test at every
/// node. Throws PreconditionDelta when Delta is not uniformly positive definite.
CertificateResult delta_certificate(const ProblemData& p, const MatrixPath& Delta,
                                    std::optional<Matrix> terminal = std::nullopt);

struct NecessaryConditionResult {
  bool holds = false;
  double min_eigenvalue = 0.0;
  /// B = C = S = 0 and the condition holds: closed-loop solvable.
  bool closed_loop_by_structure = false;
};
/// R + D'M0 D >= 0 at every node.
NecessaryConditionResult necessary_condition_RDMD(const ProblemData& p);

/// <P(t)x,x> + 2<eta(t),x> + c(t).
double value_function(const FeedbackLaw& law, double t, const Vector& x);

/// R + D'P D >= lambda I at every node and the residual of P below 1e-4.
bool limit_convexity_check(const ProblemData& p, const OdeTrajectory& P_limit, double lambda);

}  // namespace slq
