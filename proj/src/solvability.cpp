#include "slq/solvability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/matrix_kit.hpp"

namespace slq {

const char* to_string(Finite v) {
  switch (v) {
    case Finite::yes: return "yes";
    case Finite::no: return "no";
    case Finite::undetermined: return "undetermined";
  }
  return "unknown";
}

const char* to_string(OpenLoop v) {
  switch (v) {
    case OpenLoop::solvable: return "solvable";
    case OpenLoop::not_solvable: return "not_solvable";
    case OpenLoop::undetermined: return "undetermined";
  }
  return "unknown";
}

const char* to_string(ClosedLoop v) {
  switch (v) {
    case ClosedLoop::solvable: return "solvable";
    case ClosedLoop::not_solvable_numerically: return "not_solvable_numerically";
    case ClosedLoop::undetermined: return "undetermined";
  }
  return "unknown";
}

std::vector<double> LadderConfig::epsilons() const {
  std::vector<double> out;
  double e = eps_start;
  for (std::size_t k = 0; k < count; ++k, e *= eps_factor) out.push_back(e);
  return out;
}

EpsilonLadder run_ladder(const ProblemData& p, const LadderConfig& config) {
  if (!(config.eps_start > 0.0) || !(config.eps_factor > 0.0 && config.eps_factor < 1.0) ||
      config.count == 0) {
    throw PreconditionError("ladder: need eps_start > 0, 0 < eps_factor < 1, count >= 1");
  }
  EpsilonLadder ladder;
  ladder.config = config;
  std::shared_ptr<const OdeTrajectory> previous;
  for (double eps : config.epsilons()) {
    NewtonOptions opts = config.newton;
    if (config.warm_start && previous) opts.initial = previous;
    RiccatiSolution sol;
    try {
      sol = epsilon_riccati(p, eps, opts);
    } catch (const NotConvexAtEpsilon& e) {
      ladder.nonconvex_eps = eps;
      ladder.failure = e.what();
      break;
    }
    previous = sol.P;
    const double level = min_eigenvalue(sol.P->value(0));
    ladder.epsilons.push_back(eps);
    ladder.solutions.push_back(std::move(sol));
    ladder.P0_min_eigs.push_back(level);
    if (level < -config.divergence) {
      ladder.stopped_early = true;
      break;
    }
  }
  return ladder;
}

namespace {

Finite decide_levels(const std::vector<double>& levels, const LadderConfig& cfg,
                     std::string& reason) {
  const std::size_t n = levels.size();
  if (n == 0) {
    reason = "no ladder rung was solved";
    return Finite::undetermined;
  }
  const double low = *std::min_element(levels.begin(), levels.end());
  if (low < -cfg.divergence) {
    reason = "level " + std::to_string(low) + " below -" + std::to_string(cfg.divergence);
    return Finite::no;
  }
  auto dec = [&](std::size_t i) { return levels[i - 1] - levels[i]; };
  if (n >= 4 && dec(n - 1) > cfg.bound_tol && dec(n - 1) > dec(n - 2) &&
      dec(n - 2) > dec(n - 3)) {
    reason = "decrements grow along the ladder tail";
    return Finite::no;
  }
  if (n >= 2 && std::abs(dec(n - 1)) < cfg.bound_tol) {
    reason = "last decrement " + std::to_string(dec(n - 1)) + " below " +
             std::to_string(cfg.bound_tol);
    return Finite::yes;
  }
  reason = "neither the boundedness nor the divergence test fired";
  return Finite::undetermined;
}

// Node-wise Aitken extrapolation of the last three rungs.
std::shared_ptr<const OdeTrajectory> extrapolate(const EpsilonLadder& ladder) {
  const auto& s = ladder.solutions;
  const std::size_t n = s.size();
  const auto& last = *s.back().P;
  if (n < 3) return s.back().P;
  const auto& a = *s[n - 3].P;
  const auto& b = *s[n - 2].P;
  const TimeGrid& grid = last.grid();
  std::vector<Matrix> values;
  values.reserve(grid.n_nodes());
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    const Matrix d0 = a.value(k) - b.value(k);
    const Matrix d1 = b.value(k) - last.value(k);
    Matrix v = last.value(k);
    const double n0 = d0.norm(), n1 = d1.norm();
    if (n0 > 1e-14) {
      const double q = n1 / n0;
      if (q > 0.0 && q < 0.95) v -= d1 * (q / (1.0 - q));
    }
    values.push_back(sym(v));
  }
  return std::make_shared<const OdeTrajectory>(OdeTrajectory::from_nodes(grid, std::move(values)));
}

}  // namespace

Finite finiteness_at(const EpsilonLadder& ladder, double t, std::string* reason) {
  std::string why;
  Finite verdict;
  if (ladder.nonconvex_eps) {
    why = "shifted problem not convex at eps=" + std::to_string(*ladder.nonconvex_eps);
    verdict = Finite::no;
  } else {
    std::vector<double> levels;
    for (const auto& s : ladder.solutions) levels.push_back(min_eigenvalue(s.P->at(t)));
    verdict = decide_levels(levels, ladder.config, why);
  }
  if (reason) *reason = why;
  return verdict;
}

FinitenessResult finiteness_from_ladder(EpsilonLadder ladder) {
  FinitenessResult out;
  if (ladder.nonconvex_eps) {
    out.verdict = Finite::no;
    out.reason = "shifted problem not convex at eps=" + std::to_string(*ladder.nonconvex_eps);
  } else {
    out.verdict = decide_levels(ladder.P0_min_eigs, ladder.config, out.reason);
  }
  if (out.verdict == Finite::yes) out.P_limit = extrapolate(ladder);
  out.ladder = std::move(ladder);
  return out;
}

FinitenessResult finiteness(const ProblemData& p, const LadderConfig& config) {
  // P_eps does not depend on the inhomogeneous terms.
  const ProblemData h = p.homogeneous() ? p : p.homogeneous_part();
  return finiteness_from_ladder(run_ladder(h, config));
}

namespace {

std::shared_ptr<const OdeTrajectory> zero_trajectory(const TimeGrid& grid, Eigen::Index rows) {
  return std::make_shared<const OdeTrajectory>(OdeTrajectory::from_function(
      grid, [rows](double) { return Matrix::Zero(rows, 1); },
      [rows](double) { return Matrix::Zero(rows, 1); }));
}

FeedbackLaw synthesize(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P, bool pinv) {
  FeedbackLaw law;
  law.Theta = pinv ? pseudo_gain(p, P) : optimal_gain(p, P);
  law.value_P = P;
  const TimeGrid& grid = p.grid();
  if (p.homogeneous()) {
    law.v = MatrixPath::zero(p.m(), 1);
    law.value_eta = zero_trajectory(grid, p.n());
    law.value_scalar = zero_trajectory(grid, 1);
    return law;
  }

  auto pp = std::make_shared<const ProblemData>(p);
  auto inverse = [pinv](const Matrix& K) -> Matrix {
    if (pinv) return pseudo_inverse(K);
    return K.ldlt().solve(Matrix::Identity(K.rows(), K.cols()));
  };

  Coefficients scratch;
  OdeOptions opts;
  auto eta_rhs = [&](double t, const Matrix& eta) -> Matrix {
    const auto& c = pp->coefficients(t, scratch);
    const Matrix Pt = P->at(t);
    const auto b = riccati_blocks(c, Pt);
    const Matrix Th = -inverse(b.K) * b.L;
    return -((c.A + c.B * Th).transpose() * eta + (c.C + c.D * Th).transpose() * Pt * c.sigma +
             Th.transpose() * c.rho + Pt * c.b + c.q);
  };
  auto eta = std::make_shared<const OdeTrajectory>(
      integrate_matrix_ode(eta_rhs, p.g(), grid, Direction::backward, opts));
  if (eta->blew_up()) throw NonFiniteValue("eta equation escapes the norm bound");

  auto xi_of = [](const Coefficients& c, const Matrix& Pt, const Matrix& e) -> Matrix {
    return c.B.transpose() * e + c.D.transpose() * Pt * c.sigma + c.rho;
  };
  auto c_rhs = [&](double t, const Matrix&) -> Matrix {
    const auto& c = pp->coefficients(t, scratch);
    const Matrix Pt = P->at(t);
    const Matrix e = eta->at(t);
    const auto b = riccati_blocks(c, Pt);
    const Matrix xi = xi_of(c, Pt, e);
    const double val = (c.sigma.transpose() * Pt * c.sigma).value() +
                       2.0 * (e.transpose() * c.b).value() -
                       (xi.transpose() * inverse(b.K) * xi).value();
    return Matrix::Constant(1, 1, -val);
  };
  law.value_scalar = std::make_shared<const OdeTrajectory>(
      integrate_matrix_ode(c_rhs, Matrix::Zero(1, 1), grid, Direction::backward, opts));
  law.value_eta = eta;
  law.v = MatrixPath::function(p.m(), 1, [pp, P, eta, inverse, xi_of](double t) -> Matrix {
    Coefficients sc;
    const auto& c = pp->coefficients(t, sc);
    const Matrix Pt = P->at(t);
    const auto b = riccati_blocks(c, Pt);
    return -inverse(b.K) * xi_of(c, Pt, eta->at(t));
  });
  return law;
}

}  // namespace

FeedbackLaw synthesize_law(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P) {
  return synthesize(p, std::move(P), false);
}

namespace {

// Blow-up before t0, or a level at t0 below the ladder's divergence threshold:
// the solution escapes to -infinity at (or numerically indistinguishably
// close to) the initial time.
bool escapes(const RiccatiSolution& sol) {
  if (sol.blew_up()) return true;
  return min_eigenvalue(sol.P->front()) < -LadderConfig{}.divergence;
}

}  // namespace

ClosedLoopResult closed_loop_solve(const ProblemData& p, const NewtonOptions& options) {
  ClosedLoopResult out;
  std::string newton_failure;
  try {
    auto sol = newton_riccati(p, options);
    out.route = "newton";
    if (escapes(sol)) {
      out.solution = std::move(sol);
      out.verdict = ClosedLoop::not_solvable_numerically;
      out.cited.push_back("finiteness");
      out.reason = "Riccati solution from the Newton iteration escapes to -infinity at t0";
      return out;
    }
    out.law = synthesize(p, sol.P, false);
    out.regularity = classify_regularity(p, sol);
    out.solution = std::move(sol);
    out.verdict = ClosedLoop::solvable;
    out.reason = "strongly regular solution from the Newton iteration";
    return out;
  } catch (const SolverError& e) {
    newton_failure = e.what();
  } catch (const NonFiniteValue& e) {
    newton_failure = e.what();
  }

  // D = 0 and R >> 0: the Riccati equation is solvable iff the problem is finite.
  try {
    auto sol = direct_riccati_D0(p, options.ode);
    out.route = "direct_D0";
    if (escapes(sol)) {
      out.solution = std::move(sol);
      out.verdict = ClosedLoop::not_solvable_numerically;
      out.cited.push_back("finiteness");
      out.reason = "Riccati solution with D = 0 escapes to -infinity before " +
                   std::to_string(p.grid().t0());
      return out;
    }
    out.law = synthesize(p, sol.P, false);
    out.regularity = classify_regularity(p, sol);
    out.solution = std::move(sol);
    out.verdict = ClosedLoop::solvable;
    out.reason = "Newton failed (" + newton_failure + "); D = 0 route produced a solution";
    return out;
  } catch (const PreconditionD0&) {
    // not applicable
  } catch (const Error& e) {
    out.reason = std::string("D = 0 route failed: ") + e.what();
  }

  // Candidate solution with the pseudo-inverse, judged by the regularity conditions.
  try {
    auto sol = direct_riccati_pinv(p, options.ode);
    out.route = "direct_pinv";
    if (sol.blew_up()) {
      out.verdict = ClosedLoop::undetermined;
      out.reason = "Newton failed (" + newton_failure + ") and the candidate solution escapes";
      out.solution = std::move(sol);
      return out;
    }
    auto rep = classify_regularity(p, sol);
    if (rep.classification == Regularity::solution_not_regular ||
        !(sol.residual <= 1e-4)) {
      out.verdict = ClosedLoop::not_solvable_numerically;
      out.cited = rep.failed;
      if (!(sol.residual <= 1e-4)) out.cited.push_back("residual");
      out.reason = "candidate Riccati solution is not regular";
    } else {
      out.law = synthesize(p, sol.P, true);
      out.verdict = ClosedLoop::solvable;
      out.reason = "regular (not strongly regular) solution with the pseudo-inverse";
    }
    out.regularity = std::move(rep);
    out.solution = std::move(sol);
  } catch (const Error& e) {
    out.verdict = ClosedLoop::undetermined;
    out.reason = "Newton failed (" + newton_failure + "); candidate route failed: " + e.what();
  }
  return out;
}

namespace {

bool flat_tail(const std::vector<double>& v, double rel) {
  const std::size_t n = v.size();
  if (n < 3) return false;
  for (std::size_t i = n - 2; i < n; ++i) {
    const double scale = std::max(std::abs(v[i]), 1e-300);
    if (std::abs(v[i] - v[i - 1]) > rel * scale) return false;
  }
  return true;
}

bool growing_tail(const std::vector<double>& v, double divergence) {
  const std::size_t n = v.size();
  if (n >= 1 && v.back() > divergence) return true;
  if (n < 4) return false;
  for (std::size_t i = n - 3; i < n; ++i) {
    if (!(v[i] > v[i - 1] * (1.0 + 1e-3))) return false;
  }
  return v[n - 1] - v[n - 2] >= v[n - 2] - v[n - 3] && v[n - 2] - v[n - 3] >= v[n - 3] - v[n - 4];
}

}  // namespace

OpenLoopResult open_loop_check(const ProblemData& p, const EpsilonLadder& ladder, double t,
                               const Vector& x) {
  if (x.size() != p.n()) throw DimensionError("open_loop_check: x has the wrong size");
  OpenLoopResult out;
  out.t = t;
  out.x = x;
  std::string why;
  const Finite fin = finiteness_at(ladder, t, &why);
  if (fin == Finite::no) {
    out.verdict = OpenLoop::not_solvable;
    out.reason = "value is -infinity at t (" + why + ")";
    return out;
  }
  if (fin == Finite::undetermined) {
    out.verdict = OpenLoop::undetermined;
    out.reason = "finiteness undetermined at t (" + why + ")";
    return out;
  }

  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const double eps = ladder.epsilons[k];
    const ProblemData shifted = p.with_control_penalty(eps);
    FeedbackLaw law = synthesize(shifted, ladder.solutions[k].P, false);
    const auto moments = second_moment(p, law, t, x);
    out.epsilons.push_back(eps);
    out.norms.push_back(control_l2_norm(law, moments));
    out.costs.push_back(feedback_cost(p, law, t, x));
    if (k + 1 == ladder.size()) {
      const auto& g = moments.grid();
      for (std::size_t j = 0; j < g.n_nodes(); ++j) {
        out.limit_control_times.push_back(g.node(j));
        out.limit_control_mean.push_back(mean_control(law, moments, g.node(j)));
      }
      out.limit_law = std::move(law);
    }
  }
  if (out.norms.empty()) {
    out.verdict = OpenLoop::undetermined;
    out.reason = "empty ladder";
    return out;
  }
  const double divergence = ladder.config.divergence;
  if (out.norms.back() <= 1e-24 || flat_tail(out.norms, 1e-3)) {
    out.verdict = OpenLoop::solvable;
    out.limit_control_norm = out.norms.back();
    out.reason = "minimizing-sequence norms settle";
  } else if (growing_tail(out.norms, divergence)) {
    out.verdict = OpenLoop::not_solvable;
    out.reason = "minimizing-sequence norms grow without settling";
  } else {
    out.verdict = OpenLoop::undetermined;
    out.reason = "minimizing-sequence norms neither settle nor grow";
  }
  return out;
}

OpenLoopResult open_loop_check(const ProblemData& p, double t, const Vector& x,
                               const LadderConfig& config) {
  return open_loop_check(p, run_ladder(p.homogeneous() ? p : p.homogeneous_part(), config), t, x);
}

ThetaNormResult theta_norm_criterion(const ProblemData& p, const EpsilonLadder& ladder) {
  ThetaNormResult out;
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const ProblemData shifted = p.with_control_penalty(ladder.epsilons[k]);
    Coefficients scratch;
    const double val = integrate_dense(
        *ladder.solutions[k].P, [&](double t, const Eigen::Ref<const Matrix>& P) {
          const auto b = riccati_blocks(shifted.coefficients(t, scratch), P);
          return b.K.ldlt().solve(b.L).squaredNorm();
        });
    out.norms.push_back(val);
    out.sup_norm = std::max(out.sup_norm, val);
  }
  const std::size_t n = out.norms.size();
  out.bounded = n > 0 && out.sup_norm < 1e6;
  for (std::size_t i = n >= 3 ? n - 2 : 1; out.bounded && i < n; ++i) {
    if (out.norms[i] > out.norms[i - 1] * (1.0 + 1e-3) + 1e-12) out.bounded = false;
  }
  return out;
}

CertificateResult delta_certificate(const ProblemData& p, const MatrixPath& Delta,
                                    std::optional<Matrix> terminal) {
  const TimeGrid& grid = p.grid();
  if (Delta.rows() != p.n() || Delta.cols() != p.n()) {
    throw DimensionError("certificate: Delta must be n x n");
  }
  for (double t : grid.nodes()) {
    if (!(min_eigenvalue(sym(Delta(t))) > 1e-10)) {
      throw PreconditionDelta("certificate: Delta is not uniformly positive definite");
    }
  }
  const Matrix PT = terminal ? *terminal : p.G();
  if (PT.rows() != p.n() || PT.cols() != p.n()) throw DimensionError("certificate: bad terminal");

  Coefficients scratch;
  auto rhs = [&](double t, const Matrix& P) -> Matrix {
    const auto& c = p.coefficients(t, scratch);
    return -(P * c.A + c.A.transpose() * P + c.C.transpose() * P * c.C + c.Q) + Delta(t);
  };
  OdeOptions opts;
  opts.symmetric = true;
  CertificateResult out;
  out.P = std::make_shared<const OdeTrajectory>(
      integrate_matrix_ode(rhs, PT, grid, Direction::backward, opts));
  if (out.P->blew_up()) return out;

  out.holds = true;
  out.lambda_psd = true;
  out.margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    const double t = grid.node(k);
    const auto b = riccati_blocks(p.coefficients(t, scratch), out.P->value(k));
    const Matrix Dl = sym(Delta(t));
    const Matrix gap = sym(b.K - b.L * Dl.ldlt().solve(b.L.transpose()));
    const double e = min_eigenvalue(gap);
    out.margin = std::min(out.margin, e);
    if (e < -kPsdTol) out.holds = false;
    if (!schur_psd_test(Dl, b.L, b.K)) out.lambda_psd = false;
  }
  return out;
}

NecessaryConditionResult necessary_condition_RDMD(const ProblemData& p) {
  const OdeTrajectory M0 = solve_M0(p);
  NecessaryConditionResult out;
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  Coefficients scratch;
  for (std::size_t k = M0.first_node(); k <= M0.last_node(); ++k) {
    const auto& c = p.coefficients(p.grid().node(k), scratch);
    const Matrix K = sym(c.R + c.D.transpose() * M0.value(k) * c.D);
    out.min_eigenvalue = std::min(out.min_eigenvalue, min_eigenvalue(K));
  }
  out.holds = !M0.blew_up() && out.min_eigenvalue >= -kPsdTol;
  out.closed_loop_by_structure = out.holds && p.B().is_exactly_zero() &&
                                 p.C().is_exactly_zero() && p.S().is_exactly_zero();
  return out;
}

double value_function(const FeedbackLaw& law, double t, const Vector& x) {
  double v = x.dot(law.value_P->at(t) * x);
  if (law.value_eta) v += 2.0 * x.dot(law.value_eta->at(t).col(0));
  if (law.value_scalar) v += law.value_scalar->at(t)(0, 0);
  return v;
}

bool limit_convexity_check(const ProblemData& p, const OdeTrajectory& P_limit, double lambda) {
  if (!(lambda > 0.0)) throw PreconditionError("limit_convexity_check: lambda must be positive");
  Coefficients scratch;
  for (std::size_t k = P_limit.first_node(); k <= P_limit.last_node(); ++k) {
    const auto& c = p.coefficients(p.grid().node(k), scratch);
    if (min_eigenvalue(riccati_blocks(c, P_limit.value(k)).K) < lambda - 1e-9) return false;
  }
  return !P_limit.blew_up() && riccati_residual(p, P_limit) <= 1e-4;
}

}  // namespace slq
