#include "slq/riccati.hpp"

#include <algorithm>
#include <cmath>

#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/matrix_kit.hpp"

namespace slq {

const char* to_string(RiccatiKind kind) {
  switch (kind) {
    case RiccatiKind::newton: return "newton";
    case RiccatiKind::epsilon: return "epsilon";
    case RiccatiKind::direct_D0: return "direct_D0";
    case RiccatiKind::direct_pinv: return "direct_pinv";
  }
  return "unknown";
}

const char* to_string(Regularity r) {
  switch (r) {
    case Regularity::strongly_regular: return "strongly_regular";
    case Regularity::regular: return "regular";
    case Regularity::solution_not_regular: return "solution_not_regular";
  }
  return "unknown";
}

RiccatiBlocks riccati_blocks(const Coefficients& c, const Matrix& P) {
  RiccatiBlocks b;
  const Matrix PD = P * c.D;
  b.K = sym(c.R + c.D.transpose() * PD);
  b.L = c.B.transpose() * P + PD.transpose() * c.C + c.S;
  return b;
}

namespace {

Matrix solve_spd(const Matrix& K, const Matrix& L) {
  if (K.rows() == 1) return L / K(0, 0);
  return K.ldlt().solve(L);
}

MatrixPath gain_path(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P, bool pinv) {
  auto pp = std::make_shared<const ProblemData>(p);
  return MatrixPath::function(p.m(), p.n(), [pp, P = std::move(P), pinv](double t) -> Matrix {
    Coefficients scratch;
    const auto& c = pp->coefficients(t, scratch);
    const auto b = riccati_blocks(c, P->at(t));
    if (pinv) return -pseudo_inverse(b.K) * b.L;
    return -solve_spd(b.K, b.L);
  });
}

// min over covered nodes of the smallest eigenvalue of R + D'PD.
double min_uniform_eigenvalue(const ProblemData& p, const OdeTrajectory& P) {
  Coefficients scratch;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t k = P.first_node(); k <= P.last_node(); ++k) {
    const auto& c = p.coefficients(p.grid().node(k), scratch);
    worst = std::min(worst, min_eigenvalue(riccati_blocks(c, P.value(k)).K));
  }
  return worst;
}

// Riccati right-hand side Pdot = -(PA + A'P + C'PC + Q) + L' K^+ L.
Matrix riccati_rhs(const Coefficients& c, const Matrix& P, bool pinv) {
  const auto b = riccati_blocks(c, P);
  const Matrix KL = pinv ? Matrix(pseudo_inverse(b.K) * b.L) : solve_spd(b.K, b.L);
  return -(P * c.A + c.A.transpose() * P + c.C.transpose() * P * c.C + c.Q) +
         b.L.transpose() * KL;
}

RiccatiSolution direct_solve(const ProblemData& p, const OdeOptions& options, bool pinv) {
  Coefficients scratch, scratch2;
  auto rhs = [&](double t, const Matrix& P) -> Matrix {
    return riccati_rhs(p.coefficients(t, scratch), P, pinv);
  };
  OdeOptions opts = options;
  opts.symmetric = true;
  opts.stiffness = [&](double t, const Matrix& P) {
    const auto& c = p.coefficients(t, scratch2);
    const auto b = riccati_blocks(c, P);
    const Matrix Th = pinv ? Matrix(-pseudo_inverse(b.K) * b.L) : Matrix(-solve_spd(b.K, b.L));
    const double r = 2.0 * (c.A + c.B * Th).norm() + (c.C + c.D * Th).squaredNorm();
    return std::isfinite(r) ? r : 0.0;
  };
  RiccatiSolution sol;
  sol.kind = pinv ? RiccatiKind::direct_pinv : RiccatiKind::direct_D0;
  sol.P = std::make_shared<const OdeTrajectory>(
      integrate_matrix_ode(rhs, p.G(), p.grid(), Direction::backward, opts));
  sol.lambda_estimate = min_uniform_eigenvalue(p, *sol.P);
  sol.residual = sol.P->blew_up() ? std::numeric_limits<double>::quiet_NaN()
                                  : riccati_residual(p, *sol.P);
  return sol;
}

}  // namespace

MatrixPath optimal_gain(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P) {
  return gain_path(p, std::move(P), false);
}

MatrixPath pseudo_gain(const ProblemData& p, std::shared_ptr<const OdeTrajectory> P) {
  return gain_path(p, std::move(P), true);
}

RiccatiSolution newton_riccati(const ProblemData& p, const NewtonOptions& o) {
  if (o.max_iter < 1 || !(o.tol > 0.0)) throw PreconditionError("newton: need max_iter >= 1, tol > 0");
  std::shared_ptr<const OdeTrajectory> P =
      o.initial ? o.initial : std::make_shared<const OdeTrajectory>(solve_M0(p, o.ode));
  if (P->blew_up()) throw NoConvergence("newton: the initial iterate escapes the norm bound", 0);

  RiccatiSolution sol;
  sol.kind = RiccatiKind::newton;
  const auto& grid = p.grid();
  for (std::size_t i = 0; i < o.max_iter; ++i) {
    const int it = static_cast<int>(i);
    const double lam = min_uniform_eigenvalue(p, *P);
    if (!(lam >= o.uniform_floor)) {
      throw NotUniformlyConvex("newton: R + D'P D is not uniformly positive at iterate " +
                                   std::to_string(i) + " (min eigenvalue " +
                                   std::to_string(lam) + ")",
                               it);
    }
    std::shared_ptr<const OdeTrajectory> next;
    try {
      next = std::make_shared<const OdeTrajectory>(
          solve_feedback_lyapunov(p, optimal_gain(p, P), o.ode));
    } catch (const NonFiniteValue& e) {
      throw NoConvergence(std::string("newton: ") + e.what(), it);
    } catch (const StepBudgetExceeded& e) {
      throw NoConvergence(std::string("newton: ") + e.what(), it);
    }
    if (next->blew_up() || next->max_norm() > o.divergence_norm) {
      throw NoConvergence("newton: iterate " + std::to_string(i + 1) + " diverges", it);
    }

    double diff = 0.0, margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
      const Matrix d = P->value(k) - next->value(k);
      diff = std::max(diff, d.norm());
      if (i >= 1) margin = std::min(margin, min_eigenvalue(d));
    }
    const double scale = std::max(1.0, next->max_norm());
    sol.increments.push_back(diff);
    if (i >= 1) {
      sol.monotonicity_margin = std::min(sol.monotonicity_margin, margin);
      if (margin < -o.monotone_slack * scale) {
        throw MonotonicityViolation("newton: P_i >= P_{i+1} fails at iterate " +
                                        std::to_string(i) + " (margin " + std::to_string(margin) +
                                        ")",
                                    it);
      }
    }
    P = std::move(next);
    if (diff <= o.tol * scale) {
      if (o.polish_stability > 0.0 && o.polish_stability < o.ode.stability) {
        OdeOptions fine = o.ode;
        fine.stability = o.polish_stability;
        try {
          auto polished = std::make_shared<const OdeTrajectory>(
              solve_feedback_lyapunov(p, optimal_gain(p, P), fine));
          if (!polished->blew_up()) P = std::move(polished);
        } catch (const SolverError&) {
          // Keep the converged iterate.
        }
      }
      sol.iterations = i + 1;
      sol.P = P;
      sol.lambda_estimate = min_uniform_eigenvalue(p, *P);
      if (!(sol.lambda_estimate >= o.uniform_floor)) {
        throw NotUniformlyConvex("newton: the converged solution is not strongly regular",
                                 static_cast<int>(i + 1));
      }
      sol.residual = riccati_residual(p, *P);
      return sol;
    }
  }
  throw NoConvergence("newton: no convergence within " + std::to_string(o.max_iter) +
                          " iterations",
                      static_cast<int>(o.max_iter));
}

RiccatiSolution epsilon_riccati(const ProblemData& p, double eps, const NewtonOptions& options) {
  if (!(eps > 0.0)) throw PreconditionError("epsilon must be positive");
  const ProblemData shifted = p.with_control_penalty(eps);
  RiccatiSolution sol;
  try {
    sol = newton_riccati(shifted, options);
  } catch (const SolverError& e) {
    throw NotConvexAtEpsilon(std::string(e.what()) + " [eps=" + std::to_string(eps) + "]",
                             e.iteration(), eps);
  }
  sol.kind = RiccatiKind::epsilon;
  sol.epsilon = eps;
  if (sol.lambda_estimate < eps - 1e-9 * std::max(1.0, sol.P->max_norm())) {
    throw NotConvexAtEpsilon("epsilon solution violates R + eps I + D'PD >= eps I",
                             static_cast<int>(sol.iterations), eps);
  }
  return sol;
}

RiccatiSolution direct_riccati_D0(const ProblemData& p, const OdeOptions& options) {
  if (p.D().max_norm(p.grid()) != 0.0) throw PreconditionD0("direct D=0 route: D is not zero");
  Coefficients scratch;
  for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
    if (min_eigenvalue(p.coefficients(p.grid().node(k), scratch).R) < 1e-8) {
      throw PreconditionD0("direct D=0 route: R is not uniformly positive definite");
    }
  }
  return direct_solve(p, options, false);
}

RiccatiSolution direct_riccati_pinv(const ProblemData& p, const OdeOptions& options) {
  return direct_solve(p, options, true);
}

std::vector<double> riccati_residual_profile(const ProblemData& p, const OdeTrajectory& P) {
  const auto& grid = p.grid();
  const auto& ts = P.dense_times();
  std::vector<double> out;
  Coefficients scratch;
  for (std::size_t k = P.first_node(); k <= P.last_node(); ++k) {
    const double t = grid.node(k);
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    const auto i = static_cast<std::size_t>(it - ts.begin());
    double spacing = grid.h();
    if (i + 1 < ts.size()) spacing = std::min(spacing, ts[i + 1] - ts[i]);
    if (i > 0 && i < ts.size()) spacing = std::min(spacing, ts[i] - ts[i - 1]);
    const double d = 1e-3 * spacing;
    Matrix dP;
    if (t - d < P.t_begin()) {
      dP = (-3.0 * P.at(t) + 4.0 * P.at(t + d) - P.at(t + 2 * d)) / (2 * d);
    } else if (t + d > P.t_end()) {
      dP = (3.0 * P.at(t) - 4.0 * P.at(t - d) + P.at(t - 2 * d)) / (2 * d);
    } else {
      dP = (P.at(t + d) - P.at(t - d)) / (2 * d);
    }
    const auto& c = p.coefficients(t, scratch);
    out.push_back((dP - riccati_rhs(c, P.value(k), true)).norm());
  }
  return out;
}

double riccati_residual(const ProblemData& p, const OdeTrajectory& P, double skip_fraction) {
  const auto prof = riccati_residual_profile(p, P);
  const auto skip_to = static_cast<std::size_t>(
      std::ceil(skip_fraction * static_cast<double>(p.grid().n_steps())));
  double worst = 0.0;
  for (std::size_t j = 0; j < prof.size(); ++j) {
    if (P.first_node() + j < skip_to) continue;
    worst = std::max(worst, prof[j]);
  }
  return worst;
}

RegularityReport classify_regularity(const ProblemData& p, const RiccatiSolution& sol) {
  RegularityReport rep;
  const OdeTrajectory& P = *sol.P;
  const auto& grid = p.grid();
  Coefficients scratch;
  rep.range_ok = true;
  rep.psd_ok = true;
  double lam = std::numeric_limits<double>::infinity();
  for (std::size_t k = P.first_node(); k <= P.last_node(); ++k) {
    const auto b = riccati_blocks(p.coefficients(grid.node(k), scratch), P.value(k));
    if (!range_included(b.L, b.K)) rep.range_ok = false;
    const double e = min_eigenvalue(b.K);
    if (e < -kPsdTol) rep.psd_ok = false;
    lam = std::min(lam, e);
  }
  rep.strong_lambda = std::max(0.0, lam);

  auto gain_integral = [&](const TimeGrid& g) {
    double acc = 0.0, prev = 0.0;
    for (std::size_t k = 0; k < g.n_nodes(); ++k) {
      const double t = g.node(k);
      const auto b = riccati_blocks(p.coefficients(t, scratch), P.at(t));
      const double cur = (pseudo_inverse(b.K) * b.L).squaredNorm();
      if (k > 0) acc += 0.5 * g.h() * (prev + cur);
      prev = cur;
    }
    return acc;
  };
  if (P.blew_up()) {
    rep.l2_ok = false;
    rep.gain_integral = rep.gain_integral_refined = std::numeric_limits<double>::infinity();
  } else {
    rep.gain_integral = gain_integral(grid);
    rep.gain_integral_refined = gain_integral(grid.refined(4));
    rep.l2_ok = std::isfinite(rep.gain_integral_refined) &&
                rep.gain_integral <= 1e8 && rep.gain_integral_refined <= 1e8 &&
                !(rep.gain_integral_refined > 2.0 * rep.gain_integral);
  }

  if (!rep.range_ok) rep.failed.push_back("range_condition");
  if (!rep.l2_ok) rep.failed.push_back("square_integrability");
  if (!rep.psd_ok) rep.failed.push_back("positivity");
  if (!rep.failed.empty()) {
    rep.classification = Regularity::solution_not_regular;
  } else if (rep.strong_lambda >= 1e-8) {
    rep.classification = Regularity::strongly_regular;
  } else {
    rep.classification = Regularity::regular;
  }
  return rep;
}

}  // namespace slq
