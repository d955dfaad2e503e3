#include "slq/report.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/matrix_kit.hpp"
#include "slq/parallel.hpp"

namespace slq {

namespace {

Json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(number(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v[i]));
  return out;
}

Json eigenvalues_json(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(m), Eigen::EigenvaluesOnly);
  return vector_json(es.eigenvalues());
}

// About `count` evenly spaced node samples of a trajectory.
Json samples_json(const OdeTrajectory& traj, std::size_t count = 21) {
  Json out = Json::array();
  const auto& g = traj.grid();
  const std::size_t N = g.n_steps();
  const std::size_t stride = std::max<std::size_t>(1, N / (count - 1));
  for (std::size_t k = traj.first_node(); k <= traj.last_node(); k += stride) {
    out.push_back({{"t", g.node(k)}, {"value", matrix_json(traj.value(k))}});
    if (k + stride > traj.last_node() && k != traj.last_node()) {
      out.push_back({{"t", g.node(traj.last_node())},
                     {"value", matrix_json(traj.value(traj.last_node()))}});
    }
  }
  return out;
}

}  // namespace

SolvabilityReport analyze(const ProblemData& p, const AnalyzeOptions& o) {
  SolvabilityReport r;
  r.standard = check_standard_conditions(p);
  try {
    r.necessary = necessary_condition_RDMD(p);
  } catch (const Error& e) {
    r.notes.push_back(std::string("necessary condition: ") + e.what());
  }
  r.closed_loop = closed_loop_solve(p, o.newton);

  const ProblemData h = p.homogeneous() ? p : p.homogeneous_part();
  LadderConfig ladder = o.ladder;
  ladder.newton.ode = o.newton.ode;
  r.finiteness = finiteness(h, ladder);
  r.theta_norms = theta_norm_criterion(h, r.finiteness.ladder);
  try {
    r.M0 = std::make_shared<const OdeTrajectory>(solve_M0(h, o.newton.ode));
  } catch (const Error& e) {
    r.notes.push_back(std::string("M0: ") + e.what());
  }
  if (r.finiteness.P_limit) {
    try {
      r.N = std::make_shared<const OdeTrajectory>(lower_bound_N(h, r.finiteness.P_limit->value(0)));
    } catch (const Error& e) {
      r.notes.push_back(std::string("lower bound N: ") + e.what());
    }
  }

  std::vector<QueryPoint> queries = o.queries;
  if (queries.empty()) queries.push_back({p.grid().t0(), Vector::Ones(p.n())});
  for (const auto& q : queries) {
    try {
      r.open_loop.push_back(open_loop_check(p, r.finiteness.ladder, q.t, q.x));
    } catch (const Error& e) {
      r.notes.push_back("open-loop check at t=" + std::to_string(q.t) + ": " + e.what());
    }
  }

  if (o.probes > 0) {
    try {
      r.probe = convexity_probe(p, o.probes, o.sim);
    } catch (const Error& e) {
      r.notes.push_back(std::string("convexity probe: ") + e.what());
    }
  }
  if (o.simulate && r.closed_loop.law) {
    for (const auto& q : queries) {
      try {
        SimulationCheck c;
        c.query = q;
        c.estimate = simulate_cost(p, Control::of(*r.closed_loop.law), q.t, q.x, o.sim);
        c.value = value_function(*r.closed_loop.law, q.t, q.x);
        r.simulations.push_back(std::move(c));
      } catch (const Error& e) {
        r.notes.push_back(std::string("simulation: ") + e.what());
      }
    }
  }
  if (r.closed_loop.verdict == ClosedLoop::solvable && r.finiteness.verdict != Finite::yes) {
    r.notes.push_back(std::string("closed-loop solvable but finiteness verdict is ") +
                      to_string(r.finiteness.verdict));
  }
  return r;
}

Json to_json(const StandardConditionsReport& r) {
  return {{"G_psd", r.G_psd},
          {"R_uniform_delta", number(r.R_uniform_delta)},
          {"schur_complement_psd", r.schur_complement_psd},
          {"holds", r.holds}};
}

Json to_json(const RegularityReport& r) {
  return {{"classification", to_string(r.classification)},
          {"range_condition", r.range_ok},
          {"square_integrability", r.l2_ok},
          {"square_integrability_is_proxy", r.l2_is_proxy},
          {"positivity", r.psd_ok},
          {"strong_lambda", number(r.strong_lambda)},
          {"gain_integral", number(r.gain_integral)},
          {"gain_integral_refined", number(r.gain_integral_refined)},
          {"failed", r.failed}};
}

Json to_json(const RiccatiSolution& s) {
  Json j = {{"kind", to_string(s.kind)},
            {"epsilon", s.epsilon},
            {"iterations", s.iterations},
            {"residual", number(s.residual)},
            {"lambda_estimate", number(s.lambda_estimate)},
            {"monotonicity_margin", number(s.monotonicity_margin)},
            {"increments", s.increments},
            {"blew_up", s.blew_up()}};
  if (auto bt = s.blowup_time()) j["blowup_time"] = *bt;
  if (s.P && s.P->has_node(s.P->first_node())) {
    j["P_first_covered_node"] = matrix_json(s.P->value(s.P->first_node()));
  }
  return j;
}

Json to_json(const CostEstimate& e) {
  return {{"mean", number(e.mean)}, {"std_error", number(e.std_error)}, {"n_paths", e.n_paths}};
}

Json to_json(const ConvexityProbeResult& r) {
  Json j = {{"n_controls", r.n_controls},
            {"min_cost", number(r.min_cost)},
            {"min_cost_std_error", number(r.min_cost_std_error)},
            {"min_ratio", number(r.min_ratio)},
            {"violation_found", r.violating_control.has_value()},
            {"note", "one-sided: random piecewise-constant controls can exhibit non-convexity "
                     "but cannot certify convexity"}};
  if (r.violating_control) j["violating_levels"] = matrix_json(r.violating_control->levels);
  return j;
}

Json to_json(const OpenLoopResult& r) {
  Json j = {{"t", r.t},
            {"x", vector_json(r.x)},
            {"verdict", to_string(r.verdict)},
            {"reason", r.reason},
            {"epsilons", r.epsilons},
            {"norms", r.norms},
            {"costs", r.costs}};
  if (r.limit_control_norm) j["limit_control_norm"] = *r.limit_control_norm;
  if (!r.limit_control_mean.empty()) {
    Json samples = Json::array();
    const std::size_t n = r.limit_control_mean.size();
    const std::size_t stride = std::max<std::size_t>(1, (n - 1) / 20);
    for (std::size_t i = 0; i < n; i += stride) {
      samples.push_back({{"t", r.limit_control_times[i]},
                         {"mean_control", vector_json(r.limit_control_mean[i])}});
    }
    j["limit_control_samples"] = samples;
  }
  return j;
}

Json ladder_table(const EpsilonLadder& ladder, const ThetaNormResult* theta) {
  Json rows = Json::array();
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const auto& s = ladder.solutions[k];
    Json row = {{"epsilon", ladder.epsilons[k]},
                {"P_t0_eigenvalues", eigenvalues_json(s.P->value(0))},
                {"P_t0_min_eigenvalue", number(ladder.P0_min_eigs[k])},
                {"newton_iterations", s.iterations},
                {"residual", number(s.residual)}};
    if (theta && k < theta->norms.size()) row["theta_norm"] = number(theta->norms[k]);
    rows.push_back(row);
  }
  Json j = {{"rows", rows}, {"stopped_early", ladder.stopped_early}};
  if (ladder.nonconvex_eps) {
    j["nonconvex_epsilon"] = *ladder.nonconvex_eps;
    j["failure"] = ladder.failure;
  }
  return j;
}

Json finiteness_json(const FinitenessResult& r) {
  Json j = {{"verdict", to_string(r.verdict)}, {"reason", r.reason}};
  if (r.P_limit) j["P_limit"] = samples_json(*r.P_limit);
  return j;
}

Json closed_loop_json(const ClosedLoopResult& r, const ProblemData& p) {
  Json j = {{"verdict", to_string(r.verdict)},
            {"route", r.route},
            {"cited", r.cited},
            {"reason", r.reason}};
  if (r.solution) j["solution"] = to_json(*r.solution);
  if (r.regularity) j["regularity"] = to_json(*r.regularity);
  if (r.law) {
    const double t0 = p.grid().t0();
    j["Theta_t0"] = matrix_json(r.law->Theta(t0));
    j["v_t0"] = matrix_json(r.law->v(t0));
    j["P"] = samples_json(*r.law->value_P);
    j["value_at_t0_x1"] = value_function(*r.law, t0, Vector::Ones(p.n()));
  }
  return j;
}

Json config_json(const ProblemData& p, const AnalyzeOptions& o) {
  Json queries = Json::array();
  for (const auto& q : o.queries) queries.push_back({{"t", q.t}, {"x", vector_json(q.x)}});
  return {{"grid", {{"t0", p.grid().t0()}, {"T", p.grid().T()}, {"n_steps", p.grid().n_steps()}}},
          {"ladder",
           {{"eps_start", o.ladder.eps_start},
            {"eps_factor", o.ladder.eps_factor},
            {"eps_count", o.ladder.count},
            {"bound_tol", o.ladder.bound_tol},
            {"divergence", o.ladder.divergence},
            {"warm_start", o.ladder.warm_start}}},
          {"newton", {{"tol", o.newton.tol}, {"max_iter", o.newton.max_iter}}},
          {"monte_carlo",
           {{"paths", o.sim.n_paths},
            {"seed", o.sim.seed},
            {"refine", o.sim.refine},
            {"probes", o.probes},
            {"simulate", o.simulate}}},
          {"queries", queries},
          {"threads", configured_threads()}};
}

Json report_document(const ProblemData& p, const AnalyzeOptions& o, const SolvabilityReport& r) {
  Json doc;
  doc["tool"] = {{"name", "slq"}, {"version", kToolVersion}};
  doc["problem"] = {{"name", p.name()},
                    {"n", p.n()},
                    {"m", p.m()},
                    {"t0", p.grid().t0()},
                    {"T", p.grid().T()},
                    {"homogeneous", p.homogeneous()},
                    {"control_free_diffusion", p.control_free_diffusion()}};
  doc["config"] = config_json(p, o);
  doc["standard_conditions"] = to_json(r.standard);
  doc["necessary_condition_R_DM0D"] = {
      {"holds", r.necessary.holds},
      {"min_eigenvalue", number(r.necessary.min_eigenvalue)},
      {"closed_loop_by_structure", r.necessary.closed_loop_by_structure}};

  Json open = Json::array();
  for (const auto& ol : r.open_loop) {
    Json j = to_json(ol);
    if (r.closed_loop.law) j["closed_loop_value"] = value_function(*r.closed_loop.law, ol.t, ol.x);
    if (r.finiteness.P_limit) {
      j["homogeneous_value"] = ol.x.dot(r.finiteness.P_limit->at(ol.t) * ol.x);
    }
    open.push_back(j);
  }
  doc["solvability"] = {{"finite", to_string(r.finiteness.verdict)},
                        {"closed_loop", to_string(r.closed_loop.verdict)},
                        {"open_loop", open}};
  doc["finiteness"] = finiteness_json(r.finiteness);
  doc["closed_loop"] = closed_loop_json(r.closed_loop, p);
  doc["ladder"] = ladder_table(r.finiteness.ladder, &r.theta_norms);
  doc["theta_norm_criterion"] = {{"bounded", r.theta_norms.bounded},
                                 {"sup_norm", number(r.theta_norms.sup_norm)}};
  Json bounds;
  if (r.M0) bounds["M0"] = samples_json(*r.M0);
  if (r.N) bounds["N"] = samples_json(*r.N);
  doc["bounds"] = bounds;
  if (r.probe || !r.simulations.empty()) {
    Json mc;
    if (r.probe) mc["convexity_probe"] = to_json(*r.probe);
    Json sims = Json::array();
    for (const auto& s : r.simulations) {
      sims.push_back({{"t", s.query.t},
                      {"x", vector_json(s.query.x)},
                      {"estimate", to_json(s.estimate)},
                      {"value", s.value}});
    }
    mc["closed_loop_costs"] = sims;
    doc["monte_carlo"] = mc;
  }
  doc["notes"] = r.notes;
  return doc;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

void write_trajectory_csv(const std::string& path, const OdeTrajectory& traj) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f.precision(17);
  f << "t";
  for (Eigen::Index j = 0; j < traj.cols(); ++j) {
    for (Eigen::Index i = 0; i < traj.rows(); ++i) f << ",v_" << i << "_" << j;
  }
  f << "\n";
  for (std::size_t k = traj.first_node(); k <= traj.last_node(); ++k) {
    f << traj.grid().node(k);
    const Matrix& v = traj.value(k);
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      for (Eigen::Index i = 0; i < v.rows(); ++i) f << "," << v(i, j);
    }
    f << "\n";
  }
}

void write_curves_csv(const std::string& path, const TimeGrid& grid,
                      const std::vector<std::pair<std::string, const OdeTrajectory*>>& curves) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f.precision(17);
  f << "t";
  for (const auto& [name, traj] : curves) {
    for (Eigen::Index j = 0; j < traj->cols(); ++j) {
      for (Eigen::Index i = 0; i < traj->rows(); ++i) f << "," << name << "_" << i << "_" << j;
    }
  }
  f << "\n";
  for (std::size_t k = 0; k < grid.n_nodes(); ++k) {
    f << grid.node(k);
    for (const auto& [name, traj] : curves) {
      const bool have = traj->has_node(k);
      for (Eigen::Index j = 0; j < traj->cols(); ++j) {
        for (Eigen::Index i = 0; i < traj->rows(); ++i) {
          f << ",";
          if (have) f << traj->value(k)(i, j);
        }
      }
    }
    f << "\n";
  }
}

}  // namespace slq
