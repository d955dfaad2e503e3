#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/parallel.hpp"
#include "slq/report.hpp"

namespace {

using namespace slq;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string problem;
  std::size_t grid_steps = 2000;
  CLI::Option* grid_opt = nullptr;
  double eps_start = 1.0;
  double eps_factor = 0.5;
  std::size_t eps_count = 20;
  double tol = 1e-6;
  std::size_t paths = 100'000;
  std::uint64_t seed = 0;
  std::size_t refine = 1;
  std::string out;
  std::vector<double> query_t;
  std::vector<std::string> query_x;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("problem", c.problem, "Problem file (JSON)")->required();
  c.grid_opt = sub->add_option("--grid-steps", c.grid_steps,
                               "Re-grid the horizon with this many steps (file value otherwise)");
  sub->add_option("--eps-start", c.eps_start, "First ladder epsilon")->capture_default_str();
  sub->add_option("--eps-factor", c.eps_factor, "Ladder ratio")->capture_default_str();
  sub->add_option("--eps-count", c.eps_count, "Ladder length")->capture_default_str();
  sub->add_option("--tol", c.tol, "Newton tolerance")->capture_default_str();
  sub->add_option("--paths", c.paths, "Monte Carlo paths")->capture_default_str();
  sub->add_option("--seed", c.seed, "Monte Carlo seed")->capture_default_str();
  sub->add_option("--refine", c.refine, "Monte Carlo grid refinement factor")->capture_default_str();
  sub->add_option("--out", c.out, "Output file");
  sub->add_option("--query-t", c.query_t, "Query time (repeatable)");
  sub->add_option("--query-x", c.query_x, "Query state, comma separated (repeatable)");
}

Vector parse_vector(const std::string& text, Eigen::Index n) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InputError("not a number in vector '" + text + "'");
    }
  }
  if (static_cast<Eigen::Index>(vals.size()) == 1 && n > 1) vals.assign(n, vals.front());
  if (static_cast<Eigen::Index>(vals.size()) != n) {
    throw InputError("vector '" + text + "' must have " + std::to_string(n) + " entries");
  }
  return Eigen::Map<Vector>(vals.data(), n);
}

ProblemData load(const Common& c) {
  ProblemData p = load_problem(c.problem);
  if (c.grid_opt && c.grid_opt->count() > 0) {
    if (c.grid_steps < 2) throw InputError("--grid-steps must be >= 2");
    p = p.with_grid(TimeGrid(p.grid().t0(), p.grid().T(), c.grid_steps));
  }
  return p;
}

std::vector<QueryPoint> queries(const Common& c, const ProblemData& p) {
  std::vector<QueryPoint> out;
  const std::size_t nt = c.query_t.size(), nx = c.query_x.size();
  if (nt == 0 && nx == 0) return out;
  const std::size_t count = std::max(nt, nx);
  if (nt > 1 && nx > 1 && nt != nx) {
    throw InputError("--query-t and --query-x must pair up (or one of them appear once)");
  }
  for (std::size_t i = 0; i < count; ++i) {
    QueryPoint q;
    q.t = nt == 0 ? p.grid().t0() : c.query_t[std::min(i, nt - 1)];
    q.x = nx == 0 ? Vector::Ones(p.n()) : parse_vector(c.query_x[std::min(i, nx - 1)], p.n());
    if (!(q.t >= p.grid().t0() && q.t < p.grid().T())) {
      throw InputError("query time outside [t0, T)");
    }
    out.push_back(std::move(q));
  }
  return out;
}

LadderConfig ladder_config(const Common& c) {
  LadderConfig l;
  l.eps_start = c.eps_start;
  l.eps_factor = c.eps_factor;
  l.count = c.eps_count;
  l.newton.tol = c.tol;
  if (!(l.eps_start > 0) || !(l.eps_factor > 0 && l.eps_factor < 1) || l.count < 1) {
    throw InputError("ladder needs --eps-start > 0, 0 < --eps-factor < 1, --eps-count >= 1");
  }
  if (!(c.tol > 0)) throw InputError("--tol must be positive");
  return l;
}

SimulationConfig sim_config(const Common& c) {
  SimulationConfig s;
  s.n_paths = c.paths;
  s.seed = c.seed;
  s.refine = c.refine;
  if (s.n_paths < 100) throw InputError("--paths must be >= 100");
  if (s.refine < 1) throw InputError("--refine must be >= 1");
  return s;
}

std::string stem(const std::string& out, const char* ext) {
  const std::string e(ext);
  if (out.size() > e.size() && out.compare(out.size() - e.size(), e.size(), e) == 0) {
    return out.substr(0, out.size() - e.size());
  }
  return out;
}

void emit(const Json& doc, const std::string& out) {
  if (out.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    write_text(out, doc.dump(2) + "\n");
  }
}

int cmd_analyze(const Common& c, std::size_t probes, bool simulate) {
  const ProblemData p = load(c);
  AnalyzeOptions o;
  o.ladder = ladder_config(c);
  o.newton.tol = c.tol;
  o.queries = queries(c, p);
  o.sim = sim_config(c);
  o.probes = probes;
  o.simulate = simulate;
  const SolvabilityReport r = analyze(p, o);
  const Json doc = report_document(p, o, r);
  emit(doc, c.out);
  if (!c.out.empty()) {
    const std::string base = stem(c.out, ".json");
    std::vector<std::pair<std::string, const OdeTrajectory*>> curves;
    if (r.finiteness.P_limit) curves.emplace_back("P_limit", r.finiteness.P_limit.get());
    if (r.M0) curves.emplace_back("M0", r.M0.get());
    if (r.N) curves.emplace_back("N", r.N.get());
    if (r.closed_loop.law) curves.emplace_back("P", r.closed_loop.law->value_P.get());
    if (!curves.empty()) write_curves_csv(base + "_curves.csv", p.grid(), curves);

    std::cout << "problem      " << (p.name().empty() ? c.problem : p.name()) << "\n"
              << "finite       " << to_string(r.finiteness.verdict) << "\n"
              << "closed_loop  " << to_string(r.closed_loop.verdict);
    if (!r.closed_loop.cited.empty()) {
      std::cout << " (";
      for (std::size_t i = 0; i < r.closed_loop.cited.size(); ++i) {
        std::cout << (i ? ", " : "") << r.closed_loop.cited[i];
      }
      std::cout << ")";
    }
    std::cout << "\n";
    for (const auto& ol : r.open_loop) {
      std::cout << "open_loop    t=" << ol.t << " " << to_string(ol.verdict);
      if (ol.limit_control_norm) std::cout << " norm=" << *ol.limit_control_norm;
      std::cout << "\n";
    }
    if (r.probe) {
      std::cout << "probe        min_cost=" << r.probe->min_cost << " se=" << r.probe->min_cost_std_error
                << (r.probe->violating_control ? " VIOLATION" : " no violation") << "\n";
    }
  }
  return kExitOk;
}

int cmd_riccati(const Common& c, bool newton, double eps, bool d0, bool pinv) {
  const int chosen = int(newton) + int(eps > 0.0) + int(d0) + int(pinv);
  if (chosen != 1) throw InputError("choose exactly one of --newton, --epsilon EPS, --d0, --pinv");
  const ProblemData p = load(c);
  NewtonOptions no;
  no.tol = c.tol;
  const std::string csv = c.out.empty() ? std::string("riccati_P.csv") : c.out;
  const std::string sidecar = stem(csv, ".csv") + ".json";
  Json side = {{"tool", {{"name", "slq"}, {"version", kToolVersion}}},
               {"problem", c.problem},
               {"method", newton ? "newton" : eps > 0 ? "epsilon" : d0 ? "d0" : "pinv"},
               {"tol", c.tol}};
  if (eps > 0) side["epsilon"] = eps;
  RiccatiSolution sol;
  try {
    if (newton) sol = newton_riccati(p, no);
    else if (eps > 0) sol = epsilon_riccati(p, eps, no);
    else if (d0) sol = direct_riccati_D0(p, no.ode);
    else sol = direct_riccati_pinv(p, no.ode);
  } catch (const SolverError& e) {
    side["status"] = "failed";
    side["error"] = dynamic_cast<const NotUniformlyConvex*>(&e)   ? "NotUniformlyConvex"
                    : dynamic_cast<const NotConvexAtEpsilon*>(&e) ? "NotConvexAtEpsilon"
                    : dynamic_cast<const NoConvergence*>(&e)      ? "NoConvergence"
                    : dynamic_cast<const MonotonicityViolation*>(&e) ? "MonotonicityViolation"
                                                                     : "SolverError";
    side["message"] = e.what();
    side["iteration"] = e.iteration();
    write_text(sidecar, side.dump(2) + "\n");
    std::cerr << "solver failed: " << e.what() << "\n";
    return kExitSolver;
  }
  write_trajectory_csv(csv, *sol.P);
  side["status"] = "ok";
  side["solution"] = to_json(sol);
  if (!sol.blew_up()) {
    const ProblemData& q = p;
    side["regularity"] = to_json(classify_regularity(eps > 0 ? q.with_control_penalty(eps) : q, sol));
  }
  side["csv"] = csv;
  write_text(sidecar, side.dump(2) + "\n");
  std::cout << "wrote " << csv << " and " << sidecar << "\n";
  return kExitOk;
}

int cmd_finiteness(const Common& c) {
  const ProblemData p = load(c);
  const FinitenessResult f = finiteness(p, ladder_config(c));
  const ProblemData h = p.homogeneous() ? p : p.homogeneous_part();
  const ThetaNormResult theta = theta_norm_criterion(h, f.ladder);
  Json doc = {{"tool", {{"name", "slq"}, {"version", kToolVersion}}},
              {"problem", c.problem},
              {"finiteness", finiteness_json(f)},
              {"ladder", ladder_table(f.ladder, &theta)}};
  emit(doc, c.out);
  if (!c.out.empty() && f.P_limit) {
    write_trajectory_csv(stem(c.out, ".json") + "_P_limit.csv", *f.P_limit);
  }
  return kExitOk;
}

int cmd_openloop(const Common& c) {
  const ProblemData p = load(c);
  auto qs = queries(c, p);
  if (qs.empty()) qs.push_back({p.grid().t0(), Vector::Ones(p.n())});
  const FinitenessResult f = finiteness(p, ladder_config(c));
  Json results = Json::array();
  for (const auto& q : qs) {
    const OpenLoopResult r = open_loop_check(p, f.ladder, q.t, q.x);
    Json j = to_json(r);
    if (f.P_limit) j["homogeneous_value"] = q.x.dot(f.P_limit->at(q.t) * q.x);
    results.push_back(j);
  }
  Json doc = {{"tool", {{"name", "slq"}, {"version", kToolVersion}}},
              {"problem", c.problem},
              {"finite", to_string(f.verdict)},
              {"open_loop", results}};
  emit(doc, c.out);
  return kExitOk;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": malformed JSON: " + e.what());
  }
}

int cmd_simulate(const Common& c, const std::string& feedback, const std::string& openloop,
                 double t, const std::string& xs) {
  if (feedback.empty() == openloop.empty()) {
    throw InputError("choose exactly one of --feedback FILE|optimal and --openloop FILE");
  }
  const ProblemData p = load(c);
  const SimulationConfig cfg = sim_config(c);
  const Vector x = xs.empty() ? Vector::Ones(p.n()) : parse_vector(xs, p.n());
  if (!(t >= p.grid().t0() && t < p.grid().T())) throw InputError("--t outside [t0, T)");

  Control control;
  Json source;
  if (!feedback.empty()) {
    if (feedback == "optimal") {
      NewtonOptions no;
      no.tol = c.tol;
      auto cl = closed_loop_solve(p, no);
      if (!cl.law) throw InputError("no closed-loop law available: " + cl.reason);
      control = Control::of(*cl.law);
      source = {{"feedback", "optimal"}, {"route", cl.route}};
    } else {
      const Json doc = read_json_file(feedback);
      if (!doc.contains("Theta")) throw InputError(feedback + ": missing 'Theta'");
      MatrixPath Th = parse_path(doc["Theta"].dump(), "Theta");
      FeedbackLaw law = FeedbackLaw::state_feedback(Th);
      if (doc.contains("v")) law.v = parse_path(doc["v"].dump(), "v");
      control = Control::of(std::move(law));
      source = {{"feedback", feedback}};
    }
  } else {
    const Json doc = read_json_file(openloop);
    if (!doc.contains("u")) throw InputError(openloop + ": missing 'u'");
    control = Control::of(parse_path(doc["u"].dump(), "u"));
    source = {{"openloop", openloop}};
  }
  const CostEstimate e = simulate_cost(p, control, t, x, cfg);
  std::printf("%.10g +- %.3g (%zu paths)\n", e.mean, e.std_error, e.n_paths);
  std::fflush(stdout);
  Json doc = {{"tool", {{"name", "slq"}, {"version", kToolVersion}}},
              {"problem", c.problem},
              {"control", source},
              {"t", t},
              {"x", std::vector<double>(x.data(), x.data() + x.size())},
              {"config", {{"paths", cfg.n_paths}, {"seed", cfg.seed}, {"refine", cfg.refine}}},
              {"estimate", to_json(e)}};
  if (!c.out.empty()) write_text(c.out, doc.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  apply_thread_limit();
  CLI::App app{"Solvability analysis of stochastic linear-quadratic control problems"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common c_analyze, c_riccati, c_fin, c_open, c_sim;
  std::size_t probes = 200;
  bool simulate = false;
  auto* analyze = app.add_subcommand("analyze", "Full solvability report");
  add_common(analyze, c_analyze);
  analyze->add_option("--probes", probes, "Convexity probes (0 disables)")->capture_default_str();
  analyze->add_flag("--simulate", simulate, "Monte Carlo cost of the closed-loop law");

  bool newton = false, d0 = false, pinv = false;
  double eps = 0.0;
  auto* riccati = app.add_subcommand("riccati", "Solve the Riccati equation, write P as CSV");
  add_common(riccati, c_riccati);
  riccati->add_flag("--newton", newton, "Newton iteration");
  riccati->add_option("--epsilon", eps, "Newton iteration with R + eps I");
  riccati->add_flag("--d0", d0, "Direct integration (D = 0, R >> 0)");
  riccati->add_flag("--pinv", pinv, "Direct integration with the pseudo-inverse");

  auto* fin = app.add_subcommand("finiteness", "Epsilon-ladder finiteness verdict");
  add_common(fin, c_fin);

  auto* open = app.add_subcommand("openloop", "Open-loop solvability at query points");
  add_common(open, c_open);

  std::string feedback, openloop, xs;
  double t = 0.0;
  auto* sim = app.add_subcommand("simulate", "Monte Carlo cost of a control");
  add_common(sim, c_sim);
  sim->add_option("--feedback", feedback, "Feedback file {Theta, v} or 'optimal'");
  sim->add_option("--openloop", openloop, "Open-loop control file {u}");
  sim->add_option("--t", t, "Initial time")->capture_default_str();
  sim->add_option("--x", xs, "Initial state, comma separated (default all ones)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*analyze) return cmd_analyze(c_analyze, probes, simulate);
    if (*riccati) return cmd_riccati(c_riccati, newton, eps, d0, pinv);
    if (*fin) return cmd_finiteness(c_fin);
    if (*open) return cmd_openloop(c_open);
    if (*sim) return cmd_simulate(c_sim, feedback, openloop, t, xs);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NonSymmetricWeight& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const UnsupportedStochasticData& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const PreconditionD0& e) {
    std::cerr << "precondition: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
