// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "../support.hpp"
#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/matrix_kit.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/riccati.hpp"
#include "slq/solvability.hpp"

using namespace slq;
using namespace slq::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

Outcome guarded(const std::function<Outcome()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    Outcome o;
    o.require(false, std::string("exception: ") + e.what());
    return o;
  }
}

// Ex 4.3 norms grow like eps^{-1/2}; 26 rungs reach eps = 3e-8.
LadderConfig deep_ladder() {
  LadderConfig cfg;
  cfg.count = 26;
  return cfg;
}

Vector ones(Eigen::Index n) { return Vector::Ones(n); }

// Random constant-coefficient homogeneous instance, n <= 3, m <= 2.
struct RandomShape {
  bool zero_D = false;
  double R_floor = -1.0;  // < 0: PSD R of random rank
  double weight_scale = 1.0;
};

ProblemData random_problem(std::mt19937_64& gen, const RandomShape& shape) {
  std::uniform_int_distribution<int> dn(1, 3), dm(1, 2);
  const Eigen::Index n = dn(gen), m = dm(gen);
  const Matrix A = random_matrix(gen, n, n, 0.6);
  const Matrix B = random_matrix(gen, n, m, 1.0);
  const Matrix C = random_matrix(gen, n, n, 0.5);
  const Matrix D = shape.zero_D ? Matrix::Zero(n, m) : random_matrix(gen, n, m, 0.6);
  const Matrix G = random_symmetric(gen, n, shape.weight_scale);
  const Matrix Q = random_symmetric(gen, n, shape.weight_scale);
  Matrix R;
  if (shape.R_floor >= 0.0) {
    R = random_spd(gen, m, shape.R_floor, 0.7);
  } else {
    std::uniform_int_distribution<int> dr(0, static_cast<int>(m));
    const int rank = dr(gen);
    const Matrix F = random_matrix(gen, m, std::max(rank, 1), 1.0);
    R = rank == 0 ? Matrix::Zero(m, m) : Matrix(F * F.transpose());
  }
  return constant_problem(A, B, C, D, G, Q, R);
}

Outcome criterion1() {
  Outcome o;
  const ProblemData p = load_problem(fixture("example7.json"));
  for (double eps : {1.0, 0.5, 0.1, 0.01}) {
    const auto start = Clock::now();
    const auto sol = epsilon_riccati(p, eps);
    const double secs = seconds_since(start);
    double err = 0.0;
    for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
      const double t = p.grid().node(k);
      err = std::max(err, std::abs(sol.P->value(k)(0, 0) - eps / (eps + 2.0 - 2.0 * t)));
    }
    o.require(err <= 1e-6 && secs < 1.0,
              fmt("eps=%g", eps) + fmt(" err=%.2e", err) + fmt(" %.2fs", secs));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  const ProblemData p = load_problem(fixture("example7.json"));
  const auto f = finiteness(p);
  o.require(f.verdict == Finite::yes, std::string("finite=") + to_string(f.verdict));
  if (f.P_limit) {
    double worst = 0.0;
    for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
      if (p.grid().node(k) <= 0.99 + 1e-12) worst = std::max(worst, std::abs(f.P_limit->value(k)(0, 0)));
    }
    const double at_T = f.P_limit->back()(0, 0);
    o.require(worst <= 1e-3, fmt("max|P_limit| on [0,0.99]=%.2e", worst));
    o.require(std::abs(at_T - 1.0) <= 1e-6, fmt("P_limit(1)=%.8f", at_T));
  }
  const auto cl = closed_loop_solve(p);
  const bool range_cited =
      std::find(cl.cited.begin(), cl.cited.end(), "range_condition") != cl.cited.end();
  o.require(cl.verdict == ClosedLoop::not_solvable_numerically && range_cited,
            std::string("closed_loop=") + to_string(cl.verdict) +
                (range_cited ? " citing range_condition" : ""));
  const auto ol = open_loop_check(p, f.ladder, 0.0, ones(1));
  double dev = ol.limit_control_mean.empty() ? INFINITY : 0.0;
  for (const Vector& u : ol.limit_control_mean) {
    dev = std::max(dev, (u - Vector::Constant(2, -0.5)).cwiseAbs().maxCoeff());
  }
  o.require(ol.verdict == OpenLoop::solvable, std::string("open_loop=") + to_string(ol.verdict));
  o.require(dev <= 1e-4, fmt("max|u - (-1/2,-1/2)|=%.2e", dev));
  return o;
}

Outcome criterion3() {
  Outcome o;
  const ProblemData p = load_problem(fixture("ex43.json"));
  const auto cand = direct_riccati_pinv(p);
  double dev = 0.0;
  for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
    dev = std::max(dev, std::abs(cand.P->value(k)(0, 0) - p.grid().node(k)));
  }
  const double res = riccati_residual(p, *cand.P, 0.05);
  o.require(dev <= 1e-6, fmt("max|P - t|=%.2e", dev));
  o.require(res <= 1e-6, fmt("residual on [0.05,1]=%.2e", res));
  const auto rep = classify_regularity(p, cand);
  o.require(rep.range_ok && rep.psd_ok && !rep.l2_ok,
            std::string("range_ok=") + (rep.range_ok ? "1" : "0") +
                " psd_ok=" + (rep.psd_ok ? "1" : "0") + " l2_ok=" + (rep.l2_ok ? "1" : "0"));
  const auto f = finiteness(p, deep_ladder());
  const auto ol = open_loop_check(p, f.ladder, 0.0, ones(1));
  const double tail = ol.norms.empty() ? 0.0 : ol.norms.back();
  o.require(ol.verdict == OpenLoop::not_solvable && tail > 1e3,
            std::string("open_loop=") + to_string(ol.verdict) + fmt(" tail norm=%.1f", tail) +
                fmt(" (%g rungs)", static_cast<double>(ol.norms.size())));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto start = Clock::now();
  const ProblemData p = load_problem(fixture("ex52.json"));
  const auto f = finiteness(p);
  const double lowest = f.ladder.P0_min_eigs.empty()
                            ? INFINITY
                            : *std::min_element(f.ladder.P0_min_eigs.begin(), f.ladder.P0_min_eigs.end());
  o.require(f.verdict == Finite::no && lowest < -1e3,
            std::string("finite=") + to_string(f.verdict) + fmt(" min P_eps(0)=%.3e", lowest));
  SimulationConfig cfg;
  cfg.n_paths = 100'000;
  const auto probe = convexity_probe(p, 200, cfg);
  o.require(!probe.violating_control,
            fmt("probe min_cost=%.4f", probe.min_cost) + fmt(" se=%.4f", probe.min_cost_std_error));
  const double secs = seconds_since(start);
  o.require(secs < 60.0, fmt("%.1fs", secs));
  return o;
}

Outcome criterion5() {
  Outcome o;
  const ProblemData p = load_problem(fixture("tanh.json"));
  const auto sol = newton_riccati(p);
  const double err = std::abs(sol.P->front()(0, 0) - std::tanh(1.0));
  o.require(sol.iterations <= 8 && err <= 1e-6,
            fmt("iterations=%g", static_cast<double>(sol.iterations)) + fmt(" |P(0)-tanh 1|=%.2e", err));
  o.require(sol.monotonicity_margin >= -1e-7, fmt("monotonicity margin=%.2e", sol.monotonicity_margin));
  const auto cl = closed_loop_solve(p);
  const double x = 1.0;
  SimulationConfig cfg;
  cfg.n_paths = 100'000;
  const auto est = simulate_cost(p, Control::of(*cl.law), 0.0, Vector::Constant(1, x), cfg);
  const double target = std::tanh(1.0) * x * x;
  o.require(std::abs(est.mean - target) <= 3.0 * est.std_error,
            fmt("MC %.8f", est.mean) + fmt(" vs %.8f", target) + fmt(" se=%.1e", est.std_error));
  return o;
}

Outcome criterion6() {
  Outcome o;
  std::mt19937_64 gen(6);
  RandomShape shape;
  std::size_t finite = 0, pairs = 0, bounded_checks = 0;
  double worst_mono = INFINITY, worst_upper = INFINITY, worst_lower = INFINITY;
  for (int inst = 0; inst < 25; ++inst) {
    const ProblemData p = random_problem(gen, shape);
    const auto f = finiteness(p);
    const auto& L = f.ladder;
    for (std::size_t i = 1; i < L.size(); ++i, ++pairs) {
      // eps_{i-1} > eps_i, so P_{i-1} >= P_i.
      for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
        const Matrix d = L.solutions[i - 1].P->value(k) - L.solutions[i].P->value(k);
        worst_mono = std::min(worst_mono, min_eigenvalue(d));
      }
    }
    if (f.verdict != Finite::yes) continue;
    ++finite;
    const OdeTrajectory M0 = solve_M0(p);
    const OdeTrajectory N = lower_bound_N(p, f.P_limit->front());
    for (const auto& sol : L.solutions) {
      for (std::size_t k = 0; k < p.grid().n_nodes(); ++k) {
        const Matrix& P = sol.P->value(k);
        worst_upper = std::min(worst_upper, min_eigenvalue(M0.value(k) - P));
        worst_lower = std::min(worst_lower, min_eigenvalue(P - N.value(k)));
        ++bounded_checks;
      }
    }
  }
  o.require(worst_mono >= -1e-7, fmt("min eig(P_eps2 - P_eps1)=%.2e", worst_mono) +
                                     fmt(" over %g rung pairs", static_cast<double>(pairs)));
  o.require(finite > 0 && worst_upper >= -1e-5 && worst_lower >= -1e-5,
            fmt("finite instances=%g", static_cast<double>(finite)) +
                fmt(" min eig(M0-P)=%.2e", worst_upper) + fmt(" min eig(P-N)=%.2e", worst_lower));
  (void)bounded_checks;
  return o;
}

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 gen(7);
  RandomShape shape;
  shape.zero_D = true;
  shape.R_floor = 0.5;
  shape.weight_scale = 3.0;
  int disagreements = 0, finite = 0;
  std::string first;
  for (int inst = 0; inst < 25; ++inst) {
    const ProblemData p = random_problem(gen, shape);
    const bool fin = finiteness(p).verdict == Finite::yes;
    const bool no_blowup = !direct_riccati_D0(p).blew_up();
    const bool cl = closed_loop_solve(p).verdict == ClosedLoop::solvable;
    finite += fin;
    if (fin != no_blowup || fin != cl) {
      ++disagreements;
      if (first.empty()) first = " first at instance " + std::to_string(inst);
    }
  }
  o.require(disagreements == 0, fmt("disagreements=%g", disagreements) +
                                    fmt(" finite=%g/25", finite) + first);
  return o;
}

Outcome criterion8() {
  Outcome o;
  std::mt19937_64 gen(8);
  RandomShape shape;
  shape.R_floor = 0.2;
  int exceed = 0;
  double worst = 0.0;
  for (int inst = 0; inst < 25; ++inst) {
    const ProblemData p = random_problem(gen, shape);
    const Matrix Th = random_matrix(gen, p.m(), p.n(), 1.0);
    const Vector x = random_matrix(gen, p.n(), 1, 1.0).col(0);
    const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(Th));
    const OdeTrajectory P = solve_feedback_lyapunov(p, MatrixPath::constant(Th));
    const double exact = x.dot(P.front() * x);
    SimulationConfig cfg;
    cfg.n_paths = 100'000;
    cfg.seed = 1000 + inst;
    const auto est = simulate_cost(p, Control::of(law), 0.0, x, cfg);
    const double z = std::abs(est.mean - exact) / est.std_error;
    worst = std::max(worst, z);
    if (z > 3.0) ++exceed;
  }
  o.require(exceed <= 2, fmt("3-sigma exceedances=%g/25", exceed) + fmt(" max z=%.2f", worst));
  return o;
}

Outcome criterion9() {
  Outcome o;
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> dim(1, 3), coin(0, 1);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  int agree = 0, deficient = 0, psd = 0;
  auto diag_form = [&](Eigen::Index n, const std::vector<double>& d) {
    Eigen::HouseholderQR<Matrix> qr(random_matrix(gen, n, n, 1.0));
    const Matrix U = qr.householderQ();
    Vector dv(n);
    for (Eigen::Index i = 0; i < n; ++i) dv(i) = d[i];
    return Matrix(U * dv.asDiagonal() * U.transpose());
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index n = dim(gen), m = dim(gen);
    std::uniform_int_distribution<int> drank(0, static_cast<int>(m));
    const int rank = drank(gen);
    std::vector<double> rd(m, 0.0);
    for (int i = 0; i < rank; ++i) rd[i] = mag(gen);
    const Matrix R = diag_form(m, rd);
    deficient += rank < m;
    // S inside the range of R half of the time.
    const Matrix S = coin(gen) ? Matrix(R * random_matrix(gen, m, n, 1.0)) : random_matrix(gen, m, n, 1.0);
    std::vector<double> ed(n);
    for (auto& e : ed) e = (coin(gen) || coin(gen) ? 1.0 : -1.0) * mag(gen);
    const Matrix Q = S.transpose() * pseudo_inverse(R) * S + diag_form(n, ed);
    Matrix block(n + m, n + m);
    block << Q, S.transpose(), S, R;
    const double scale = std::max(1.0, block.norm());
    const bool brute = min_eigenvalue(block) >= -1e-9 * scale;
    psd += brute;
    agree += schur_psd_test(Q, S, R) == brute;
  }
  o.require(agree == 1000, fmt("agree=%g/1000", agree) + fmt(" rank-deficient R=%g", deficient) +
                               fmt(" PSD blocks=%g", psd));
  return o;
}

Outcome criterion10() {
  Outcome o;
  struct Case {
    const char* file;
    double value;  // V(0, 1) in closed form
    bool deep;
  };
  for (const Case& c : {Case{"example7.json", 0.0, false}, Case{"ex43.json", 0.0, true},
                        Case{"tanh.json", std::tanh(1.0), false}}) {
    const ProblemData p = load_problem(fixture(c.file));
    const auto f = c.deep ? finiteness(p, deep_ladder()) : finiteness(p);
    if (f.verdict != Finite::yes) {
      o.require(false, std::string(c.file) + " finite=" + to_string(f.verdict));
      continue;
    }
    const auto ol = open_loop_check(p, f.ladder, 0.0, ones(p.n()));
    double rise = 0.0;
    for (std::size_t i = 1; i < ol.costs.size(); ++i) rise = std::max(rise, ol.costs[i] - ol.costs[i - 1]);
    const double gap = ol.costs.empty() ? INFINITY : std::abs(ol.costs.back() - c.value);
    const double gap_limit = std::abs(ol.costs.back() - ones(p.n()).dot(f.P_limit->front() * ones(p.n())));
    o.require(rise <= 1e-6 && gap <= 1e-4 && gap_limit <= 1e-4,
              std::string(c.file) + fmt(" max rise=%.1e", rise) + fmt(" |J-V|=%.1e", gap) +
                  fmt(" |J-<P_limit x,x>|=%.1e", gap_limit));
  }
  return o;
}

}  // namespace

// Arguments, if any, select criteria by number.
int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9, criterion10};
  std::vector<bool> selected(criteria.size(), argc < 2);
  for (int a = 1; a < argc; ++a) {
    const long k = std::strtol(argv[a], nullptr, 10);
    if (k < 1 || k > static_cast<long>(criteria.size())) {
      std::fprintf(stderr, "unknown criterion: %s\n", argv[a]);
      return 2;
    }
    selected[static_cast<std::size_t>(k - 1)] = true;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto start = Clock::now();
    const Outcome o = guarded(criteria[i]);
    failed += !o.pass;
    std::printf("criterion %zu: %s  (%.1fs) %s\n", i + 1, o.pass ? "PASS" : "FAIL", seconds_since(start),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
