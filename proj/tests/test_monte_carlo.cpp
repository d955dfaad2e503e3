#include <cmath>
#include <numeric>

#include "doctest.h"
#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/solvability.hpp"
#include "support.hpp"

using namespace slq;
using namespace slq::test;

namespace {

ProblemData noisy_scalar(std::size_t steps = 500) {
  return constant_problem(scalar(0.3), scalar(1.0), scalar(0.6), scalar(0.4), scalar(1.0),
                          scalar(0.5), scalar(1.0), steps, 1.0, scalar(0.2));
}

}  // namespace

TEST_CASE("increments are reproducible standard normals") {
  const auto a = path_increments(3, 17, 4000);
  const auto b = path_increments(3, 17, 4000);
  CHECK(a == b);
  CHECK(path_increments(3, 18, 4000) != a);
  CHECK(path_increments(4, 17, 4000) != a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / a.size();
  double var = 0.0;
  for (double z : a) var += (z - mean) * (z - mean);
  var /= a.size() - 1;
  CHECK(std::abs(mean) < 0.06);
  CHECK(var == doctest::Approx(1.0).epsilon(0.06));
}

TEST_CASE("zero problem costs exactly zero") {
  const ProblemData p = constant_problem(scalar(0), scalar(0), scalar(0), scalar(0), scalar(0),
                                         scalar(0), scalar(0), 100);
  SimulationConfig cfg;
  cfg.n_paths = 500;
  const auto est = simulate_cost(
      p, Control::of(FeedbackLaw::state_feedback(MatrixPath::constant(scalar(0)))), 0.0,
      Vector::Constant(1, 1.0), cfg);
  CHECK(est.mean == 0.0);
  CHECK(est.std_error == 0.0);
  CHECK(est.n_paths == 500);
}

TEST_CASE("serial and parallel execution agree bit for bit") {
  const ProblemData p = noisy_scalar();
  const Control c = Control::of(FeedbackLaw::state_feedback(MatrixPath::constant(scalar(-0.7))));
  SimulationConfig cfg;
  cfg.n_paths = 3001;
  cfg.seed = 99;
  cfg.execution = Execution::serial;
  const auto s = simulate_cost(p, c, 0.0, Vector::Constant(1, 1.2), cfg);
  const auto sp = simulate_path_costs(p, c, 0.0, Vector::Constant(1, 1.2), cfg);
  cfg.execution = Execution::parallel;
  const auto q = simulate_cost(p, c, 0.0, Vector::Constant(1, 1.2), cfg);
  const auto qp = simulate_path_costs(p, c, 0.0, Vector::Constant(1, 1.2), cfg);
  CHECK(s.mean == q.mean);
  CHECK(s.std_error == q.std_error);
  CHECK(sp == qp);
}

TEST_CASE("deterministic optimum of the two-control example") {
  // u = (-1/2, -1/2) cancels the noise and drives X from 1 to 0 at T.
  const ProblemData p = load_problem(fixture("example7.json"));
  SimulationConfig cfg;
  cfg.n_paths = 1000;
  const auto est = simulate_cost(p, Control::of(MatrixPath::constant(mat({{-0.5}, {-0.5}}))), 0.0,
                                 Vector::Constant(1, 1.0), cfg);
  CHECK(std::abs(est.mean) < 1e-24);
}

TEST_CASE("Monte Carlo agrees with the feedback cost equation") {
  const ProblemData p = noisy_scalar();
  const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(scalar(-0.7)));
  const Vector x = Vector::Constant(1, 1.2);
  const double exact = feedback_cost(p, law, 0.0, x);
  SimulationConfig cfg;
  cfg.n_paths = 20000;
  cfg.seed = 5;
  const auto est = simulate_cost(p, Control::of(law), 0.0, x, cfg);
  CAPTURE(exact);
  CAPTURE(est.mean);
  CAPTURE(est.std_error);
  // Sampling error plus the O(h) Euler bias.
  CHECK(std::abs(est.mean - exact) < 4.0 * est.std_error + 5e-3 * std::abs(exact));
}

TEST_CASE("Monte Carlo of the inhomogeneous optimal law matches the value function") {
  ProblemSpec s = noisy_scalar().spec();
  s.b = MatrixPath::constant(scalar(0.2));
  s.sigma = MatrixPath::constant(scalar(0.3));
  s.q = MatrixPath::constant(scalar(-0.1));
  s.rho = MatrixPath::constant(scalar(0.25));
  s.g = Vector::Constant(1, 0.4);
  const ProblemData p(s);
  const auto r = closed_loop_solve(p);
  REQUIRE(r.verdict == ClosedLoop::solvable);
  const Vector x = Vector::Constant(1, -0.5);
  const double V = value_function(*r.law, 0.0, x);
  SimulationConfig cfg;
  cfg.n_paths = 20000;
  cfg.seed = 8;
  const auto est = simulate_cost(p, Control::of(*r.law), 0.0, x, cfg);
  CAPTURE(V);
  CAPTURE(est.mean);
  CHECK(std::abs(est.mean - V) < 4.0 * est.std_error + 5e-3 * std::abs(V));
}

TEST_CASE("simulation input checks") {
  const ProblemData p = noisy_scalar();
  const Control c = Control::of(FeedbackLaw::state_feedback(MatrixPath::constant(scalar(0))));
  CHECK_THROWS_AS(simulate_cost(p, c, 0.0, Vector::Zero(2)), DimensionError);
  CHECK_THROWS_AS(simulate_cost(p, Control::of(MatrixPath::constant(Matrix::Zero(2, 1))), 0.0,
                                Vector::Zero(1)),
                  DimensionError);
}

TEST_CASE("probe controls have unit norm") {
  const ProblemData p = load_problem(fixture("example7.json"));
  const ProbeControl u = probe_control(p, 1, 3);
  CHECK(u.levels.rows() == 2);
  CHECK(u.levels.cols() == 10);
  // Pieces have length 1/10.
  CHECK(u.levels.squaredNorm() / 10.0 == doctest::Approx(1.0));
  CHECK(u.path(0.05).isApprox(u.levels.col(0)));
  CHECK(u.path(0.95).isApprox(u.levels.col(9)));
  CHECK(probe_control(p, 1, 3).levels == u.levels);
  CHECK(probe_control(p, 1, 4).levels != u.levels);
}

TEST_CASE("probe cost equals direct simulation of the probe control") {
  const ProblemData p = load_problem(fixture("ex52.json"));
  SimulationConfig cfg;
  cfg.n_paths = 400;
  cfg.seed = 21;
  const auto probe = convexity_probe(p, 3, cfg);
  REQUIRE(probe.costs.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const ProbeControl u = probe_control(p, cfg.seed, k);
    const auto direct = simulate_cost(p, Control::of(u.path), 0.0, Vector::Zero(1), cfg);
    CHECK(probe.costs[k].mean == doctest::Approx(direct.mean).epsilon(1e-10));
    CHECK(probe.costs[k].std_error == doctest::Approx(direct.std_error).epsilon(1e-8));
  }
}

TEST_CASE("probe finds no violation on a convex problem") {
  const ProblemData p = load_problem(fixture("ex52.json"));
  SimulationConfig cfg;
  cfg.n_paths = 5000;
  const auto probe = convexity_probe(p, 40, cfg);
  CHECK(probe.n_controls == 40);
  CHECK_FALSE(probe.violating_control);
  CHECK(probe.min_cost > 0.0);
  CHECK(probe.min_ratio == doctest::Approx(probe.min_cost));
}

TEST_CASE("probe exhibits non-convexity") {
  // J0(0, 0; u) = -E |int u dW|^2 = -|u|^2 when D = 1, R = 0, G = -1 and B = 0.
  const ProblemData p = constant_problem(scalar(0), scalar(0), scalar(0), scalar(1), scalar(-1),
                                         scalar(0), scalar(0), 200);
  SimulationConfig cfg;
  cfg.n_paths = 5000;
  const auto probe = convexity_probe(p, 10, cfg);
  REQUIRE(probe.violating_control);
  CHECK(probe.min_ratio == doctest::Approx(-1.0).epsilon(0.1));
  CHECK(probe.min_cost < -5.0 * probe.min_cost_std_error);
}

TEST_CASE("probe is independent of the execution mode") {
  const ProblemData p = load_problem(fixture("example7.json"));
  SimulationConfig cfg;
  cfg.n_paths = 2500;
  cfg.execution = Execution::serial;
  const auto a = convexity_probe(p, 6, cfg);
  cfg.execution = Execution::parallel;
  const auto b = convexity_probe(p, 6, cfg);
  for (std::size_t k = 0; k < 6; ++k) {
    CHECK(a.costs[k].mean == b.costs[k].mean);
    CHECK(a.costs[k].std_error == b.costs[k].std_error);
  }
  CHECK(a.min_cost == b.min_cost);
}
