#include "doctest.h"
#include "slq/errors.hpp"
#include "slq/problem.hpp"
#include "support.hpp"

using namespace slq;
using namespace slq::test;

namespace {

const char* kScalar = R"({
  "horizon": {"t0": 0, "T": 1, "n_steps": 10},
  "dims": {"n": 1, "m": 1},
  "coefficients": {"A": [[0.5]], "B": {"const": [[1]]}, "C": {"const": [[0]]}, "D": {"const": [[0]]}},
  "weights": {"G": {"const": [[2]]}, "Q": {"poly": [[[1, 0, 3]]]}, "R": {"const": [[1]]}}
})";

std::string with(const std::string& from, const std::string& to) {
  std::string s = kScalar;
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  s.replace(pos, from.size(), to);
  return s;
}

}  // namespace

TEST_CASE("problem files load with defaults for the optional terms") {
  const ProblemData p = parse_problem(kScalar);
  CHECK(p.n() == 1);
  CHECK(p.m() == 1);
  CHECK(p.grid().n_steps() == 10);
  CHECK(p.homogeneous());
  CHECK(p.S().is_exactly_zero());
  CHECK(p.G()(0, 0) == 2.0);
  CHECK(p.Q()(0.5)(0, 0) == doctest::Approx(1.75));
  CHECK(p.A()(0.3)(0, 0) == 0.5);
}

TEST_CASE("fixtures load") {
  for (const char* name : {"example7.json", "ex43.json", "ex52.json", "tanh.json"}) {
    CAPTURE(name);
    const ProblemData p = load_problem(fixture(name));
    CHECK(p.grid().n_steps() == 2000);
    CHECK(p.grid().T() == 1.0);
    CHECK(p.homogeneous());
  }
  const ProblemData e7 = load_problem(fixture("example7.json"));
  CHECK(e7.m() == 2);
  CHECK(e7.B()(0.0).isApprox(mat({{1, 1}})));
  CHECK(e7.D()(0.0).isApprox(mat({{1, -1}})));
  const ProblemData e43 = load_problem(fixture("ex43.json"));
  CHECK(e43.R()(0.5)(0, 0) == doctest::Approx(0.25));
  const ProblemData e52 = load_problem(fixture("ex52.json"));
  CHECK(e52.R()(0.25)(0, 0) == doctest::Approx(std::exp(0.75)).epsilon(1e-6));
}

TEST_CASE("input errors are typed") {
  CHECK_THROWS_AS(parse_problem("{not json"), ParseError);
  CHECK_THROWS_AS(parse_problem(with("\"n_steps\": 10", "\"n_steps\": 1")), DimensionError);
  CHECK_THROWS_AS(parse_problem(with("\"A\": [[0.5]]", "\"A\": [[0.5, 1]]")), DimensionError);
  CHECK_THROWS_AS(parse_problem(with("\"A\": [[0.5]]", "\"A\": {\"stochastic\": true}")),
                  UnsupportedStochasticData);
  CHECK_THROWS_AS(parse_problem(with("\"G\": {\"const\": [[2]]}", "\"G\": {\"poly\": [[[2, 1]]]}")),
                  ParseError);
  CHECK_THROWS_AS(parse_problem(with("\"B\": {\"const\": [[1]]}", "\"B\": {\"nope\": 1}")),
                  ParseError);
  CHECK_THROWS_AS(load_problem("/nonexistent/problem.json"), ParseError);
  CHECK_THROWS_AS(TimeGrid(-0.5, 1.0, 10), DimensionError);
  CHECK_THROWS_AS(TimeGrid(1.0, 1.0, 10), DimensionError);

  const std::string two = R"({
    "horizon": {"T": 1, "n_steps": 4}, "dims": {"n": 2, "m": 1},
    "coefficients": {"A": [[0,0],[0,0]], "B": [[1],[0]], "C": [[0,0],[0,0]], "D": [[0],[0]]},
    "weights": {"G": [[1,0],[0,1]], "Q": [[1,0.5],[0,1]], "R": [[1]]}
  })";
  CHECK_THROWS_AS(parse_problem(two), NonSymmetricWeight);
}

TEST_CASE("tiny asymmetry in weights is symmetrized") {
  const std::string two = R"({
    "horizon": {"T": 1, "n_steps": 4}, "dims": {"n": 2, "m": 1},
    "coefficients": {"A": [[0,0],[0,0]], "B": [[1],[0]], "C": [[0,0],[0,0]], "D": [[0],[0]]},
    "weights": {"G": [[1,1e-12],[0,1]], "Q": [[1,0],[0,1]], "R": [[1]]}
  })";
  const ProblemData p = parse_problem(two);
  CHECK(p.G()(0, 1) == p.G()(1, 0));
}

TEST_CASE("serialization round trip") {
  const ProblemData p = load_problem(fixture("ex43.json"));
  const ProblemData q = parse_problem(serialize_problem(p));
  for (double t : {0.0, 0.3, 0.77, 1.0}) {
    CHECK(q.R()(t).isApprox(p.R()(t)));
    CHECK(q.B()(t).isApprox(p.B()(t)));
  }
  CHECK(q.grid() == p.grid());
}

TEST_CASE("derived problems") {
  const ProblemData p = load_problem(fixture("example7.json"));
  const ProblemData s = p.with_control_penalty(0.25);
  CHECK(s.R()(0.4).isApprox(0.25 * Matrix::Identity(2, 2)));
  const ProblemData r = p.restricted_to(0.5);
  CHECK(r.grid().t0() == 0.5);
  CHECK(r.grid().n_steps() == 1000);

  ProblemSpec spec = p.spec();
  spec.b = MatrixPath::constant(scalar(1.0));
  const ProblemData inhom{spec};
  CHECK_FALSE(inhom.homogeneous());
  CHECK(inhom.homogeneous_part().homogeneous());
  CHECK_FALSE(p.control_free_diffusion());
  CHECK(load_problem(fixture("tanh.json")).control_free_diffusion());
}

TEST_CASE("coefficients on and off the RK4 lattice agree with the paths") {
  const ProblemData p = load_problem(fixture("ex43.json"));
  Coefficients scratch;
  for (double t : {0.0, 0.00025, 0.0005, 0.1234567, 1.0}) {
    const auto& c = p.coefficients(t, scratch);
    CHECK(c.R(0, 0) == doctest::Approx(t * t).epsilon(1e-12));
  }
}

TEST_CASE("standard conditions") {
  const auto tanh = check_standard_conditions(load_problem(fixture("tanh.json")));
  CHECK(tanh.holds);
  CHECK(tanh.R_uniform_delta == doctest::Approx(1.0));
  const auto e7 = check_standard_conditions(load_problem(fixture("example7.json")));
  CHECK_FALSE(e7.holds);
  CHECK(e7.G_psd);
  const auto e52 = check_standard_conditions(load_problem(fixture("ex52.json")));
  CHECK_FALSE(e52.G_psd);
  CHECK_FALSE(e52.holds);
}
