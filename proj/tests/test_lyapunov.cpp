#include <cmath>

#include "doctest.h"
#include "slq/errors.hpp"
#include "slq/lyapunov.hpp"
#include "support.hpp"

using namespace slq;
using namespace slq::test;

namespace {

// Solution of P' = -k P - c, P(T) = g.
double linear_closed_form(double k, double c, double g, double t, double T) {
  if (std::abs(k) < 1e-14) return g + c * (T - t);
  return (g + c / k) * std::exp(k * (T - t)) - c / k;
}

}  // namespace

TEST_CASE("M0 for scalar coefficients") {
  const double a = 0.3, c = 0.7, q = -0.4, g = 1.5;
  const ProblemData p = constant_problem(scalar(a), scalar(1), scalar(c), scalar(0), scalar(g),
                                         scalar(q), scalar(1));
  const auto M0 = solve_M0(p);
  const double k = 2 * a + c * c;
  for (std::size_t i : {0u, 500u, 1999u, 2000u}) {
    const double t = p.grid().node(i);
    CHECK(M0.value(i)(0, 0) == doctest::Approx(linear_closed_form(k, q, g, t, 1.0)).epsilon(1e-10));
  }
}

TEST_CASE("feedback Lyapunov equation with a constant gain") {
  const double a = -0.2, b = 1.3, c = 0.4, d = 0.5, q = 0.8, r = 0.6, s = 0.25, g = -0.3;
  const double th = -0.9;
  const ProblemData p = constant_problem(scalar(a), scalar(b), scalar(c), scalar(d), scalar(g),
                                         scalar(q), scalar(r), 2000, 1.0, scalar(s));
  const auto P = solve_feedback_lyapunov(p, MatrixPath::constant(scalar(th)));
  const double k = 2 * (a + b * th) + (c + d * th) * (c + d * th);
  const double w = q + 2 * s * th + r * th * th;
  CHECK(P.front()(0, 0) == doctest::Approx(linear_closed_form(k, w, g, 0.0, 1.0)).epsilon(1e-10));

  const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(scalar(th)));
  CHECK(feedback_cost(p, law, 0.0, Vector::Constant(1, 2.0)) ==
        doctest::Approx(4.0 * P.front()(0, 0)).epsilon(1e-9));
  CHECK(feedback_cost(p, law, 0.5, Vector::Constant(1, 1.0)) ==
        doctest::Approx(P.value(1000)(0, 0)).epsilon(1e-9));
}

TEST_CASE("two-state feedback cost is a quadratic form") {
  const Matrix A = mat({{0.1, 1.0}, {-0.5, -0.2}});
  const Matrix B = mat({{0.0}, {1.0}});
  const Matrix C = mat({{0.3, 0.0}, {0.1, 0.2}});
  const Matrix D = mat({{0.2}, {0.0}});
  const Matrix G = mat({{1.0, 0.2}, {0.2, -0.5}});
  const Matrix Q = mat({{0.5, 0.0}, {0.0, 1.0}});
  const ProblemData p = constant_problem(A, B, C, D, G, Q, scalar(1.0));
  const Matrix Th = mat({{-0.4, -1.1}});
  const auto P = solve_feedback_lyapunov(p, MatrixPath::constant(Th));
  const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(Th));
  const Vector x = (Vector(2) << 0.7, -1.3).finished();
  CHECK(feedback_cost(p, law, 0.0, x) == doctest::Approx(x.dot(P.front() * x)).epsilon(1e-9));
  CHECK((P.front() - P.front().transpose()).norm() == 0.0);
}

TEST_CASE("augmented cost with inhomogeneous terms") {
  // dX = b ds, running cost X^2 + r u^2 + 2 rho u with a constant open-loop u = v.
  ProblemSpec s;
  s.grid = TimeGrid(0.0, 1.0, 2000);
  s.n = 1;
  s.m = 1;
  s.A = MatrixPath::constant(scalar(0));
  s.B = MatrixPath::constant(scalar(0));
  s.C = MatrixPath::constant(scalar(0));
  s.D = MatrixPath::constant(scalar(0));
  s.b = MatrixPath::constant(scalar(2.0));
  s.G = scalar(0.5);
  s.g = Vector::Constant(1, 0.25);
  s.Q = MatrixPath::constant(scalar(1.0));
  s.R = MatrixPath::constant(scalar(3.0));
  s.rho = MatrixPath::constant(scalar(0.1));
  s.fill_defaults();
  const ProblemData p(std::move(s));
  FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(scalar(0.0)));
  law.v = MatrixPath::constant(scalar(0.7));
  const double x = 1.5, b = 2.0;
  // X(s) = x + b s.
  const double XT = x + b;
  const double expected = (x * x + b * x + b * b / 3.0) + 3.0 * 0.49 + 2 * 0.1 * 0.7 +
                          0.5 * XT * XT + 2 * 0.25 * XT;
  CHECK(feedback_cost(p, law, 0.0, Vector::Constant(1, x)) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("second moments of geometric Brownian motion") {
  const double a = 0.2, c = 0.5, x = 1.3;
  const ProblemData p = constant_problem(scalar(a), scalar(1), scalar(c), scalar(0), scalar(0),
                                         scalar(0), scalar(1));
  const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(scalar(0.0)));
  const auto mom = second_moment(p, law, 0.25, Vector::Constant(1, x));
  CHECK(mom.grid().t0() == 0.25);
  const std::size_t last = mom.grid().n_steps();
  CHECK(mom.Y(last)(0, 0) == doctest::Approx(x * x * std::exp((2 * a + c * c) * 0.75)).epsilon(1e-10));
  CHECK(mom.mean(last)(0) == doctest::Approx(x * std::exp(a * 0.75)).epsilon(1e-10));
  CHECK(mom.mean_at(0.6)(0) == doctest::Approx(x * std::exp(a * 0.35)).epsilon(1e-9));
}

TEST_CASE("control norm of a constant gain") {
  const double a = 0.1, b = 1.0, c = 0.3, th = -0.8, x = 2.0;
  const ProblemData p = constant_problem(scalar(a), scalar(b), scalar(c), scalar(0), scalar(0),
                                         scalar(0), scalar(1));
  const FeedbackLaw law = FeedbackLaw::state_feedback(MatrixPath::constant(scalar(th)));
  const double k = 2 * (a + b * th) + c * c;
  const double expected = th * th * x * x * (std::exp(k) - 1.0) / k;
  CHECK(control_l2_norm(p, law, 0.0, Vector::Constant(1, x)) ==
        doctest::Approx(expected).epsilon(1e-6));
  const auto mom = second_moment(p, law, 0.0, Vector::Constant(1, x));
  CHECK(mean_control(law, mom, 1.0)(0) == doctest::Approx(th * x * std::exp(a + b * th)).epsilon(1e-9));
  CHECK(control_l2_norm(p, law, 0.0, Vector::Zero(1)) == 0.0);
}

TEST_CASE("fundamental matrix and the lower bound N") {
  const double a = -0.7, c = 0.2, q = 0.5, g = 1.0;
  const ProblemData p = constant_problem(scalar(a), scalar(1), scalar(c), scalar(0), scalar(g),
                                         scalar(q), scalar(1));
  const auto Phi = fundamental_matrix(p);
  CHECK(Phi.back()(0, 0) == doctest::Approx(std::exp(a)).epsilon(1e-10));

  const double P0 = 0.3;
  const auto N = lower_bound_N(p, scalar(P0));
  CHECK(N.front()(0, 0) == doctest::Approx(P0).epsilon(1e-12));
  // N(t) = e^{-2at} (P0 - int_0^t e^{2as} (c^2 M0(s) + q) ds), checked at t = 1 by quadrature.
  const double k = 2 * a + c * c;
  double integral = 0.0;
  const int K = 20000;
  for (int i = 0; i <= K; ++i) {
    const double s = static_cast<double>(i) / K;
    const double f = std::exp(2 * a * s) * (c * c * linear_closed_form(k, q, g, s, 1.0) + q);
    integral += (i == 0 || i == K ? 0.5 : 1.0) * f / K;
  }
  CHECK(N.back()(0, 0) == doctest::Approx(std::exp(-2 * a) * (P0 - integral)).epsilon(1e-6));

  const ProblemData stiff = constant_problem(mat({{-14.0, 0.0}, {0.0, 14.0}}), mat({{1.0}, {0.0}}),
                                             Matrix::Zero(2, 2), Matrix::Zero(2, 1),
                                             Matrix::Zero(2, 2), Matrix::Zero(2, 2), scalar(1));
  CHECK_THROWS_AS(lower_bound_N(stiff, Matrix::Identity(2, 2)), SingularFundamentalMatrix);
}
