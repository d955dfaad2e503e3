#pragma once

#include <memory>
#include <string>
#include <vector>

#include "slq/matrix_path.hpp"
#include "slq/time_grid.hpp"

namespace slq {

/// Plain description of one stochastic LQ instance on [t0, T]:
///
///   dX = (A X + B u + b) ds + (C X + D u + sigma) dW,
///   J  = E{ <G X(T), X(T)> + 2<g, X(T)>
///           + int [ <Q X,X> + 2<S X,u> + <R u,u> + 2<q,X> + 2<rho,u> ] ds }.
///
/// All inhomogeneous terms are deterministic.
struct ProblemSpec {
  std::string name;
  TimeGrid grid{0.0, 1.0, 2000};
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  MatrixPath A, B, C, D, b, sigma;
  Matrix G;
  MatrixPath Q, S, R;
  Vector g;
  MatrixPath q, rho;

  /// Fills every unset inhomogeneous term (and S) with zeros of the right shape.
  void fill_defaults();
};

/// Coefficients frozen at one time.
struct Coefficients {
  Matrix A, B, C, D, Q, S, R;
  Vector b, sigma, q, rho;
};

/// A validated, immutable problem instance.
class ProblemData {
 public:
  /// Validates dimensions and symmetry; weights with asymmetry up to 1e-9 are
  /// symmetrized, larger asymmetry throws NonSymmetricWeight.
  explicit ProblemData(ProblemSpec spec);

  const ProblemSpec& spec() const { return spec_; }
  const std::string& name() const { return spec_.name; }
  Eigen::Index n() const { return spec_.n; }
  Eigen::Index m() const { return spec_.m; }
  const TimeGrid& grid() const { return spec_.grid; }

  const MatrixPath& A() const { return spec_.A; }
  const MatrixPath& B() const { return spec_.B; }
  const MatrixPath& C() const { return spec_.C; }
  const MatrixPath& D() const { return spec_.D; }
  const MatrixPath& b() const { return spec_.b; }
  const MatrixPath& sigma() const { return spec_.sigma; }
  const Matrix& G() const { return spec_.G; }
  const MatrixPath& Q() const { return spec_.Q; }
  const MatrixPath& S() const { return spec_.S; }
  const MatrixPath& R() const { return spec_.R; }
  const Vector& g() const { return spec_.g; }
  const MatrixPath& q() const { return spec_.q; }
  const MatrixPath& rho() const { return spec_.rho; }

  /// Coefficients at time t. Times on the half-step lattice of the grid (the
  /// RK4 stage times) are served from a precomputed table; other times are
  /// evaluated into `scratch`.
  const Coefficients& coefficients(double t, Coefficients& scratch) const;

  /// True iff b, sigma, g, q, rho vanish on the grid.
  bool homogeneous() const;
  /// D vanishes on the grid.
  bool control_free_diffusion() const;

  ProblemData homogeneous_part() const;
  /// Same problem with R replaced by R + eps I.
  ProblemData with_control_penalty(double eps) const;
  ProblemData with_grid(const TimeGrid& grid) const;
  /// Horizon restricted to [t, T] (same step size).
  ProblemData restricted_to(double t) const;

 private:
  void validate();
  void build_table();

  ProblemSpec spec_;
  std::shared_ptr<const std::vector<Coefficients>> table_;
};

struct StandardConditionsReport {
  bool G_psd = false;
  double R_uniform_delta = 0.0;
  bool schur_complement_psd = false;
  bool holds = false;
};

/// Checks G >= 0, R >= delta I and Q - S'R^{-1}S >= 0 at every grid node.
StandardConditionsReport check_standard_conditions(const ProblemData& p);

/// Loads a problem file (JSON). Throws ParseError, DimensionError,
/// NonSymmetricWeight or UnsupportedStochasticData.
ProblemData load_problem(const std::string& path);
/// Same, from the document text.
ProblemData parse_problem(const std::string& json_text);
/// One path in the problem-file schema ({"const"|"poly"|"samples": ...}).
MatrixPath parse_path(const std::string& json_text, const std::string& what);
/// Serializes back to the problem-file schema.
std::string serialize_problem(const ProblemData& p);

}  // namespace slq
