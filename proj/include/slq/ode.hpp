#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "slq/matrix_path.hpp"
#include "slq/time_grid.hpp"

namespace slq {

enum class Direction { forward, backward };

using MatrixRhs = std::function<Matrix(double, const Matrix&)>;
/// Estimate of the local stiffness |df/dM| at (t, M), used to split grid steps.
using StiffnessEstimate = std::function<double(double, const Matrix&)>;

struct OdeOptions {
  double blowup_norm = 1e12;
  /// Symmetrize the state after every (sub)step.
  bool symmetric = false;
  /// Optional stiffness estimate (a bound on the spectral radius of df/dM).
  StiffnessEstimate stiffness;
  /// Target value of (substep length) x (stiffness estimate).
  double stability = 1.5;
  /// Target value of (substep length) x |f| / (|M| + 1).
  double accuracy = 0.01;
  /// Substeps never get shorter than h * min_substep_fraction. The bound is
  /// tiny so that a solution escaping to infinity at a grid node is still
  /// followed up to the norm bound.
  double min_substep_fraction = 0x1p-40;
  /// Budget on the total number of RK4 steps; StepBudgetExceeded beyond it.
  std::size_t max_total_steps = 20'000'000;
};

/// Solution of a matrix ODE on the nodes of a grid, plus dense output.
///
/// Node values are stored for the nodes that were reached. After a blow-up
/// the trajectory covers only the part of the horizon integrated before the
/// norm bound was crossed.
class OdeTrajectory {
 public:
  OdeTrajectory(TimeGrid grid, Eigen::Index rows, Eigen::Index cols);

  /// Trajectory sampled from node values; the dense interpolant uses
  /// derivatives from finite differences of the nodes.
  static OdeTrajectory from_nodes(const TimeGrid& grid, std::vector<Matrix> values);
  /// Samples of fn at the nodes with exact derivatives dfn.
  static OdeTrajectory from_function(const TimeGrid& grid,
                                     const std::function<Matrix(double)>& fn,
                                     const std::function<Matrix(double)>& dfn);

  const TimeGrid& grid() const { return grid_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  bool blew_up() const { return blowup_time_.has_value(); }
  std::optional<double> blowup_time() const { return blowup_time_; }

  /// Range [first_node, last_node] of nodes that hold values.
  std::size_t first_node() const { return first_node_; }
  std::size_t last_node() const { return first_node_ + nodes_.size() - 1; }
  bool has_node(std::size_t k) const { return k >= first_node_ && k <= last_node(); }
  /// Value at node k; throws std::out_of_range when the node was not reached.
  const Matrix& value(std::size_t k) const;
  const Matrix& front() const { return nodes_.front(); }
  const Matrix& back() const { return nodes_.back(); }

  /// Cubic Hermite interpolant of the dense output, clamped to the covered range.
  Matrix at(double t) const;
  Matrix derivative_at(double t) const;

  /// Covered time range.
  double t_begin() const { return times_.front(); }
  double t_end() const { return times_.back(); }

  using ConstMap = Eigen::Map<const Matrix>;
  const std::vector<double>& dense_times() const { return times_; }
  ConstMap dense_value(std::size_t i) const { return {values_.data() + i * stride(), rows_, cols_}; }
  ConstMap dense_derivative(std::size_t i) const {
    return {derivs_.data() + i * stride(), rows_, cols_};
  }
  std::size_t dense_size() const { return times_.size(); }

  /// Total number of RK4 steps taken (at least one per grid step covered).
  std::size_t rk_steps() const { return rk_steps_; }

  /// max over covered nodes of |M|_F.
  double max_norm() const;

 private:
  friend OdeTrajectory integrate_matrix_ode(const MatrixRhs&, const Matrix&, const TimeGrid&,
                                            Direction, const OdeOptions&);
  std::size_t locate_dense(double t) const;
  std::size_t stride() const { return static_cast<std::size_t>(rows_ * cols_); }
  void push_dense(double t, const Matrix& value, const Matrix& deriv);

  TimeGrid grid_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  std::size_t first_node_ = 0;
  std::vector<Matrix> nodes_;
  std::vector<double> times_;
  std::vector<double> values_;  // column-major samples, stride() doubles each
  std::vector<double> derivs_;
  std::optional<double> blowup_time_;
  std::size_t rk_steps_ = 0;
};

/// Classical RK4 on the grid, forward from grid.t0() or backward from grid.T().
///
/// Each grid step is split into substeps so that (substep length) x (stiffness)
/// stays below options.stability; on smooth problems this is one substep per
/// grid step. Integration stops with blew_up() set once |M|_F exceeds
/// options.blowup_norm. Throws NonFiniteValue when the right-hand side
/// returns NaN or Inf for a finite input below the bound.
OdeTrajectory integrate_matrix_ode(const MatrixRhs& rhs, const Matrix& start, const TimeGrid& grid,
                                   Direction direction, const OdeOptions& options = {});

/// Trapezoid rule of a scalar function over the dense samples of a trajectory.
double integrate_dense(
    const OdeTrajectory& traj,
    const std::function<double(double, const Eigen::Ref<const Matrix>&)>& integrand);

/// A MatrixPath evaluating the Hermite interpolant of a shared trajectory.
MatrixPath as_path(std::shared_ptr<const OdeTrajectory> traj, bool symmetric = false);

}  // namespace slq
