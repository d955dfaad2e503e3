#include "slq/ode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slq/errors.hpp"

namespace slq {

OdeTrajectory::OdeTrajectory(TimeGrid grid, Eigen::Index rows, Eigen::Index cols)
    : grid_(grid), rows_(rows), cols_(cols) {}

OdeTrajectory OdeTrajectory::from_nodes(const TimeGrid& grid, std::vector<Matrix> values) {
  if (values.size() != grid.n_nodes()) {
    throw DimensionError("from_nodes: one value per grid node is required");
  }
  OdeTrajectory out(grid, values.front().rows(), values.front().cols());
  const std::size_t N = grid.n_steps();
  const double h = grid.h();
  for (std::size_t k = 0; k <= N; ++k) {
    Matrix d;
    if (k == 0) {
      d = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    } else if (k == N) {
      d = (3.0 * values[N] - 4.0 * values[N - 1] + values[N - 2]) / (2.0 * h);
    } else {
      d = (values[k + 1] - values[k - 1]) / (2.0 * h);
    }
    out.push_dense(grid.node(k), values[k], d);
  }
  out.nodes_ = std::move(values);
  return out;
}

OdeTrajectory OdeTrajectory::from_function(const TimeGrid& grid,
                                           const std::function<Matrix(double)>& fn,
                                           const std::function<Matrix(double)>& dfn) {
  const Matrix first = fn(grid.t0());
  OdeTrajectory out(grid, first.rows(), first.cols());
  for (double t : grid.nodes()) {
    Matrix v = fn(t);
    out.push_dense(t, v, dfn(t));
    out.nodes_.push_back(std::move(v));
  }
  return out;
}

void OdeTrajectory::push_dense(double t, const Matrix& value, const Matrix& deriv) {
  times_.push_back(t);
  values_.insert(values_.end(), value.data(), value.data() + stride());
  derivs_.insert(derivs_.end(), deriv.data(), deriv.data() + stride());
}

const Matrix& OdeTrajectory::value(std::size_t k) const {
  if (!has_node(k)) throw std::out_of_range("trajectory has no value at node " + std::to_string(k));
  return nodes_[k - first_node_];
}

std::size_t OdeTrajectory::locate_dense(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0;
  const auto i = static_cast<std::size_t>(it - times_.begin()) - 1;
  return std::min(i, times_.size() - 2);
}

Matrix OdeTrajectory::at(double t) const {
  if (t <= times_.front()) return dense_value(0);
  if (t >= times_.back()) return dense_value(times_.size() - 1);
  const std::size_t i = locate_dense(t);
  const double dt = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / dt;
  const double s2 = s * s, s3 = s2 * s;
  const double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  const double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  return h00 * dense_value(i) + (h10 * dt) * dense_derivative(i) + h01 * dense_value(i + 1) +
         (h11 * dt) * dense_derivative(i + 1);
}

Matrix OdeTrajectory::derivative_at(double t) const {
  if (t <= times_.front()) return dense_derivative(0);
  if (t >= times_.back()) return dense_derivative(times_.size() - 1);
  const std::size_t i = locate_dense(t);
  const double dt = times_[i + 1] - times_[i];
  const double s = (t - times_[i]) / dt;
  const double s2 = s * s;
  const double d00 = (6 * s2 - 6 * s) / dt, d10 = 3 * s2 - 4 * s + 1;
  const double d01 = (-6 * s2 + 6 * s) / dt, d11 = 3 * s2 - 2 * s;
  return d00 * dense_value(i) + d10 * dense_derivative(i) + d01 * dense_value(i + 1) +
         d11 * dense_derivative(i + 1);
}

double OdeTrajectory::max_norm() const {
  double worst = 0.0;
  for (const auto& m : nodes_) worst = std::max(worst, m.norm());
  return worst;
}

namespace {

bool finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

OdeTrajectory integrate_matrix_ode(const MatrixRhs& rhs, const Matrix& start, const TimeGrid& grid,
                                   Direction direction, const OdeOptions& options) {
  if (!(options.blowup_norm > 0.0)) throw PreconditionError("blowup_norm must be positive");
  OdeTrajectory out(grid, start.rows(), start.cols());
  const std::size_t N = grid.n_steps();
  const bool backward = direction == Direction::backward;
  const double sign = backward ? -1.0 : 1.0;

  auto eval = [&](double t, const Matrix& M) {
    Matrix f = rhs(t, M);
    if (!finite(f)) {
      throw NonFiniteValue("right-hand side returned a non-finite value at t=" + std::to_string(t));
    }
    return f;
  };

  // Dense samples are collected in integration order and reversed at the end
  // for backward runs.
  std::vector<Matrix> nodes;
  nodes.reserve(N + 1);

  Matrix M = options.symmetric ? sym(start) : start;
  double t = backward ? grid.T() : grid.t0();
  Matrix f = eval(t, M);
  out.push_dense(t, M, f);
  nodes.push_back(M);

  std::optional<double> blowup;
  std::size_t steps = 0;
  for (std::size_t j = 0; j < N && !blowup; ++j) {
    const std::size_t k_to = backward ? N - j - 1 : j + 1;
    const double t_to = grid.node(k_to);
    const double min_dt = grid.h() * options.min_substep_fraction;
    while (!blowup) {
      const double remaining = std::abs(t_to - t);
      if (remaining <= 0.0) break;
      double pieces = std::ceil(remaining * f.norm() / (M.norm() + 1.0) / options.accuracy);
      if (options.stiffness) {
        pieces = std::max(pieces, std::ceil(remaining * options.stiffness(t, M) / options.stability));
      }
      if (!(pieces >= 1.0)) pieces = 1.0;
      double dt = remaining / pieces;
      if (dt < min_dt && remaining > min_dt) dt = min_dt;
      const bool last = dt >= remaining;
      const double sdt = sign * (last ? remaining : dt);
      const double t_mid = t + 0.5 * sdt;
      const double t_new = last ? t_to : t + sdt;

      // A stage state beyond the bound means the solution escapes inside this step.
      auto escaped = [&](const Matrix& X) {
        return !finite(X) || X.norm() > options.blowup_norm;
      };
      const Matrix& k1 = f;
      const Matrix x2 = M + (0.5 * sdt) * k1;
      if (escaped(x2)) { blowup = t; break; }
      const Matrix k2 = eval(t_mid, x2);
      const Matrix x3 = M + (0.5 * sdt) * k2;
      if (escaped(x3)) { blowup = t; break; }
      const Matrix k3 = eval(t_mid, x3);
      const Matrix x4 = M + sdt * k3;
      if (escaped(x4)) { blowup = t; break; }
      const Matrix k4 = eval(t_new, x4);
      Matrix next = M + (sdt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (options.symmetric) next = sym(next);
      if (++steps > options.max_total_steps) {
        throw StepBudgetExceeded("ODE integration exceeded " +
                                 std::to_string(options.max_total_steps) + " steps");
      }
      if (escaped(next)) { blowup = t_new; break; }
      M = std::move(next);
      t = t_new;
      f = eval(t, M);
      out.push_dense(t, M, f);
    }
    if (!blowup) nodes.push_back(M);
  }

  if (out.times_.size() == 1) {
    // Escaped within the first step: keep a degenerate two-point dense record.
    out.push_dense(out.times_.front(), out.dense_value(0), out.dense_derivative(0));
  }
  if (backward) {
    const std::size_t w = out.stride(), count = out.times_.size();
    std::reverse(out.times_.begin(), out.times_.end());
    for (std::size_t i = 0; i < count / 2; ++i) {
      std::swap_ranges(out.values_.begin() + i * w, out.values_.begin() + (i + 1) * w,
                       out.values_.begin() + (count - 1 - i) * w);
      std::swap_ranges(out.derivs_.begin() + i * w, out.derivs_.begin() + (i + 1) * w,
                       out.derivs_.begin() + (count - 1 - i) * w);
    }
    std::reverse(nodes.begin(), nodes.end());
    out.first_node_ = N + 1 - nodes.size();
  } else {
    out.first_node_ = 0;
  }
  out.nodes_ = std::move(nodes);
  out.blowup_time_ = blowup;
  out.rk_steps_ = steps;
  return out;
}

double integrate_dense(
    const OdeTrajectory& traj,
    const std::function<double(double, const Eigen::Ref<const Matrix>&)>& integrand) {
  const auto& ts = traj.dense_times();
  double acc = 0.0;
  double prev = integrand(ts[0], traj.dense_value(0));
  for (std::size_t i = 1; i < ts.size(); ++i) {
    const double cur = integrand(ts[i], traj.dense_value(i));
    acc += 0.5 * (ts[i] - ts[i - 1]) * (prev + cur);
    prev = cur;
  }
  return acc;
}

MatrixPath as_path(std::shared_ptr<const OdeTrajectory> traj, bool symmetric) {
  const auto r = traj->rows(), c = traj->cols();
  return MatrixPath::function(
      r, c, [traj = std::move(traj)](double t) { return traj->at(t); }, symmetric);
}

}  // namespace slq
