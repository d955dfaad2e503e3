#pragma once

#include <cstddef>
#include <vector>

namespace slq {

/// Uniform grid t0 = s_0 < s_1 < ... < s_N = T.
class TimeGrid {
 public:
  TimeGrid(double t0, double T, std::size_t n_steps);

  double t0() const { return t0_; }
  double T() const { return T_; }
  std::size_t n_steps() const { return n_steps_; }
  std::size_t n_nodes() const { return n_steps_ + 1; }
  double h() const { return h_; }

  /// Node time s_k; the last node is exactly T.
  double node(std::size_t k) const {
    return k == n_steps_ ? T_ : t0_ + static_cast<double>(k) * h_;
  }
  std::vector<double> nodes() const;

  /// Index of the last node with s_k <= t (clamped to [0, N]).
  std::size_t locate(double t) const;

  /// Same horizon, n_steps multiplied by `factor`.
  TimeGrid refined(std::size_t factor) const;
  /// Grid [t, T] with roughly the same step size (at least 2 steps).
  TimeGrid tail_from(double t) const;

  bool operator==(const TimeGrid& o) const {
    return t0_ == o.t0_ && T_ == o.T_ && n_steps_ == o.n_steps_;
  }

 private:
  double t0_;
  double T_;
  std::size_t n_steps_;
  double h_;
};

}  // namespace slq
