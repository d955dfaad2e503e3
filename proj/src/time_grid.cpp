#include "slq/time_grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slq/errors.hpp"

namespace slq {

TimeGrid::TimeGrid(double t0, double T, std::size_t n_steps)
    : t0_(t0), T_(T), n_steps_(n_steps) {
  if (!(std::isfinite(t0) && std::isfinite(T)) || !(t0 >= 0.0) || !(t0 < T)) {
    throw DimensionError("TimeGrid: need 0 <= t0 < T, got t0=" + std::to_string(t0) +
                         " T=" + std::to_string(T));
  }
  if (n_steps < 2) {
    throw DimensionError("TimeGrid: n_steps must be >= 2");
  }
  h_ = (T - t0) / static_cast<double>(n_steps);
}

std::vector<double> TimeGrid::nodes() const {
  std::vector<double> out(n_nodes());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = node(k);
  return out;
}

std::size_t TimeGrid::locate(double t) const {
  if (t <= t0_) return 0;
  if (t >= T_) return n_steps_;
  auto k = static_cast<std::size_t>(std::floor((t - t0_) / h_));
  // Guard against rounding right at a node.
  if (k < n_steps_ && node(k + 1) <= t) ++k;
  return std::min(k, n_steps_);
}

TimeGrid TimeGrid::refined(std::size_t factor) const {
  return TimeGrid(t0_, T_, n_steps_ * std::max<std::size_t>(factor, 1));
}

TimeGrid TimeGrid::tail_from(double t) const {
  if (t <= t0_) return *this;
  const double steps = std::round((T_ - t) / h_);
  return TimeGrid(t, T_, std::max<std::size_t>(2, static_cast<std::size_t>(steps)));
}

}  // namespace slq
