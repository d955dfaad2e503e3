#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "slq/feedback.hpp"
#include "slq/problem.hpp"

namespace slq {

enum class Execution { serial, parallel };

struct SimulationConfig {
  std::size_t n_paths = 100'000;
  std::uint64_t seed = 0;
  /// Simulation grid = problem grid on [t, T] refined by this factor.
  std::size_t refine = 1;
  Execution execution = Execution::parallel;
};

struct CostEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// A feedback law u = Theta X + v or a deterministic open-loop control u(s).
struct Control {
  std::optional<FeedbackLaw> feedback;
  std::optional<MatrixPath> open_loop;

  static Control of(FeedbackLaw law) { return Control{std::move(law), std::nullopt}; }
  static Control of(MatrixPath u) { return Control{std::nullopt, std::move(u)}; }
};

/// Euler-Maruyama estimate of J(t, x; u). Path i draws its increments from a
/// generator seeded by (seed, i), so the result does not depend on the
/// execution mode or the thread count. Throws DimensionError.
CostEstimate simulate_cost(const ProblemData& p, const Control& control, double t,
                           const Vector& x, const SimulationConfig& cfg = {});

/// Per-path costs in path order (the samples behind simulate_cost).
std::vector<double> simulate_path_costs(const ProblemData& p, const Control& control, double t,
                                        const Vector& x, const SimulationConfig& cfg);

/// Normal increments of path i, identical to the ones simulate_cost uses.
std::vector<double> path_increments(std::uint64_t seed, std::size_t path, std::size_t steps);

struct ProbeControl {
  /// m x pieces levels of the piecewise-constant control on equal pieces of [t0, T].
  Matrix levels;
  MatrixPath path;
};

struct ConvexityProbeResult {
  double min_cost = 0.0;
  double min_cost_std_error = 0.0;
  /// Smallest J0(t0, 0; u) / E int |u|^2 over the probes (the controls have unit norm).
  double min_ratio = 0.0;
  std::size_t n_controls = 0;
  std::vector<CostEstimate> costs;
  /// A probe with cost below -5 std_error, if any.
  std::optional<ProbeControl> violating_control;
};

/// Random piecewise-constant deterministic controls with standard-normal
/// levels and unit L2 norm, each costed by Monte Carlo on the homogeneous
/// problem from (t0, 0) with common random numbers. One-sided: the probe can
/// exhibit non-convexity but never certify convexity.
ConvexityProbeResult convexity_probe(const ProblemData& p, std::size_t n_controls,
                                     const SimulationConfig& cfg = {}, std::size_t pieces = 10);

/// The probe control with index k, as convexity_probe draws it.
ProbeControl probe_control(const ProblemData& p, std::uint64_t seed, std::size_t k,
                           std::size_t pieces = 10);

}  // namespace slq
