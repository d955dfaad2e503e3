#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slq/monte_carlo.hpp"
#include "slq/solvability.hpp"

namespace slq {

inline constexpr const char* kToolVersion = "0.1.0";

struct QueryPoint {
  double t = 0.0;
  Vector x;
};

struct AnalyzeOptions {
  LadderConfig ladder;
  NewtonOptions newton;
  /// Open-loop query points; (t0, 1) when empty.
  std::vector<QueryPoint> queries;
  /// Monte Carlo cost of the closed-loop law at each query point.
  bool simulate = false;
  SimulationConfig sim;
  /// Convexity probes (0 disables the probe).
  std::size_t probes = 200;
};

struct SimulationCheck {
  QueryPoint query;
  CostEstimate estimate;
  double value = 0.0;
};

struct SolvabilityReport {
  StandardConditionsReport standard;
  NecessaryConditionResult necessary;
  FinitenessResult finiteness;
  ClosedLoopResult closed_loop;
  std::vector<OpenLoopResult> open_loop;
  ThetaNormResult theta_norms;
  std::shared_ptr<const OdeTrajectory> M0;
  std::shared_ptr<const OdeTrajectory> N;
  std::optional<ConvexityProbeResult> probe;
  std::vector<SimulationCheck> simulations;
  /// Errors turned into report entries.
  std::vector<std::string> notes;
};

SolvabilityReport analyze(const ProblemData& p, const AnalyzeOptions& options);

using Json = nlohmann::ordered_json;

Json to_json(const StandardConditionsReport& r);
Json to_json(const RegularityReport& r);
Json to_json(const RiccatiSolution& s);
Json to_json(const CostEstimate& e);
Json to_json(const ConvexityProbeResult& r);
Json to_json(const OpenLoopResult& r);
Json ladder_table(const EpsilonLadder& ladder, const ThetaNormResult* theta);
Json finiteness_json(const FinitenessResult& r);
Json closed_loop_json(const ClosedLoopResult& r, const ProblemData& p);
Json config_json(const ProblemData& p, const AnalyzeOptions& o);

/// The full analysis document.
Json report_document(const ProblemData& p, const AnalyzeOptions& o, const SolvabilityReport& r);

/// Node values as CSV rows `t,v_0,...` with vec() in column-major order.
void write_trajectory_csv(const std::string& path, const OdeTrajectory& traj);
/// Several trajectories on the same grid side by side, each under its prefix.
void write_curves_csv(const std::string& path, const TimeGrid& grid,
                      const std::vector<std::pair<std::string, const OdeTrajectory*>>& curves);
void write_text(const std::string& path, const std::string& text);

}  // namespace slq
