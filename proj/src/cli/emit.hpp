#pragma once

#include <string>
#include <vector>

#include "csv.hpp"
#include "oppsched/control.hpp"
#include "oppsched/drift.hpp"
#include "oppsched/fluid.hpp"
#include "oppsched/simulator.hpp"

namespace oppsched::cli {

inline const std::vector<std::string> kTrajectoryHeader{"t", "class", "Y", "tau_best", "tau_nonbest"};
inline const std::vector<std::string> kCostHeader{"rho", "policy", "tie", "mean_cost", "ci_half", "replications"};
inline const std::vector<std::string> kDriftHeader{"policy", "tie", "U", "class", "delta_tilde", "method", "tolerance"};
inline const std::vector<std::string> kFluidHeader{"segment", "T_start", "T_end", "U", "class", "drift", "y_start"};
inline const std::vector<std::string> kStabilityHeader{"policy", "tie",           "rho",
                                                       "max_stable", "policy_stable", "rho_star"};
inline const std::vector<std::string> kControlHeader{"segment", "t_start", "t_end", "class", "u_star", "x_star"};

nlohmann::json base_manifest(const std::string& command);
nlohmann::json policy_json(const PolicySpec& spec);

void trajectory_rows(CsvWriter& w, const SimTrajectory& traj);
/// mean_cost is written as inf when the estimate is flagged unstable.
void cost_row(CsvWriter& w, double rho, const PolicySpec& spec, const CostEstimate& est);
void drift_rows(CsvWriter& w, const PolicySpec& spec, const AveragedDrift& d);
void fluid_rows(CsvWriter& w, const FluidTrajectory& traj);
void stability_row(CsvWriter& w, const PolicySpec& spec, const StabilityReport& rep, double rho_star);
void control_rows(CsvWriter& w, const OptimalControl& oc);

}  // namespace oppsched::cli
