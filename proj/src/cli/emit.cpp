#include "emit.hpp"

#include "version.hpp"

namespace oppsched::cli {

nlohmann::json base_manifest(const std::string& command) {
    return {{"tool", "oppsched"}, {"version", kVersion}, {"command", command}};
}

nlohmann::json policy_json(const PolicySpec& spec) {
    return {{"policy", policy_name(spec)}, {"tie", tie_name(spec.tie)}};
}

void trajectory_rows(CsvWriter& w, const SimTrajectory& traj) {
    for (std::size_t i = 0; i < traj.t.size(); ++i)
        for (std::size_t k = 0; k < traj.y[i].size(); ++k)
            w.row(traj.t[i], k + 1, traj.y[i][k], traj.tau_best(i, k), traj.tau_nonbest(i, k));
}

void cost_row(CsvWriter& w, double rho, const PolicySpec& spec, const CostEstimate& est) {
    const double cost = est.apparent_instability ? std::numeric_limits<double>::infinity() : est.mean_cost;
    w.row(rho, policy_name(spec), tie_name(spec.tie), cost, est.ci_half, est.replications);
}

void drift_rows(CsvWriter& w, const PolicySpec& spec, const AveragedDrift& d) {
    for (std::size_t k = 0; k < d.delta.size(); ++k)
        w.row(policy_name(spec), tie_name(spec.tie), format_set(d.in_u), k + 1, d.delta[k], to_string(d.method),
              d.tolerance);
}

void fluid_rows(CsvWriter& w, const FluidTrajectory& traj) {
    for (std::size_t s = 0; s < traj.segments.size(); ++s) {
        const auto& seg = traj.segments[s];
        for (std::size_t k = 0; k < seg.drift.size(); ++k)
            w.row(s, seg.t_start, seg.t_end, format_set(seg.in_u), k + 1, seg.drift[k], seg.y_start[k]);
    }
}

void stability_row(CsvWriter& w, const PolicySpec& spec, const StabilityReport& rep, double rho_star) {
    w.row(policy_name(spec), tie_name(spec.tie), rep.rho, rep.max_stable, rep.policy_stable, rho_star);
}

void control_rows(CsvWriter& w, const OptimalControl& oc) {
    for (std::size_t s = 0; s < oc.segments.size(); ++s) {
        const auto& seg = oc.segments[s];
        for (std::size_t k = 0; k < seg.u.size(); ++k) w.row(s, seg.t_start, seg.t_end, k + 1, seg.u[k], seg.x_start[k]);
    }
}

}  // namespace oppsched::cli
