#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "oppsched/drift.hpp"

namespace oppsched {

/// One linear piece of the fluid limit. y(t) = y_start + drift * (t - t_start).
struct FluidSegment {
    double t_start = 0.0;
    double t_end = std::numeric_limits<double>::infinity();
    ClassSet in_u;  ///< classes already emptied (held at zero)
    std::vector<double> drift;
    std::vector<double> y_start;
    DriftMethod method = DriftMethod::ClosedForm;
};

enum class Terminal { EmptiedAt, GrowsForever };

struct FluidTrajectory {
    std::vector<FluidSegment> segments;
    Terminal terminal = Terminal::EmptiedAt;
    double emptied_time = std::numeric_limits<double>::infinity();
    std::vector<std::string> warnings;

    std::vector<double> value_at(double t) const;
    /// Finite segment boundaries T_1, T_2, ... (T_0 = 0 excluded).
    std::vector<double> breakpoints() const;
    /// Drift of the last segment.
    const std::vector<double>& final_drift() const { return segments.back().drift; }
};

/// Piecewise-linear fluid limit from x0. Each stage uses the averaged drift of
/// the current emptied set; classes whose level hits zero join it, all
/// minimizers at once. Ends at the emptying time or when nothing drains.
FluidTrajectory fluid_trajectory(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                                 const StationaryOptions& opts = {});

struct MaxStability {
    bool stable = false;
    double rho = 0.0;
};

MaxStability is_max_stable(const SystemConfig& cfg);

struct StabilityReport {
    double rho = 0.0;
    bool max_stable = false;
    bool policy_stable = false;
    std::string method;            ///< "best_rate" or "fluid"
    std::vector<double> breakpoints;
    std::string note;              ///< reason when a stage has no stationary regime
};

/// Best-rate policies are stable exactly when rho < 1; other policies are
/// judged by the fluid limit from `x0` (all ones when empty).
StabilityReport is_stable(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0 = {},
                          const StationaryOptions& opts = {});

struct Sweep {
    int cls = 0;  ///< class whose arrival rate varies, 0-based
    double lo = 0.0;
    double hi = 0.0;
};

struct Threshold {
    double rho_star = 1.0;
    double lambda_star = 0.0;  ///< swept arrival rate at rho_star
    std::string method;        ///< "best_rate" or "bisection"
    int evaluations = 0;
};

/// Critical load along the sweep where the stability verdict flips.
Threshold stability_threshold(const PolicySpec& spec, const SystemConfig& cfg, const Sweep& sweep,
                              double rho_tol = 1e-4, const StationaryOptions& opts = {});

/// Final-segment drift from x0 = all ones; zero when the system drains.
std::vector<double> growth_rates(const Policy& policy, const SystemConfig& cfg, const StationaryOptions& opts = {});

/// (sum_k x0_k / mu_{k,N_k}) / (1 - rho); infinite when rho >= 1.
double best_rate_emptying_time(const SystemConfig& cfg, std::span<const double> x0);

}  // namespace oppsched
