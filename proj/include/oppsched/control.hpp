#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "oppsched/fluid.hpp"
#include "oppsched/simulator.hpp"

namespace oppsched {

/// Constant allocation over [t_start, t_end). u[k] is the share of slots given
/// to class-k users in the best state.
struct ControlSegment {
    double t_start = 0.0;
    double t_end = std::numeric_limits<double>::infinity();
    std::vector<double> u;
    std::vector<double> x_start;
    std::vector<double> slope;  ///< lambda_k - mu_{k,N_k} u_k
};

struct OptimalControl {
    std::vector<int> order;  ///< classes by c_k mu_{k,N_k} descending
    std::vector<ControlSegment> segments;

    std::vector<double> value_at(double t) const;
    std::vector<double> breakpoints() const;
    double cost_at(double t, const SystemConfig& cfg) const;
};

/// Drains classes one at a time in c-mu order while holding the already
/// emptied ones at zero. Allocations are truncated at unit capacity.
OptimalControl optimal_control(const SystemConfig& cfg, std::span<const double> x0);

/// True when the policy's fluid limit matches the optimal control: same
/// breakpoints and segment values (relative 1e-9), same final drift.
bool check_fluid_optimality(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                            const StationaryOptions& opts = {});

struct GapOptions {
    double r = 1e4;
    double horizon = 90.0;
    double sample_dt = 0.1;
    int seeds = 4;
    std::uint64_t seed = 1;
    Exec exec = Exec::Parallel;
};

/// sum_k c_k Y_k(t) - sum_k c_k x*_k(t) across seeds.
struct GapSeries {
    std::vector<double> t;
    std::vector<double> mean;
    std::vector<double> min;
    std::vector<double> max;
};

GapSeries lower_bound_gap(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                          const GapOptions& opts);

}  // namespace oppsched
