#pragma once

#include <cstdint>
#include <vector>

#include "oppsched/kernels.hpp"
#include "oppsched/model.hpp"
#include "oppsched/policy.hpp"
#include "oppsched/rng.hpp"

namespace oppsched {

/// Membership mask over classes; true marks a class in U (normal dynamics),
/// false a saturated class.
using ClassSet = std::vector<bool>;

struct StepRecord {
    ServeDecision decision;
    bool departed = false;
    std::vector<Count> arrivals;
};

/// One slot of the stochastic system. Each present user draws its channel
/// state (one multinomial per class), the policy picks a user, the served
/// user leaves with probability mu, and arrivals are added after service.
class SlotSimulator {
public:
    SlotSimulator(const SystemConfig& cfg, const Policy& policy);

    /// Advances `x` by one slot. Classes with saturated[k] set keep one user
    /// in every q > 0 state and their counts in `x` are left untouched.
    StepRecord step(std::vector<Count>& x, Rng& rng, const ClassSet& saturated = {});

    const Occupancy& last_occupancy() const { return occ_; }
    const SystemConfig& config() const { return cfg_; }
    const Policy& policy() const { return policy_; }

private:
    void sample_channels(std::size_t k, Count users, Rng& rng);
    Count draw_arrivals(std::size_t k, Rng& rng);

    const SystemConfig& cfg_;
    const Policy& policy_;
    Occupancy occ_;
    std::vector<std::vector<int>> support_;  // q > 0 states per class
};

StepRecord step(std::vector<Count>& x, const Policy& policy, const SystemConfig& cfg, Rng& rng);

struct TrajectoryOptions {
    double r = 1.0;
    std::vector<double> x0;  ///< fluid initial state; counts start at floor(r * x0)
    double horizon = 1.0;    ///< fluid time
    double sample_dt = 0.01;
    std::uint64_t seed = 1;
};

/// Fluid-scaled sample path Y(t) = X(floor(r t)) / r with cumulative scaled
/// service times per (class, state).
struct SimTrajectory {
    double r = 1.0;
    std::vector<double> t;
    std::vector<std::vector<double>> y;                 // [sample][class]
    std::vector<std::vector<std::vector<double>>> tau;  // [sample][class][state]

    double tau_best(std::size_t i, std::size_t k) const { return tau[i][k].back(); }
    double tau_nonbest(std::size_t i, std::size_t k) const;
};

SimTrajectory run_trajectory(const SystemConfig& cfg, const Policy& policy, const TrajectoryOptions& opts);

struct CostOptions {
    std::int64_t horizon = 5'000'000;  ///< slots
    std::int64_t warmup = 1'000'000;   ///< slots
    int replications = 10;
    std::uint64_t seed = 1;
    Count divergence_cap = 10'000'000;
    Exec exec = Exec::Parallel;
};

/// Outcome of one cost replication.
struct ReplicationResult {
    double mean_cost = 0.0;
    std::vector<double> mean_counts;
    bool capped = false;   ///< user count exceeded the divergence cap
    bool trending = false; ///< post-warm-up counts grow linearly
};

ReplicationResult simulate_cost_replication(const SystemConfig& cfg, const Policy& policy, std::int64_t horizon,
                                            std::int64_t warmup, Count divergence_cap, Rng& rng);

struct CostEstimate {
    double mean_cost = 0.0;
    std::vector<double> mean_counts;
    double ci_half = 0.0;  ///< 95% normal half-width across replications
    std::int64_t horizon = 0;
    std::int64_t warmup = 0;
    int replications = 0;
    int unstable_replications = 0;
    bool apparent_instability = false;
};

/// Time-average holding cost over [warmup, horizon), replicated with
/// independent streams derived from (seed, replication index).
CostEstimate estimate_mean_cost(const SystemConfig& cfg, const Policy& policy, const CostOptions& opts);

struct SaturatedEstimate {
    std::vector<double> drift;      ///< per-slot arrivals minus departures
    std::vector<double> mean_count; ///< time-average count of U classes
    bool non_ergodic = false;
};

/// Monte Carlo averaged drift: classes outside U hold one user in every
/// q > 0 state; classes in U start empty and follow the normal dynamics.
SaturatedEstimate run_saturated(const SystemConfig& cfg, const Policy& policy, const ClassSet& in_u,
                                std::int64_t horizon, std::uint64_t seed);

struct RateCheck {
    double departure_rate = 0.0;
    double arrival_rate = 0.0;  ///< empirical
    double lambda = 0.0;
    double sigma = 0.0;         ///< binomial standard error of an empirical rate
};

/// Empirical per-class departure rates of a run started empty.
std::vector<RateCheck> rate_conservation_check(const SystemConfig& cfg, const Policy& policy,
                                               std::int64_t horizon, std::uint64_t seed);

/// Least-squares growth test on block means: true when the fitted rise over
/// the window exceeds half the mean level and the slope is significant.
bool trend_detected(const std::vector<double>& block_means);

}  // namespace oppsched
