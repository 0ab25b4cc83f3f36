#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oppsched/model.hpp"
#include "oppsched/rng.hpp"

namespace oppsched {

using Count = std::int64_t;

enum class IndexKind {
    ScoreBased,
    PotentialImprovement,
    WeightBased,
    CMu,
    RelativeBest,
    ProportionallyBest,
    Custom,
};

struct IndexRule {
    IndexKind kind = IndexKind::PotentialImprovement;
    std::vector<double> weights;             ///< WeightBased: omega_k per class
    std::vector<std::vector<double>> table;  ///< Custom: index per (class, state)
};

enum class TieKind { Myopic, RandomWeights, PriorityOrder };

/// Resolves ties between different classes whose present users share the
/// maximal index.
struct TieBreakRule {
    TieKind kind = TieKind::Myopic;
    std::vector<double> weights;  ///< RandomWeights, normalized over the tied set
    std::vector<int> order;       ///< PriorityOrder, 0-based classes, highest first
};

struct PolicySpec {
    IndexRule index;
    TieBreakRule tie;
};

/// Users present this slot, per class and channel state.
struct Occupancy {
    std::vector<std::vector<Count>> counts;

    Count total(std::size_t k) const;
    Count total() const;
};

struct ServeDecision {
    bool idle = true;
    int cls = -1;
    int state = -1;

    static ServeDecision serve(int k, int n) { return {false, k, n}; }
    bool operator==(const ServeDecision&) const = default;
};

/// Index value of (class k, state n), 0-based. +infinity for the PI index
/// when no better state can improve the rate.
double index_value(const PolicySpec& spec, std::size_t k, std::size_t n, const SystemConfig& cfg);

/// A policy bound to a configuration. Index values are computed once and
/// mapped to integer priority levels so that floating-point ties (relative
/// tolerance 1e-12) compare exactly.
class Policy {
public:
    Policy(PolicySpec spec, const SystemConfig& cfg);

    const PolicySpec& spec() const { return spec_; }
    std::size_t num_classes() const { return index_.size(); }
    std::size_t num_states(std::size_t k) const { return index_[k].size(); }

    double index(std::size_t k, std::size_t n) const { return index_[k][n]; }
    /// Priority level of (k, n); larger is better, -1 for q = 0 states.
    int level(std::size_t k, std::size_t n) const { return level_[k][n]; }
    int num_levels() const { return num_levels_; }

    /// States of class k with q > 0 at `lvl`, ordered by service preference
    /// (highest mu first, then highest state).
    const std::vector<int>& states_at(std::size_t k, int lvl) const { return by_level_[k][lvl]; }

    /// Probability that each class in `tied` is selected; same order as `tied`.
    std::vector<double> tie_probabilities(std::span<const int> tied) const;

    /// Picks one class out of `tied` using `rng` only when the choice is random.
    int break_tie(std::span<const int> tied, Rng& rng) const;

    ServeDecision select(const Occupancy& occ, Rng& rng) const;

    /// Same as select() for classes listed in `saturated`, which are treated
    /// as having one user present in every q > 0 state.
    ServeDecision select(const Occupancy& occ, const std::vector<bool>& saturated, Rng& rng) const;

private:
    PolicySpec spec_;
    std::vector<std::vector<double>> index_;
    std::vector<std::vector<int>> level_;
    std::vector<std::vector<std::vector<int>>> by_level_;
    std::vector<int> myopic_rank_;  // position in c_k mu_{k,N_k} descending order
    int num_levels_ = 0;
};

ServeDecision select_user(const Policy& policy, const Occupancy& occ, Rng& rng);

/// Whether every user in a best state is always preferred over any present
/// user that is not in its best state.
bool is_best_rate(const PolicySpec& spec, const SystemConfig& cfg);

/// Best-rate with the myopic tie-break.
bool is_brp(const PolicySpec& spec, const SystemConfig& cfg);

/// Classes ordered by c_k mu_{k,N_k} descending, stable in input order.
std::vector<int> myopic_order(const SystemConfig& cfg);

/// Parse CLI policy strings: sb, pi, pb, rb, cmu, weight:<w1,w2,...>,
/// custom:<file>. The tie rule defaults to the policy's conventional one
/// (myopic for pi, random uniform otherwise) unless `tie` is non-empty.
PolicySpec parse_policy(std::string_view policy, std::string_view tie, std::size_t num_classes);

/// myopic | random:<w1,w2,...> | priority:<k1,k2,...> (1-based classes).
TieBreakRule parse_tie(std::string_view tie, std::size_t num_classes);

std::string policy_name(const PolicySpec& spec);
std::string tie_name(const TieBreakRule& tie);

/// The five policies of the CDMA study with their conventional tie rules.
std::vector<std::pair<std::string, PolicySpec>> standard_policies(std::size_t num_classes);

}  // namespace oppsched
