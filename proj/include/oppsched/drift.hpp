#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "oppsched/kernels.hpp"
#include "oppsched/model.hpp"
#include "oppsched/policy.hpp"
#include "oppsched/simulator.hpp"

namespace oppsched {

/// Raised when a stationary law of a partially saturated process does not
/// exist or cannot be resolved on the configured grid.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ClassSet make_set(std::size_t num_classes, std::initializer_list<int> members);
ClassSet empty_set(std::size_t num_classes);
ClassSet full_set(std::size_t num_classes);
/// "{1;2}" with 1-based members, "{}" when empty.
std::string format_set(const ClassSet& set);
/// Parses "1,2" (1-based); empty string gives the empty set.
ClassSet parse_set(std::string_view text, std::size_t num_classes);

/// Exact probability of serving each (class, state) in one slot.
struct ServeDistribution {
    std::vector<std::vector<double>> prob;  // [class][state]
    double idle = 0.0;

    double class_prob(std::size_t k) const;
    /// sum_n mu_{k,n} P(serve k in n)
    double departure_rate(std::size_t k, const SystemConfig& cfg) const;
    double total() const;
};

/// Classes in `in_u` hold x[k] users with i.i.d. channel states; the others
/// are saturated (one user in every q > 0 state). Enumerates distinct index
/// levels from the top and resolves cross-class ties with the tie-break
/// probabilities and within-class ties with the highest-mu present state.
ServeDistribution serve_distribution(const Policy& policy, const SystemConfig& cfg, std::span<const Count> x,
                                     const ClassSet& in_u);

/// One-slot drift E[X(1) - x | X(0) = x] for every class; saturated classes
/// use the same formula (their counts do not move in the saturated process).
std::vector<double> drift(const Policy& policy, const SystemConfig& cfg, std::span<const Count> x,
                          const ClassSet& in_u);

struct StationaryOptions {
    double tail_tol = 1e-8;
    double tol = 1e-10;            ///< power-iteration L1 change
    Count initial_grid = 200;      ///< per coordinate
    Count max_grid = 3200;
    std::size_t max_states = std::size_t{1} << 22;
    std::int64_t max_iterations = 2'000'000;
    Count max_support_1d = 10'000'000;
    Exec exec = Exec::Parallel;
};

struct StationaryDistribution {
    std::vector<int> classes;   ///< members of U, 0-based
    std::vector<Count> extent;  ///< grid points per coordinate
    std::vector<double> mass;   ///< row-major over extent
    double tail_bound = 0.0;    ///< mass beyond the support (1-d) or in the boundary layer (multi-d)
    std::int64_t iterations = 0;

    double mean(std::size_t coord) const;
};

/// Birth-death product form for a single unsaturated class with Bernoulli
/// arrivals; all other classes are saturated.
StationaryDistribution stationary_1d(const Policy& policy, const SystemConfig& cfg, int cls,
                                     const StationaryOptions& opts = {});

/// Power iteration on the grid {0..M}^|U| with transitions clipped at M.
/// M doubles until the boundary-layer mass falls below tail_tol.
StationaryDistribution stationary_multid(const Policy& policy, const SystemConfig& cfg, const ClassSet& in_u,
                                         const StationaryOptions& opts = {});

enum class DriftMethod { ClosedForm, ProductForm, TruncatedSolve, MonteCarlo };
std::string to_string(DriftMethod m);

enum class DriftRoute { Auto, Numeric };

struct AveragedDrift {
    std::vector<double> delta;
    ClassSet in_u;
    DriftMethod method = DriftMethod::ClosedForm;
    double tolerance = 0.0;  ///< absolute accuracy estimate of each component
};

/// Averaged drift of the process with classes outside U saturated. Auto uses
/// the rate-conservation closed forms when they apply; Numeric always goes
/// through the stationary solvers (except for U empty, which needs none).
AveragedDrift averaged_drift(const Policy& policy, const SystemConfig& cfg, const ClassSet& in_u,
                             DriftRoute route = DriftRoute::Auto, const StationaryOptions& opts = {});

/// Order in which best-state users are served when several classes have one,
/// if that order is deterministic for every pair; empty otherwise.
std::optional<std::vector<int>> best_state_priority(const Policy& policy, const SystemConfig& cfg);

}  // namespace oppsched
