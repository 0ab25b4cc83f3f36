#include "oppsched/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace oppsched {

namespace {

constexpr double kClosedFormTolerance = 1e-12;

std::vector<int> members(const ClassSet& set) {
    std::vector<int> out;
    for (std::size_t k = 0; k < set.size(); ++k)
        if (set[k]) out.push_back(static_cast<int>(k));
    return out;
}

/// Per-level channel CDFs of each class, reused across occupancies.
struct LevelTables {
    int levels = 0;
    std::vector<std::vector<double>> cum;  // [k][v + 1] = P(state level <= v), cum[k][0] = 0
    std::vector<int> top;                  // highest level of class k

    LevelTables(const Policy& policy, const SystemConfig& cfg) : levels(policy.num_levels()) {
        const auto K = cfg.num_classes();
        cum.assign(K, std::vector<double>(levels + 1, 0.0));
        top.assign(K, -1);
        for (std::size_t k = 0; k < K; ++k) {
            const auto& c = cfg.classes[k];
            std::vector<double> at(levels, 0.0);
            for (std::size_t n = 0; n < c.num_states(); ++n) {
                const int lvl = policy.level(k, n);
                if (lvl < 0) continue;
                at[lvl] += c.q[n];
                top[k] = std::max(top[k], lvl);
            }
            for (int v = 0; v < levels; ++v) cum[k][v + 1] = cum[k][v] + at[v];
            // Pin the top of the CDF to exactly one so that F(top)^x == 1.
            for (int v = top[k]; v < levels; ++v) cum[k][v + 1] = 1.0;
        }
    }
};

ServeDistribution serve_distribution_impl(const Policy& policy, const SystemConfig& cfg, const LevelTables& lt,
                                          std::span<const Count> x, const ClassSet& in_u) {
    const auto K = cfg.num_classes();
    ServeDistribution out;
    out.prob.resize(K);
    for (std::size_t k = 0; k < K; ++k) out.prob[k].assign(cfg.classes[k].num_states(), 0.0);

    // F(k, v) = P(class-k maximum level <= v), v in [-1, levels).
    const auto F = [&](std::size_t k, int v) -> double {
        if (!in_u[k]) return v >= lt.top[k] ? 1.0 : 0.0;
        const double base = lt.cum[k][v + 1];
        return std::pow(base, static_cast<double>(x[k]));
    };

    std::vector<int> contenders;
    std::vector<double> pmf(K), below(K);
    std::vector<int> tied;
    for (int v = lt.levels - 1; v >= 0; --v) {
        contenders.clear();
        double base = 1.0;
        for (std::size_t k = 0; k < K; ++k) {
            below[k] = F(k, v - 1);
            pmf[k] = F(k, v) - below[k];
            if (pmf[k] > 0.0)
                contenders.push_back(static_cast<int>(k));
            else
                base *= below[k];
        }
        if (contenders.empty() || base == 0.0) continue;

        const std::size_t c = contenders.size();
        for (std::size_t mask = 1; mask < (std::size_t{1} << c); ++mask) {
            double pw = base;
            tied.clear();
            for (std::size_t i = 0; i < c; ++i) {
                const int k = contenders[i];
                if (mask & (std::size_t{1} << i)) {
                    pw *= pmf[k];
                    tied.push_back(k);
                } else {
                    pw *= below[k];
                }
            }
            if (pw == 0.0) continue;
            const auto tp = policy.tie_probabilities(tied);
            for (std::size_t i = 0; i < tied.size(); ++i) {
                if (tp[i] == 0.0) continue;
                const int k = tied[i];
                const double mass = pw * tp[i];
                const auto& states = policy.states_at(k, v);
                if (!in_u[k]) {
                    out.prob[k][states.front()] += mass;
                    continue;
                }
                // P(served state = s_i | class max at v): presence of s_i and
                // absence of every preferred state at the same level.
                const double lo = lt.cum[k][v];
                const double xk = static_cast<double>(x[k]);
                double suffix = 0.0;
                for (int n : states) suffix += cfg.classes[k].q[n];
                for (int n : states) {
                    const double with = std::pow(lo + suffix, xk);
                    suffix -= cfg.classes[k].q[n];
                    const double without = std::pow(lo + std::max(suffix, 0.0), xk);
                    out.prob[k][n] += mass * (with - without) / pmf[k];
                }
            }
        }
    }

    double idle = 1.0;
    for (std::size_t k = 0; k < K; ++k) idle *= F(k, -1);
    out.idle = idle;
    return out;
}

std::vector<double> drift_from(const ServeDistribution& sd, const SystemConfig& cfg) {
    std::vector<double> d(cfg.num_classes());
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = cfg.classes[k].lambda - sd.departure_rate(k, cfg);
    return d;
}

void require_bernoulli(const SystemConfig& cfg) {
    if (cfg.arrival_kind != ArrivalKind::Bernoulli)
        throw SolverError("stationary solver requires Bernoulli arrivals");
}

struct OneDimSolution {
    StationaryDistribution dist;
    std::vector<double> averaged;
};

OneDimSolution solve_1d(const Policy& policy, const SystemConfig& cfg, int cls, const StationaryOptions& opts) {
    require_bernoulli(cfg);
    const auto K = cfg.num_classes();
    const LevelTables lt(policy, cfg);
    const ClassSet none = empty_set(K);
    ClassSet in_u = empty_set(K);
    in_u[cls] = true;
    std::vector<Count> x(K, 0);

    const auto saturated_sd = serve_distribution_impl(policy, cfg, lt, x, none);
    const double s_inf = saturated_sd.departure_rate(cls, cfg);
    const auto drift_inf = drift_from(saturated_sd, cfg);
    const double lambda = cfg.classes[cls].lambda;

    OneDimSolution sol;
    sol.dist.classes = {cls};
    std::vector<std::vector<double>> drifts;

    x[cls] = 0;
    const auto sd0 = serve_distribution_impl(policy, cfg, lt, x, in_u);
    drifts.push_back(drift_from(sd0, cfg));
    std::vector<double> mass{1.0};

    if (lambda > 0.0) {
        if (lambda >= 1.0 || s_inf <= 0.0 || lambda * (1.0 - s_inf) >= (1.0 - lambda) * s_inf)
            throw SolverError(fmt::format("not ergodic: class {} cannot be drained (lambda = {:.6g}, saturated "
                                          "service rate = {:.6g})",
                                          cls + 1, lambda, s_inf));
        const double r_inf = lambda * (1.0 - s_inf) / ((1.0 - lambda) * s_inf);

        // Largest per-state probability below the top level; once its x-th
        // power underflows the serve distribution equals the saturated one.
        double below_top = 0.0;
        for (int v = 0; v < lt.top[cls]; ++v) below_top = std::max(below_top, lt.cum[cls][v + 1]);

        double s_prev = sd0.departure_rate(cls, cfg);
        double sum = 1.0;
        double p = 1.0;
        bool saturated_regime = false;
        for (Count i = 1;; ++i) {
            if (i > opts.max_support_1d)
                throw SolverError(fmt::format("truncation insufficient: class {} support exceeds {} states", cls + 1,
                                              opts.max_support_1d));
            double s_i;
            if (!saturated_regime && std::pow(below_top, static_cast<double>(i)) < 1e-17) saturated_regime = true;
            if (saturated_regime) {
                s_i = s_inf;
                drifts.push_back(drift_inf);
            } else {
                x[cls] = i;
                const auto sd = serve_distribution_impl(policy, cfg, lt, x, in_u);
                s_i = sd.departure_rate(cls, cfg);
                drifts.push_back(drift_from(sd, cfg));
            }
            if (s_i <= 0.0)
                throw SolverError(fmt::format("not ergodic: class {} is never served with {} users", cls + 1, i));
            const double ratio = lambda * (1.0 - s_prev) / ((1.0 - lambda) * s_i);
            p *= ratio;
            mass.push_back(p);
            sum += p;
            s_prev = s_i;
            const double rhat = std::max(ratio, r_inf);
            if (rhat < 1.0 && p * rhat / (1.0 - rhat) < opts.tail_tol * sum) {
                sol.dist.tail_bound = p * rhat / (1.0 - rhat) / sum;
                break;
            }
        }
        for (auto& m : mass) m /= sum;
    }

    sol.dist.extent = {static_cast<Count>(mass.size())};
    sol.averaged.assign(K, 0.0);
    for (std::size_t i = 0; i < mass.size(); ++i)
        for (std::size_t k = 0; k < K; ++k) sol.averaged[k] += mass[i] * drifts[i][k];
    sol.dist.mass = std::move(mass);
    return sol;
}

struct MultiSolution {
    StationaryDistribution dist;
    std::vector<double> averaged;
};

MultiSolution solve_multid(const Policy& policy, const SystemConfig& cfg, const ClassSet& in_u,
                           const StationaryOptions& opts) {
    require_bernoulli(cfg);
    const auto K = cfg.num_classes();
    const auto u = members(in_u);
    const std::size_t d = u.size();
    if (d == 0) throw std::invalid_argument("stationary_multid needs at least one unsaturated class");
    const LevelTables lt(policy, cfg);

    std::vector<double> lambda(d);
    for (std::size_t i = 0; i < d; ++i) lambda[i] = cfg.classes[u[i]].lambda;

    Count M = opts.initial_grid;
    double prev_boundary = std::numeric_limits<double>::infinity();
    std::vector<double> prev_pi;
    Count prev_M = 0;

    for (;;) {
        const Count ext = M + 1;
        double states_d = std::pow(static_cast<double>(ext), static_cast<double>(d));
        if (states_d > static_cast<double>(opts.max_states))
            throw SolverError(fmt::format("truncation insufficient: grid {}^{} exceeds {} states", ext, d,
                                          opts.max_states));
        const auto N = static_cast<std::size_t>(states_d);
        std::vector<std::size_t> stride(d, 1);
        for (std::size_t i = 1; i < d; ++i) stride[i] = stride[i - 1] * static_cast<std::size_t>(ext);

        // Departure probabilities of every class at every grid point.
        std::vector<double> dep(N * K);
        std::vector<Count> x(K, 0);
        for (std::size_t s = 0; s < N; ++s) {
            std::size_t rem = s;
            for (std::size_t i = 0; i < d; ++i) {
                x[u[i]] = static_cast<Count>(rem % static_cast<std::size_t>(ext));
                rem /= static_cast<std::size_t>(ext);
            }
            const auto sd = serve_distribution_impl(policy, cfg, lt, x, in_u);
            for (std::size_t k = 0; k < K; ++k) dep[s * K + k] = sd.departure_rate(k, cfg);
        }

        // Kernel by target: enumerate departure option and arrival pattern,
        // recovering every source that maps onto the target after clipping.
        SparseKernel kernel;
        kernel.size = N;
        kernel.offsets.reserve(N + 1);
        kernel.offsets.push_back(0);
        const std::size_t per_state = (d + 1) << d;
        kernel.source.reserve(N * per_state);
        kernel.prob.reserve(N * per_state);
        std::vector<Count> y(d);
        std::vector<std::size_t> src_options[2];
        for (std::size_t t = 0; t < N; ++t) {
            std::size_t rem = t;
            for (std::size_t i = 0; i < d; ++i) {
                y[i] = static_cast<Count>(rem % static_cast<std::size_t>(ext));
                rem /= static_cast<std::size_t>(ext);
            }
            for (std::size_t o = 0; o <= d; ++o) {  // o == d: no departure
                for (std::size_t a = 0; a < (std::size_t{1} << d); ++a) {
                    double pa = 1.0;
                    for (std::size_t i = 0; i < d; ++i) pa *= (a >> i & 1) ? lambda[i] : 1.0 - lambda[i];
                    if (pa == 0.0) continue;
                    // Candidate source coordinates per class.
                    std::vector<std::vector<Count>> cand(d);
                    bool ok = true;
                    for (std::size_t i = 0; i < d && ok; ++i) {
                        const Count oi = (o == i) ? 1 : 0;
                        const Count ai = static_cast<Count>(a >> i & 1);
                        if (y[i] < M) {
                            const Count xi = y[i] + oi - ai;
                            if (xi < 0 || xi > M) ok = false;
                            else cand[i].push_back(xi);
                        } else {
                            for (Count xi : {M - 1, M})
                                if (xi >= 0 && xi - oi + ai >= M) cand[i].push_back(xi);
                            if (cand[i].empty()) ok = false;
                        }
                    }
                    if (!ok) continue;
                    // Cartesian product over candidate lists.
                    std::vector<std::size_t> pick(d, 0);
                    for (;;) {
                        std::size_t src = 0;
                        bool departs_ok = true;
                        for (std::size_t i = 0; i < d; ++i) {
                            const Count xi = cand[i][pick[i]];
                            src += static_cast<std::size_t>(xi) * stride[i];
                            if (o == i && xi == 0) departs_ok = false;
                        }
                        if (departs_ok) {
                            double pd;
                            if (o == d) {
                                pd = 1.0;
                                for (std::size_t i = 0; i < d; ++i) pd -= dep[src * K + u[i]];
                                pd = std::max(pd, 0.0);
                            } else {
                                pd = dep[src * K + u[o]];
                            }
                            if (pd * pa > 0.0) {
                                kernel.source.push_back(static_cast<std::uint32_t>(src));
                                kernel.prob.push_back(pd * pa);
                            }
                        }
                        std::size_t i = 0;
                        while (i < d && ++pick[i] == cand[i].size()) pick[i++] = 0;
                        if (i == d) break;
                    }
                }
            }
            kernel.offsets.push_back(kernel.source.size());
        }

        // Start from the previous solution embedded in the larger grid.
        std::vector<double> pi(N, 0.0), next(N, 0.0);
        if (prev_pi.empty()) {
            pi[0] = 1.0;
        } else {
            const auto pext = static_cast<std::size_t>(prev_M + 1);
            for (std::size_t s = 0; s < prev_pi.size(); ++s) {
                std::size_t rem = s, dst = 0;
                for (std::size_t i = 0; i < d; ++i) {
                    dst += (rem % pext) * stride[i];
                    rem /= pext;
                }
                pi[dst] = prev_pi[s];
            }
        }
        std::int64_t it = 0;
        for (;; ++it) {
            if (it >= opts.max_iterations)
                throw SolverError(fmt::format("power iteration did not converge in {} iterations", it));
            const double diff = power_step(kernel, pi, next, opts.exec);
            pi.swap(next);
            if (diff < opts.tol) break;
        }
        const double total = std::accumulate(pi.begin(), pi.end(), 0.0);
        for (auto& p : pi) p /= total;

        const Count layer = std::max<Count>(1, M / 20);
        double boundary = 0.0;
        for (std::size_t s = 0; s < N; ++s) {
            std::size_t rem = s;
            bool edge = false;
            for (std::size_t i = 0; i < d; ++i) {
                if (static_cast<Count>(rem % static_cast<std::size_t>(ext)) > M - layer) edge = true;
                rem /= static_cast<std::size_t>(ext);
            }
            if (edge) boundary += pi[s];
        }

        if (boundary < opts.tail_tol) {
            MultiSolution sol;
            sol.dist.classes = u;
            sol.dist.extent.assign(d, ext);
            sol.dist.tail_bound = boundary;
            sol.dist.iterations = it + 1;
            sol.averaged.assign(K, 0.0);
            for (std::size_t s = 0; s < N; ++s)
                for (std::size_t k = 0; k < K; ++k)
                    sol.averaged[k] += pi[s] * (cfg.classes[k].lambda - dep[s * K + k]);
            sol.dist.mass = std::move(pi);
            return sol;
        }
        if (boundary >= prev_boundary)
            throw SolverError(fmt::format("not ergodic: boundary mass {:.3g} does not shrink as the grid grows",
                                          boundary));
        if (M * 2 > opts.max_grid)
            throw SolverError(fmt::format("truncation insufficient: boundary mass {:.3g} at grid cap {}", boundary,
                                          M));
        prev_boundary = boundary;
        prev_pi = std::move(pi);
        prev_M = M;
        M *= 2;
    }
}

}  // namespace

ClassSet make_set(std::size_t num_classes, std::initializer_list<int> members) {
    ClassSet s(num_classes, false);
    for (int k : members) s.at(static_cast<std::size_t>(k)) = true;
    return s;
}

ClassSet empty_set(std::size_t num_classes) { return ClassSet(num_classes, false); }
ClassSet full_set(std::size_t num_classes) { return ClassSet(num_classes, true); }

std::string format_set(const ClassSet& set) {
    std::string out = "{";
    bool first = true;
    for (std::size_t k = 0; k < set.size(); ++k) {
        if (!set[k]) continue;
        out += fmt::format("{}{}", first ? "" : ";", k + 1);
        first = false;
    }
    return out + "}";
}

ClassSet parse_set(std::string_view text, std::size_t num_classes) {
    ClassSet s(num_classes, false);
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        const std::string item(text.substr(pos, comma - pos));
        const int k = std::stoi(item);
        if (k < 1 || static_cast<std::size_t>(k) > num_classes)
            throw std::invalid_argument(fmt::format("class {} out of range", item));
        s[k - 1] = true;
        pos = comma + 1;
    }
    return s;
}

double ServeDistribution::class_prob(std::size_t k) const {
    return std::accumulate(prob[k].begin(), prob[k].end(), 0.0);
}

double ServeDistribution::departure_rate(std::size_t k, const SystemConfig& cfg) const {
    double r = 0.0;
    for (std::size_t n = 0; n < prob[k].size(); ++n) r += cfg.classes[k].mu[n] * prob[k][n];
    return r;
}

double ServeDistribution::total() const {
    double t = idle;
    for (std::size_t k = 0; k < prob.size(); ++k) t += class_prob(k);
    return t;
}

ServeDistribution serve_distribution(const Policy& policy, const SystemConfig& cfg, std::span<const Count> x,
                                     const ClassSet& in_u) {
    const LevelTables lt(policy, cfg);
    return serve_distribution_impl(policy, cfg, lt, x, in_u);
}

std::vector<double> drift(const Policy& policy, const SystemConfig& cfg, std::span<const Count> x,
                          const ClassSet& in_u) {
    return drift_from(serve_distribution(policy, cfg, x, in_u), cfg);
}

double StationaryDistribution::mean(std::size_t coord) const {
    double m = 0.0;
    std::size_t stride = 1;
    for (std::size_t i = 0; i < coord; ++i) stride *= static_cast<std::size_t>(extent[i]);
    const auto ext = static_cast<std::size_t>(extent[coord]);
    for (std::size_t s = 0; s < mass.size(); ++s) m += mass[s] * static_cast<double>((s / stride) % ext);
    return m;
}

StationaryDistribution stationary_1d(const Policy& policy, const SystemConfig& cfg, int cls,
                                     const StationaryOptions& opts) {
    return solve_1d(policy, cfg, cls, opts).dist;
}

StationaryDistribution stationary_multid(const Policy& policy, const SystemConfig& cfg, const ClassSet& in_u,
                                         const StationaryOptions& opts) {
    return solve_multid(policy, cfg, in_u, opts).dist;
}

std::string to_string(DriftMethod m) {
    switch (m) {
    case DriftMethod::ClosedForm: return "closed_form";
    case DriftMethod::ProductForm: return "product_form";
    case DriftMethod::TruncatedSolve: return "truncated_solve";
    case DriftMethod::MonteCarlo: return "monte_carlo";
    }
    return "?";
}

std::optional<std::vector<int>> best_state_priority(const Policy& policy, const SystemConfig& cfg) {
    const auto K = cfg.num_classes();
    std::vector<int> best(K);
    for (std::size_t k = 0; k < K; ++k) best[k] = policy.level(k, cfg.classes[k].best_state());

    // before(a, b): a's best-state user is always chosen over b's.
    const auto before = [&](int a, int b) -> std::optional<bool> {
        if (best[a] != best[b]) return best[a] > best[b];
        const int pair[2] = {a, b};
        const auto p = policy.tie_probabilities(pair);
        if (p[0] == 1.0) return true;
        if (p[1] == 1.0) return false;
        return std::nullopt;
    };
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = a + 1; b < K; ++b)
            if (!before(static_cast<int>(a), static_cast<int>(b))) return std::nullopt;

    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return *before(a, b); });
    return order;
}

AveragedDrift averaged_drift(const Policy& policy, const SystemConfig& cfg, const ClassSet& in_u, DriftRoute route,
                             const StationaryOptions& opts) {
    const auto K = cfg.num_classes();
    const auto u = members(in_u);
    AveragedDrift out;
    out.in_u = in_u;

    if (u.empty()) {
        std::vector<Count> x(K, 0);
        out.delta = drift(policy, cfg, x, in_u);
        out.method = DriftMethod::ClosedForm;
        out.tolerance = kClosedFormTolerance;
        return out;
    }
    if (u.size() == K) {
        // Every class is in its stationary regime; positive recurrence of the
        // full process requires the maximum stability condition.
        if (load_factor(cfg) >= 1.0)
            throw SolverError(fmt::format("not ergodic: load {:.6g} >= 1 leaves no stationary regime", load_factor(cfg)));
        out.delta.assign(K, 0.0);
        out.method = DriftMethod::ClosedForm;
        out.tolerance = kClosedFormTolerance;
        return out;
    }

    const bool br = is_best_rate(policy.spec(), cfg);
    if (route == DriftRoute::Auto && br) {
        if (const auto order = best_state_priority(policy, cfg)) {
            // Classes of U ahead of the first saturated class share capacity
            // by rate conservation; the first saturated class takes the rest.
            out.delta.resize(K);
            double load = 0.0;
            int first_saturated = -1;
            for (int k : *order) {
                const auto& c = cfg.classes[k];
                if (first_saturated < 0) {
                    if (in_u[k]) {
                        load += c.lambda / c.best_mu();
                        if (load >= 1.0)
                            throw SolverError(fmt::format("not ergodic: priority load {:.6g} >= 1 at class {}", load,
                                                          k + 1));
                        out.delta[k] = 0.0;
                    } else {
                        first_saturated = k;
                        out.delta[k] = c.lambda - c.best_mu() * (1.0 - load);
                    }
                } else {
                    if (in_u[k] && c.lambda > 0.0)
                        throw SolverError(fmt::format("not ergodic: class {} is never served while class {} is "
                                                      "saturated",
                                                      k + 1, first_saturated + 1));
                    out.delta[k] = in_u[k] ? 0.0 : c.lambda;
                }
            }
            out.method = DriftMethod::ClosedForm;
            out.tolerance = kClosedFormTolerance;
            return out;
        }
        if (K == 2) {
            const int k = u.front();
            const int m = 1 - k;
            std::vector<Count> x(K, 0);
            const auto sat = serve_distribution(policy, cfg, x, empty_set(K));
            const double s_inf = sat.departure_rate(k, cfg);
            const auto& ck = cfg.classes[k];
            const auto& cm = cfg.classes[m];
            if (ck.lambda >= s_inf)
                throw SolverError(fmt::format("not ergodic: class {} arrival rate {:.6g} >= saturated service rate "
                                              "{:.6g}",
                                              k + 1, ck.lambda, s_inf));
            out.delta.assign(K, 0.0);
            out.delta[m] = cm.lambda - (1.0 - ck.lambda / ck.best_mu()) * cm.best_mu();
            out.method = DriftMethod::ClosedForm;
            out.tolerance = kClosedFormTolerance;
            return out;
        }
    }

    if (u.size() == 1) {
        auto sol = solve_1d(policy, cfg, u.front(), opts);
        out.delta = std::move(sol.averaged);
        out.method = DriftMethod::ProductForm;
        out.tolerance = std::max(sol.dist.tail_bound, kClosedFormTolerance);
        return out;
    }
    auto sol = solve_multid(policy, cfg, in_u, opts);
    out.delta = std::move(sol.averaged);
    out.method = DriftMethod::TruncatedSolve;
    out.tolerance = std::max(sol.dist.tail_bound, opts.tol);
    return out;
}

}  // namespace oppsched
