#include "oppsched/fluid.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace oppsched {

namespace {

constexpr double kDriftEps = 1e-12;
constexpr double kArgminTol = 1e-9;

bool all_in(const ClassSet& s) { return std::all_of(s.begin(), s.end(), [](bool b) { return b; }); }

std::vector<double> ones(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace

std::vector<double> FluidTrajectory::value_at(double t) const {
    const FluidSegment* seg = &segments.front();
    for (const auto& s : segments) {
        if (t < s.t_start) break;
        seg = &s;
    }
    std::vector<double> y(seg->y_start.size());
    const double dt = std::max(0.0, t - seg->t_start);
    for (std::size_t k = 0; k < y.size(); ++k) y[k] = std::max(0.0, seg->y_start[k] + seg->drift[k] * dt);
    return y;
}

std::vector<double> FluidTrajectory::breakpoints() const {
    std::vector<double> out;
    for (const auto& s : segments)
        if (std::isfinite(s.t_end)) out.push_back(s.t_end);
    return out;
}

FluidTrajectory fluid_trajectory(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                                 const StationaryOptions& opts) {
    const auto K = cfg.num_classes();
    if (x0.size() != K) throw std::invalid_argument(fmt::format("x0 has {} entries for {} classes", x0.size(), K));
    for (double v : x0)
        if (!(v >= 0.0)) throw std::invalid_argument("x0 must be nonnegative");

    FluidTrajectory traj;
    std::vector<double> y(x0.begin(), x0.end());
    ClassSet u = empty_set(K);

    // Zero starts: absorb classes at zero that would not leave it.
    if (std::any_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) {
        traj.warnings.push_back("zero-initial ambiguity: classes starting at 0 are placed by the sign of their drift");
        for (bool changed = true; changed && !all_in(u);) {
            changed = false;
            const auto a = averaged_drift(policy, cfg, u, DriftRoute::Auto, opts);
            for (std::size_t k = 0; k < K; ++k) {
                if (!u[k] && y[k] == 0.0 && a.delta[k] <= kDriftEps) {
                    u[k] = true;
                    changed = true;
                }
            }
        }
    }

    double t = 0.0;
    for (;;) {
        const auto a = averaged_drift(policy, cfg, u, DriftRoute::Auto, opts);
        FluidSegment seg;
        seg.t_start = t;
        seg.in_u = u;
        seg.drift = a.delta;
        seg.y_start = y;
        seg.method = a.method;
        for (std::size_t k = 0; k < K; ++k)
            if (u[k]) seg.drift[k] = 0.0;

        if (all_in(u)) {
            traj.segments.push_back(std::move(seg));
            traj.terminal = Terminal::EmptiedAt;
            traj.emptied_time = t;
            return traj;
        }

        double tmin = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k)
            if (!u[k] && seg.drift[k] < -kDriftEps) tmin = std::min(tmin, y[k] / -seg.drift[k]);

        if (!std::isfinite(tmin)) {
            traj.segments.push_back(std::move(seg));
            traj.terminal = Terminal::GrowsForever;
            return traj;
        }

        seg.t_end = t + tmin;
        for (std::size_t k = 0; k < K; ++k) {
            if (u[k]) continue;
            if (seg.drift[k] < -kDriftEps && y[k] / -seg.drift[k] <= tmin * (1.0 + kArgminTol) + 1e-300) {
                u[k] = true;
                y[k] = 0.0;
            } else {
                y[k] = std::max(0.0, y[k] + seg.drift[k] * tmin);
            }
        }
        t = seg.t_end;
        traj.segments.push_back(std::move(seg));
    }
}

MaxStability is_max_stable(const SystemConfig& cfg) {
    const double rho = load_factor(cfg);
    return {rho < 1.0, rho};
}

StabilityReport is_stable(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                          const StationaryOptions& opts) {
    StabilityReport rep;
    const auto ms = is_max_stable(cfg);
    rep.rho = ms.rho;
    rep.max_stable = ms.stable;
    if (is_best_rate(policy.spec(), cfg)) {
        rep.method = "best_rate";
        rep.policy_stable = ms.stable;
        return rep;
    }
    rep.method = "fluid";
    const auto start = x0.empty() ? ones(cfg.num_classes()) : std::vector<double>(x0.begin(), x0.end());
    try {
        const auto traj = fluid_trajectory(policy, cfg, start, opts);
        rep.breakpoints = traj.breakpoints();
        rep.policy_stable = traj.terminal == Terminal::EmptiedAt;
    } catch (const SolverError& e) {
        // A stage whose unsaturated classes cannot settle never drains.
        if (std::string_view(e.what()).starts_with("not ergodic")) {
            rep.policy_stable = false;
            rep.note = e.what();
        } else {
            throw;
        }
    }
    return rep;
}

Threshold stability_threshold(const PolicySpec& spec, const SystemConfig& cfg, const Sweep& sweep, double rho_tol,
                              const StationaryOptions& opts) {
    const auto K = cfg.num_classes();
    if (sweep.cls < 0 || static_cast<std::size_t>(sweep.cls) >= K)
        throw std::invalid_argument(fmt::format("sweep class {} out of range", sweep.cls + 1));
    if (!(sweep.lo < sweep.hi)) throw std::invalid_argument("sweep range must satisfy lo < hi");

    Threshold th;
    if (is_best_rate(spec, cfg)) {
        th.rho_star = 1.0;
        th.method = "best_rate";
        double rest = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            if (static_cast<int>(k) != sweep.cls) rest += cfg.classes[k].lambda / cfg.classes[k].best_mu();
        th.lambda_star = (1.0 - rest) * cfg.classes[sweep.cls].best_mu();
        return th;
    }

    th.method = "bisection";
    auto at = [&](double lambda) {
        SystemConfig c = cfg;
        c.classes[sweep.cls].lambda = lambda;
        return c;
    };
    auto stable = [&](double lambda) {
        const auto c = at(lambda);
        const Policy p(spec, c);
        ++th.evaluations;
        return is_stable(p, c, {}, opts).policy_stable;
    };

    double lo = sweep.lo, hi = sweep.hi;
    if (!stable(lo) || stable(hi))
        throw SolverError(fmt::format("no sign change in sweep range [{}, {}]", sweep.lo, sweep.hi));
    const double mu_n = cfg.classes[sweep.cls].best_mu();
    while ((hi - lo) / mu_n > rho_tol) {
        const double mid = 0.5 * (lo + hi);
        (stable(mid) ? lo : hi) = mid;
    }
    th.lambda_star = 0.5 * (lo + hi);
    th.rho_star = load_factor(at(th.lambda_star));
    return th;
}

std::vector<double> growth_rates(const Policy& policy, const SystemConfig& cfg, const StationaryOptions& opts) {
    const auto start = ones(cfg.num_classes());
    const auto traj = fluid_trajectory(policy, cfg, start, opts);
    if (traj.terminal == Terminal::EmptiedAt) return std::vector<double>(cfg.num_classes(), 0.0);
    return traj.final_drift();
}

double best_rate_emptying_time(const SystemConfig& cfg, std::span<const double> x0) {
    const double rho = load_factor(cfg);
    if (rho >= 1.0) return std::numeric_limits<double>::infinity();
    double work = 0.0;
    for (std::size_t k = 0; k < cfg.num_classes(); ++k) work += x0[k] / cfg.classes[k].best_mu();
    return work / (1.0 - rho);
}

}  // namespace oppsched
