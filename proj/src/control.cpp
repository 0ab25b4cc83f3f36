#include "oppsched/control.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace oppsched {

namespace {

bool close(double a, double b, double rel) {
    return std::abs(a - b) <= rel * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

std::vector<double> OptimalControl::value_at(double t) const {
    const ControlSegment* seg = &segments.front();
    for (const auto& s : segments) {
        if (t < s.t_start) break;
        seg = &s;
    }
    std::vector<double> x(seg->x_start.size());
    const double dt = std::max(0.0, t - seg->t_start);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::max(0.0, seg->x_start[k] + seg->slope[k] * dt);
    return x;
}

std::vector<double> OptimalControl::breakpoints() const {
    std::vector<double> out;
    for (const auto& s : segments)
        if (std::isfinite(s.t_end)) out.push_back(s.t_end);
    return out;
}

double OptimalControl::cost_at(double t, const SystemConfig& cfg) const {
    const auto x = value_at(t);
    double c = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) c += cfg.classes[k].cost * x[k];
    return c;
}

OptimalControl optimal_control(const SystemConfig& cfg, std::span<const double> x0) {
    const auto K = cfg.num_classes();
    if (x0.size() != K) throw std::invalid_argument(fmt::format("x0 has {} entries for {} classes", x0.size(), K));

    OptimalControl oc;
    oc.order = myopic_order(cfg);
    std::vector<double> x(x0.begin(), x0.end());
    double t = 0.0;
    for (;;) {
        ControlSegment seg;
        seg.t_start = t;
        seg.x_start = x;
        seg.u.assign(K, 0.0);
        seg.slope.resize(K);

        double cap = 1.0;
        int l = -1;
        for (int k : oc.order) {
            const auto& c = cfg.classes[k];
            const double keep = c.lambda / c.best_mu();
            if (x[k] > 0.0 || keep > cap) {
                l = k;
                seg.u[k] = cap;
                break;
            }
            seg.u[k] = keep;
            cap -= keep;
        }
        for (std::size_t k = 0; k < K; ++k)
            seg.slope[k] = cfg.classes[k].lambda - cfg.classes[k].best_mu() * seg.u[k];

        if (l < 0 || seg.slope[l] >= 0.0 || x[l] == 0.0) {
            // Either everything is held at zero or the head class cannot drain.
            oc.segments.push_back(std::move(seg));
            return oc;
        }
        const double dt = x[l] / -seg.slope[l];
        seg.t_end = t + dt;
        for (std::size_t k = 0; k < K; ++k) x[k] = std::max(0.0, x[k] + seg.slope[k] * dt);
        x[l] = 0.0;
        t = seg.t_end;
        oc.segments.push_back(std::move(seg));
    }
}

bool check_fluid_optimality(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                            const StationaryOptions& opts) {
    constexpr double rel = 1e-9;
    const auto traj = fluid_trajectory(policy, cfg, x0, opts);
    const auto oc = optimal_control(cfg, x0);

    const auto tb = traj.breakpoints();
    const auto cb = oc.breakpoints();
    if (tb.size() != cb.size()) return false;
    for (std::size_t i = 0; i < tb.size(); ++i) {
        if (!close(tb[i], cb[i], rel)) return false;
        const auto yv = traj.value_at(tb[i]);
        const auto xv = oc.value_at(cb[i]);
        for (std::size_t k = 0; k < yv.size(); ++k)
            if (!close(yv[k], xv[k], rel)) return false;
    }
    const auto& fd = traj.final_drift();
    const auto& fs = oc.segments.back().slope;
    for (std::size_t k = 0; k < fd.size(); ++k)
        if (!close(fd[k], fs[k], rel)) return false;
    return true;
}

GapSeries lower_bound_gap(const Policy& policy, const SystemConfig& cfg, std::span<const double> x0,
                          const GapOptions& opts) {
    const auto oc = optimal_control(cfg, x0);
    const auto runs = map_indexed(
        static_cast<std::size_t>(opts.seeds),
        [&](std::size_t i) {
            TrajectoryOptions to;
            to.r = opts.r;
            to.x0.assign(x0.begin(), x0.end());
            to.horizon = opts.horizon;
            to.sample_dt = opts.sample_dt;
            to.seed = opts.seed + i;
            return run_trajectory(cfg, policy, to);
        },
        opts.exec);

    GapSeries g;
    if (runs.empty()) return g;
    g.t = runs.front().t;
    const auto n = g.t.size();
    g.mean.assign(n, 0.0);
    g.min.assign(n, std::numeric_limits<double>::infinity());
    g.max.assign(n, -std::numeric_limits<double>::infinity());
    for (const auto& run : runs) {
        for (std::size_t i = 0; i < n; ++i) {
            double sim = 0.0;
            for (std::size_t k = 0; k < cfg.num_classes(); ++k) sim += cfg.classes[k].cost * run.y[i][k];
            const double gap = sim - oc.cost_at(g.t[i], cfg);
            g.mean[i] += gap / static_cast<double>(runs.size());
            g.min[i] = std::min(g.min[i], gap);
            g.max[i] = std::max(g.max[i], gap);
        }
    }
    return g;
}

}  // namespace oppsched
