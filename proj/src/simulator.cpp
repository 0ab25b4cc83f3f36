#include "oppsched/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace oppsched {

namespace {

constexpr int kTrendBlocks = 20;

bool is_saturated(const ClassSet& saturated, std::size_t k) { return !saturated.empty() && saturated[k]; }

}  // namespace

SlotSimulator::SlotSimulator(const SystemConfig& cfg, const Policy& policy) : cfg_(cfg), policy_(policy) {
    const auto K = cfg.num_classes();
    occ_.counts.resize(K);
    support_.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        occ_.counts[k].assign(cfg.classes[k].num_states(), 0);
        for (std::size_t n = 0; n < cfg.classes[k].num_states(); ++n)
            if (cfg.classes[k].q[n] > 0.0) support_[k].push_back(static_cast<int>(n));
    }
}

void SlotSimulator::sample_channels(std::size_t k, Count users, Rng& rng) {
    auto& cnt = occ_.counts[k];
    std::fill(cnt.begin(), cnt.end(), 0);
    if (users <= 0) return;
    const auto& q = cfg_.classes[k].q;
    const auto& states = support_[k];
    Count remaining = users;
    double mass = 1.0;
    for (std::size_t i = 0; i + 1 < states.size() && remaining > 0; ++i) {
        const int n = states[i];
        const double p = std::clamp(q[n] / mass, 0.0, 1.0);
        const Count c = std::binomial_distribution<Count>(remaining, p)(rng);
        cnt[n] = c;
        remaining -= c;
        mass -= q[n];
    }
    cnt[states.back()] += remaining;
}

Count SlotSimulator::draw_arrivals(std::size_t k, Rng& rng) {
    const double lambda = cfg_.classes[k].lambda;
    if (lambda <= 0.0) return 0;
    if (cfg_.arrival_kind == ArrivalKind::Bernoulli)
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < lambda ? 1 : 0;
    return std::poisson_distribution<Count>(lambda)(rng);
}

StepRecord SlotSimulator::step(std::vector<Count>& x, Rng& rng, const ClassSet& saturated) {
    const auto K = cfg_.num_classes();
    for (std::size_t k = 0; k < K; ++k)
        if (!is_saturated(saturated, k)) sample_channels(k, x[k], rng);

    StepRecord rec;
    rec.decision = policy_.select(occ_, saturated, rng);
    if (!rec.decision.idle) {
        const auto k = static_cast<std::size_t>(rec.decision.cls);
        const double mu = cfg_.classes[k].mu[rec.decision.state];
        rec.departed = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < mu;
        if (rec.departed && !is_saturated(saturated, k)) --x[k];
    }
    rec.arrivals.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        rec.arrivals[k] = draw_arrivals(k, rng);
        if (!is_saturated(saturated, k)) x[k] += rec.arrivals[k];
    }
    return rec;
}

StepRecord step(std::vector<Count>& x, const Policy& policy, const SystemConfig& cfg, Rng& rng) {
    SlotSimulator sim(cfg, policy);
    return sim.step(x, rng);
}

double SimTrajectory::tau_nonbest(std::size_t i, std::size_t k) const {
    const auto& v = tau[i][k];
    return std::accumulate(v.begin(), v.end() - 1, 0.0);
}

SimTrajectory run_trajectory(const SystemConfig& cfg, const Policy& policy, const TrajectoryOptions& opts) {
    const auto K = cfg.num_classes();
    SimTrajectory traj;
    traj.r = opts.r;

    std::vector<Count> x(K, 0);
    for (std::size_t k = 0; k < K && k < opts.x0.size(); ++k)
        x[k] = static_cast<Count>(std::floor(opts.r * opts.x0[k]));

    std::vector<std::vector<Count>> served(K);
    for (std::size_t k = 0; k < K; ++k) served[k].assign(cfg.classes[k].num_states(), 0);

    const auto samples = static_cast<std::int64_t>(std::floor(opts.horizon / opts.sample_dt + 1e-9)) + 1;
    const auto slot_of = [&](std::int64_t i) {
        return static_cast<std::int64_t>(std::floor(opts.r * static_cast<double>(i) * opts.sample_dt + 1e-9));
    };
    const std::int64_t last_slot = slot_of(samples - 1);

    auto record = [&](std::int64_t i) {
        traj.t.push_back(static_cast<double>(i) * opts.sample_dt);
        std::vector<double> y(K);
        std::vector<std::vector<double>> tau(K);
        for (std::size_t k = 0; k < K; ++k) {
            y[k] = static_cast<double>(x[k]) / opts.r;
            tau[k].resize(served[k].size());
            for (std::size_t n = 0; n < served[k].size(); ++n) tau[k][n] = static_cast<double>(served[k][n]) / opts.r;
        }
        traj.y.push_back(std::move(y));
        traj.tau.push_back(std::move(tau));
    };

    SlotSimulator sim(cfg, policy);
    Rng rng = make_rng(opts.seed);
    std::int64_t next = 0;
    for (std::int64_t slot = 0; slot <= last_slot; ++slot) {
        while (next < samples && slot_of(next) == slot) record(next++);
        if (slot == last_slot) break;
        const auto rec = sim.step(x, rng);
        if (!rec.decision.idle) ++served[rec.decision.cls][rec.decision.state];
    }
    return traj;
}

bool trend_detected(const std::vector<double>& block_means) {
    const auto B = block_means.size();
    if (B < 3) return false;
    const double xbar = (static_cast<double>(B) - 1.0) / 2.0;
    const double ybar = std::accumulate(block_means.begin(), block_means.end(), 0.0) / static_cast<double>(B);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const double dx = static_cast<double>(i) - xbar;
        sxx += dx * dx;
        sxy += dx * (block_means[i] - ybar);
    }
    const double slope = sxy / sxx;
    double sse = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        const double fit = ybar + slope * (static_cast<double>(i) - xbar);
        sse += (block_means[i] - fit) * (block_means[i] - fit);
    }
    const double se = std::sqrt(sse / static_cast<double>(B - 2) / sxx);
    const double rise = slope * static_cast<double>(B);
    const bool significant = se > 0.0 ? slope / se > 4.0 : slope > 0.0;
    return significant && rise > 0.5 * std::max(ybar, 1.0);
}

ReplicationResult simulate_cost_replication(const SystemConfig& cfg, const Policy& policy, std::int64_t horizon,
                                            std::int64_t warmup, Count divergence_cap, Rng& rng) {
    const auto K = cfg.num_classes();
    ReplicationResult res;
    res.mean_counts.assign(K, 0.0);

    SlotSimulator sim(cfg, policy);
    std::vector<Count> x(K, 0);
    std::vector<double> sums(K, 0.0);
    const std::int64_t window = std::max<std::int64_t>(horizon - warmup, 1);
    const std::int64_t block_len = std::max<std::int64_t>(window / kTrendBlocks, 1);
    std::vector<double> blocks;
    double block_sum = 0.0;
    std::int64_t in_block = 0;
    std::int64_t observed = 0;

    for (std::int64_t t = 0; t < horizon; ++t) {
        if (t >= warmup) {
            Count total = 0;
            for (std::size_t k = 0; k < K; ++k) {
                sums[k] += static_cast<double>(x[k]);
                total += x[k];
            }
            ++observed;
            block_sum += static_cast<double>(total);
            if (++in_block == block_len) {
                blocks.push_back(block_sum / static_cast<double>(block_len));
                block_sum = 0.0;
                in_block = 0;
            }
        }
        sim.step(x, rng);
        const Count total = std::accumulate(x.begin(), x.end(), Count{0});
        if (total > divergence_cap) {
            res.capped = true;
            break;
        }
    }

    for (std::size_t k = 0; k < K; ++k) {
        res.mean_counts[k] = observed > 0 ? sums[k] / static_cast<double>(observed) : 0.0;
        res.mean_cost += cfg.classes[k].cost * res.mean_counts[k];
    }
    res.trending = trend_detected(blocks);
    return res;
}

CostEstimate estimate_mean_cost(const SystemConfig& cfg, const Policy& policy, const CostOptions& opts) {
    const auto K = cfg.num_classes();
    const auto reps = map_indexed(
        static_cast<std::size_t>(opts.replications),
        [&](std::size_t i) {
            Rng rng = make_rng(opts.seed, i);
            return simulate_cost_replication(cfg, policy, opts.horizon, opts.warmup, opts.divergence_cap, rng);
        },
        opts.exec);

    CostEstimate est;
    est.horizon = opts.horizon;
    est.warmup = opts.warmup;
    est.replications = opts.replications;
    est.mean_counts.assign(K, 0.0);
    const double R = static_cast<double>(reps.size());
    int trending = 0;
    bool capped = false;
    for (const auto& r : reps) {
        est.mean_cost += r.mean_cost / R;
        for (std::size_t k = 0; k < K; ++k) est.mean_counts[k] += r.mean_counts[k] / R;
        if (r.capped || r.trending) ++est.unstable_replications;
        trending += r.trending ? 1 : 0;
        capped = capped || r.capped;
    }
    est.apparent_instability = capped || 2 * trending >= static_cast<int>(reps.size());

    if (reps.size() >= 2) {
        double ss = 0.0;
        for (const auto& r : reps) ss += (r.mean_cost - est.mean_cost) * (r.mean_cost - est.mean_cost);
        est.ci_half = 1.96 * std::sqrt(ss / (R - 1.0) / R);
    } else {
        est.ci_half = std::numeric_limits<double>::infinity();
    }
    return est;
}

SaturatedEstimate run_saturated(const SystemConfig& cfg, const Policy& policy, const ClassSet& in_u,
                                std::int64_t horizon, std::uint64_t seed) {
    const auto K = cfg.num_classes();
    ClassSet saturated(K);
    for (std::size_t k = 0; k < K; ++k) saturated[k] = !in_u[k];

    SlotSimulator sim(cfg, policy);
    Rng rng = make_rng(seed);
    std::vector<Count> x(K, 0);
    std::vector<double> arrivals(K, 0.0), departures(K, 0.0), sums(K, 0.0);
    const std::int64_t block_len = std::max<std::int64_t>(horizon / kTrendBlocks, 1);
    std::vector<double> blocks;
    double block_sum = 0.0;
    std::int64_t in_block = 0;

    for (std::int64_t t = 0; t < horizon; ++t) {
        double u_total = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            if (in_u[k]) {
                sums[k] += static_cast<double>(x[k]);
                u_total += static_cast<double>(x[k]);
            }
        block_sum += u_total;
        if (++in_block == block_len) {
            blocks.push_back(block_sum / static_cast<double>(block_len));
            block_sum = 0.0;
            in_block = 0;
        }
        const auto rec = sim.step(x, rng, saturated);
        if (rec.departed) departures[rec.decision.cls] += 1.0;
        for (std::size_t k = 0; k < K; ++k) arrivals[k] += static_cast<double>(rec.arrivals[k]);
    }

    SaturatedEstimate est;
    est.drift.resize(K);
    est.mean_count.assign(K, 0.0);
    const double H = static_cast<double>(horizon);
    for (std::size_t k = 0; k < K; ++k) {
        est.drift[k] = (arrivals[k] - departures[k]) / H;
        if (in_u[k]) est.mean_count[k] = sums[k] / H;
    }
    est.non_ergodic = trend_detected(blocks);
    return est;
}

std::vector<RateCheck> rate_conservation_check(const SystemConfig& cfg, const Policy& policy,
                                               std::int64_t horizon, std::uint64_t seed) {
    const auto K = cfg.num_classes();
    SlotSimulator sim(cfg, policy);
    Rng rng = make_rng(seed);
    std::vector<Count> x(K, 0);
    std::vector<double> arrivals(K, 0.0), departures(K, 0.0);
    for (std::int64_t t = 0; t < horizon; ++t) {
        const auto rec = sim.step(x, rng);
        if (rec.departed) departures[rec.decision.cls] += 1.0;
        for (std::size_t k = 0; k < K; ++k) arrivals[k] += static_cast<double>(rec.arrivals[k]);
    }
    std::vector<RateCheck> out(K);
    const double H = static_cast<double>(horizon);
    for (std::size_t k = 0; k < K; ++k) {
        const double lambda = cfg.classes[k].lambda;
        out[k].departure_rate = departures[k] / H;
        out[k].arrival_rate = arrivals[k] / H;
        out[k].lambda = lambda;
        const double var = cfg.arrival_kind == ArrivalKind::Bernoulli ? lambda * (1.0 - lambda) : lambda;
        out[k].sigma = std::sqrt(var / H);
    }
    return out;
}

}  // namespace oppsched
