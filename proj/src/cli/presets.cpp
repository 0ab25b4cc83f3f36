#include "presets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

#include "emit.hpp"
#include "version.hpp"

namespace oppsched::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kFig2Lambda = 0.14;
constexpr double kOverloadLambda = 0.24;

struct Run {
    fs::path dir;
    std::ostream& log;
    PresetResult result;

    std::ofstream open(const std::string& file) {
        const auto path = dir / file;
        std::ofstream os(path);
        if (!os) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
        result.files.push_back(path);
        log << "wrote " << path.string() << '\n';
        return os;
    }
};

nlohmann::json file_manifest(const std::string& preset, const SystemConfig& cfg) {
    auto m = base_manifest("preset");
    m["preset"] = preset;
    m["config"] = config_to_json(cfg);
    return m;
}

void check(const PresetOverrides& ov) {
    if (ov.r && !(*ov.r >= 1.0)) throw std::invalid_argument("override r must be >= 1");
    if (ov.reps && *ov.reps < 1) throw std::invalid_argument("override reps must be >= 1");
    if (ov.horizon && !(*ov.horizon > 0.0)) throw std::invalid_argument("override horizon must be positive");
    if (ov.warmup && *ov.warmup < 0) throw std::invalid_argument("override warmup must be nonnegative");
}

std::vector<double> lambda_grid(double lo, double hi, int points) {
    std::vector<double> g(points);
    for (int i = 0; i < points; ++i) g[i] = lo + (hi - lo) * i / (points - 1);
    return g;
}

CostOptions cost_options(const PresetOverrides& ov) {
    CostOptions o;
    o.seed = ov.seed.value_or(1);
    if (ov.horizon) o.horizon = static_cast<std::int64_t>(*ov.horizon);
    if (ov.warmup) o.warmup = *ov.warmup;
    if (ov.reps) o.replications = *ov.reps;
    if (o.horizon <= o.warmup) throw std::invalid_argument("horizon must exceed warmup");
    return o;
}

void trajectories(Run& run, const std::string& preset, double lambda1, double r, double horizon, double dt,
                  const PresetOverrides& ov, nlohmann::json& resolved) {
    const auto cfg = cdma::two_class(lambda1);
    const std::vector<double> x0{1.0, 1.0};
    resolved = {{"lambda1", lambda1}, {"r", r}, {"horizon", horizon}, {"sample_dt", dt}, {"x0", x0},
                {"seed", ov.seed.value_or(1)}};
    for (const auto& [name, spec] : standard_policies(2)) {
        const Policy policy(spec, cfg);
        TrajectoryOptions to;
        to.r = r;
        to.x0 = x0;
        to.horizon = horizon;
        to.sample_dt = dt;
        to.seed = ov.seed.value_or(1);
        const auto traj = run_trajectory(cfg, policy, to);
        auto m = file_manifest(preset, cfg);
        m.update(policy_json(spec));
        m["resolved"] = resolved;
        {
            auto os = run.open(fmt::format("{}_{}_trajectory.csv", preset, name));
            CsvWriter w(os, m, kTrajectoryHeader);
            trajectory_rows(w, traj);
        }
        auto os = run.open(fmt::format("{}_{}_fluid.csv", preset, name));
        CsvWriter w(os, m, kFluidHeader);
        fluid_rows(w, fluid_trajectory(policy, cfg, x0));
    }
}

void fig2(Run& run, const PresetOverrides& ov, nlohmann::json& resolved) {
    trajectories(run, "fig2", kFig2Lambda, ov.r.value_or(1e4), ov.horizon.value_or(90.0), 0.1, ov, resolved);
}

void fig3c(Run& run, const PresetOverrides& ov, nlohmann::json& resolved) {
    trajectories(run, "fig3c", kOverloadLambda, ov.r.value_or(1e3), ov.horizon.value_or(100.0), 0.5, ov, resolved);
    const auto cfg = cdma::two_class(kOverloadLambda);
    auto m = file_manifest("fig3c", cfg);
    auto os = run.open("fig3c_growth.csv");
    CsvWriter w(os, m, {"policy", "tie", "class", "growth"});
    for (const auto& [name, spec] : standard_policies(2)) {
        const Policy policy(spec, cfg);
        const auto g = growth_rates(policy, cfg);
        for (std::size_t k = 0; k < g.size(); ++k) w.row(policy_name(spec), tie_name(spec.tie), k + 1, g[k]);
    }
}

void fig3a(Run& run, const PresetOverrides& ov, nlohmann::json& resolved) {
    const auto opts = cost_options(ov);
    const auto grid = lambda_grid(0.004, 0.196, 16);
    resolved = {{"lambda1_grid", grid},       {"horizon", opts.horizon}, {"warmup", opts.warmup},
                {"replications", opts.replications}, {"seed", opts.seed}};
    const auto base = cdma::two_class(grid.front());

    auto m = file_manifest("fig3a", base);
    m["resolved"] = resolved;
    auto cost_os = run.open("fig3a_cost.csv");
    CsvWriter cost(cost_os, m, kCostHeader);
    auto stab_os = run.open("fig3a_stability.csv");
    CsvWriter stab(stab_os, m, kStabilityHeader);

    for (const auto& [name, spec] : standard_policies(2)) {
        const auto th = stability_threshold(spec, base, {0, grid.front(), grid.back()});
        for (double l1 : grid) {
            const auto cfg = cdma::two_class(l1);
            const Policy policy(spec, cfg);
            const auto est = estimate_mean_cost(cfg, policy, opts);
            cost_row(cost, load_factor(cfg), spec, est);
            stability_row(stab, spec, is_stable(policy, cfg), th.rho_star);
            run.log << fmt::format("fig3a {} rho={:.3f} cost={:.4g}\n", name, load_factor(cfg), est.mean_cost);
        }
    }
}

void fig3b(Run& run, const PresetOverrides& ov, nlohmann::json& resolved) {
    const auto opts = cost_options(ov);
    const std::vector<double> rhos{0.6, 0.7, 0.8, 0.9};
    std::vector<double> alphas;
    for (int i = 0; i <= 10; ++i) alphas.push_back(i / 10.0);
    resolved = {{"rho", rhos},       {"alpha", alphas},   {"horizon", opts.horizon},
                {"warmup", opts.warmup}, {"replications", opts.replications}, {"seed", opts.seed}};

    const auto base = cdma::two_class(0.12);
    auto m = file_manifest("fig3b", base);
    m["resolved"] = resolved;
    auto cost_os = run.open("fig3b_cost.csv");
    CsvWriter cost(cost_os, m, kCostHeader);
    auto deg_os = run.open("fig3b_degradation.csv");
    CsvWriter deg(deg_os, m, {"rho", "alpha", "mean_cost", "ci_half", "degradation"});

    for (double rho : rhos) {
        // rho = lambda1 / mu_{1,N} + lambda2 / mu_{2,N}
        const auto probe = cdma::two_class(0.0);
        const double l1 = (rho - load_factor(probe)) * probe.classes[0].best_mu();
        const auto cfg = cdma::two_class(l1);
        std::vector<CostEstimate> est;
        for (double a : alphas) {
            const auto spec = parse_policy("pi", fmt::format("random:{},{}", a, 1.0 - a), 2);
            const Policy policy(spec, cfg);
            est.push_back(estimate_mean_cost(cfg, policy, opts));
            cost_row(cost, rho, spec, est.back());
        }
        const double ref = est.back().mean_cost;
        for (std::size_t i = 0; i < alphas.size(); ++i) {
            deg.row(rho, alphas[i], est[i].mean_cost, est[i].ci_half, 100.0 * (est[i].mean_cost / ref - 1.0));
            run.log << fmt::format("fig3b rho={} alpha={} cost={:.4g}\n", rho, alphas[i], est[i].mean_cost);
        }
    }
}

void drift_table(Run& run, const std::string& preset, double lambda1, nlohmann::json& resolved) {
    const auto cfg = cdma::two_class(lambda1);
    resolved = {{"lambda1", lambda1}};
    auto m = file_manifest(preset, cfg);
    auto os = run.open(preset + "_drift.csv");
    CsvWriter w(os, m, kDriftHeader);
    nlohmann::json skipped = nlohmann::json::array();
    for (const auto& [name, spec] : standard_policies(2)) {
        const Policy policy(spec, cfg);
        for (const auto& u : {empty_set(2), make_set(2, {0})}) {
            try {
                drift_rows(w, spec, averaged_drift(policy, cfg, u));
            } catch (const SolverError& e) {
                skipped.push_back({{"policy", name}, {"U", format_set(u)}, {"reason", e.what()}});
            }
        }
    }
    resolved["skipped"] = skipped;
}

void table1_check(Run& run, nlohmann::json& resolved) {
    const auto cfg = cdma::two_class(kFig2Lambda);
    const auto exact = cdma::two_class_from_rates(kFig2Lambda);
    resolved = {{"slot_length", cdma::kSlotLength}, {"mean_size", cdma::kMeanSize}};
    auto m = file_manifest("table1_check", cfg);
    auto os = run.open("table1_check.csv");
    CsvWriter w(os, m, {"class", "state", "rate", "q", "mu_from_rates", "mu"});
    for (std::size_t k = 0; k < cfg.num_classes(); ++k)
        for (std::size_t n = 0; n < cfg.classes[k].num_states(); ++n)
            w.row(k + 1, n + 1, cdma::kRates[n], cfg.classes[k].q[n], exact.classes[k].mu[n], cfg.classes[k].mu[n]);
}

}  // namespace

nlohmann::json PresetOverrides::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (seed) j["seed"] = *seed;
    if (horizon) j["horizon"] = *horizon;
    if (r) j["r"] = *r;
    if (reps) j["reps"] = *reps;
    if (warmup) j["warmup"] = *warmup;
    return j;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"fig2", "fig3a", "fig3b", "fig3c", "table2", "table3", "table1_check"};
    return names;
}

PresetResult run_preset(const std::string& name, const fs::path& dir, const PresetOverrides& ov, std::ostream& log) {
    const auto& names = preset_names();
    if (std::find(names.begin(), names.end(), name) == names.end())
        throw std::invalid_argument(fmt::format("unknown preset '{}'", name));
    check(ov);
    fs::create_directories(dir);

    Run run{dir, log, {}};
    nlohmann::json resolved;
    if (name == "fig2") fig2(run, ov, resolved);
    else if (name == "fig3a") fig3a(run, ov, resolved);
    else if (name == "fig3b") fig3b(run, ov, resolved);
    else if (name == "fig3c") fig3c(run, ov, resolved);
    else if (name == "table2") drift_table(run, "table2", kFig2Lambda, resolved);
    else if (name == "table3") drift_table(run, "table3", kOverloadLambda, resolved);
    else table1_check(run, resolved);

    auto& m = run.result.manifest;
    m = base_manifest("preset");
    m["preset"] = name;
    m["overrides"] = ov.to_json();
    m["resolved"] = resolved;
    m["config"] = config_to_json(cdma::two_class(name == "table3" || name == "fig3c" ? kOverloadLambda : kFig2Lambda));
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : run.result.files) files.push_back(f.filename().string());
    m["files"] = files;
    std::ofstream os(dir / "manifest.json");
    os << m.dump(2) << '\n';
    return run.result;
}

}  // namespace oppsched::cli
