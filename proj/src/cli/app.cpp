#include "app.hpp"

#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "emit.hpp"
#include "presets.hpp"
#include "version.hpp"

namespace oppsched::cli {

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw UsageError(fmt::format("bad number '{}' in '{}'", item, text));
        }
    }
    return out;
}

struct Common {
    std::string config;
    std::string policy = "pi";
    std::string tie;
    std::string out;
};

struct Loaded {
    SystemConfig cfg;
    PolicySpec spec;
};

Loaded load(const Common& c) {
    Loaded l;
    l.cfg = load_config(c.config);
    try {
        l.spec = parse_policy(c.policy, c.tie, l.cfg.num_classes());
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return l;
}

std::vector<double> initial_state(const std::string& text, std::size_t K) {
    if (text.empty()) return std::vector<double>(K, 1.0);
    auto x0 = parse_list(text);
    if (x0.size() != K) throw UsageError(fmt::format("--x0 needs {} values", K));
    for (double v : x0)
        if (v < 0.0) throw UsageError("--x0 values must be nonnegative");
    return x0;
}

/// Output goes to --out when given, else to the command's stdout.
class Sink {
public:
    Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (path.empty()) return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw std::runtime_error(fmt::format("cannot write {}", path));
        os_ = file_.get();
    }
    std::ostream& get() { return *os_; }

private:
    std::unique_ptr<std::ofstream> file_;
    std::ostream* os_;
};

nlohmann::json manifest(const std::string& command, const Loaded& l) {
    auto m = base_manifest(command);
    m["config"] = config_to_json(l.cfg);
    m.update(policy_json(l.spec));
    return m;
}

void add_common(CLI::App* sub, Common& c, bool with_policy = true) {
    sub->add_option("config", c.config, "system config (JSON)")->required()->check(CLI::ExistingFile);
    if (with_policy) {
        sub->add_option("--policy", c.policy, "sb | pi | pb | rb | cmu | weight:w1,... | custom:file");
        sub->add_option("--tie", c.tie, "myopic | random:w1,... | priority:k1,...");
    }
    sub->add_option("--out", c.out, "output CSV (default stdout)");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Opportunistic multiclass scheduling: simulation, drifts, fluid limits, control", "oppsched"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Common com;
    auto* validate_cmd = app.add_subcommand("validate", "check a config file");
    validate_cmd->add_option("config", com.config)->required();

    auto* sim = app.add_subcommand("simulate", "fluid-scaled trajectory, or steady-state cost with --cost");
    add_common(sim, com);
    double r = 1.0, horizon = 1.0, dt = 0.01;
    std::string x0_text;
    std::optional<std::uint64_t> seed;
    bool cost_mode = false;
    std::int64_t slots = 5'000'000, warmup = 1'000'000;
    int reps = 10;
    sim->add_option("--r", r, "scale")->check(CLI::Range(1.0, 1e12));
    sim->add_option("--horizon", horizon, "fluid time")->check(CLI::PositiveNumber);
    sim->add_option("--dt", dt, "sample spacing in fluid time")->check(CLI::PositiveNumber);
    sim->add_option("--x0", x0_text, "initial fluid state, comma separated (default all ones)");
    sim->add_option("--seed", seed, "RNG seed (default from config)");
    sim->add_flag("--cost", cost_mode, "estimate the time-average holding cost instead");
    sim->add_option("--slots", slots, "cost horizon in slots")->check(CLI::PositiveNumber);
    sim->add_option("--warmup", warmup, "cost warm-up in slots")->check(CLI::NonNegativeNumber);
    sim->add_option("--reps", reps, "cost replications")->check(CLI::PositiveNumber);

    auto* drift_cmd = app.add_subcommand("drift", "averaged drift with some classes saturated");
    add_common(drift_cmd, com);
    std::string sat_text;
    bool numeric = false;
    drift_cmd->add_option("--sat", sat_text, "saturated classes, comma separated (default none)");
    drift_cmd->add_flag("--numeric", numeric, "skip closed forms and use the stationary solvers");

    auto* fluid_cmd = app.add_subcommand("fluid", "piecewise-linear fluid limit");
    add_common(fluid_cmd, com);
    fluid_cmd->add_option("--x0", x0_text, "initial state, comma separated (default all ones)");

    auto* stab = app.add_subcommand("stability", "stability verdict and optional threshold sweep");
    add_common(stab, com);
    std::string sweep_text;
    stab->add_option("--sweep", sweep_text, "lambda<k>:lo:hi");

    auto* ctrl = app.add_subcommand("control", "optimal fluid control");
    add_common(ctrl, com, false);
    ctrl->add_option("--x0", x0_text, "initial state, comma separated (default all ones)");

    auto* preset = app.add_subcommand("preset", "run a study preset");
    std::string preset_name, out_dir;
    PresetOverrides ov;
    preset->add_option("name", preset_name)->required();
    preset->add_option("--out-dir", out_dir, "output directory (default out/<name>)");
    preset->add_option("--seed", ov.seed);
    preset->add_option("--horizon", ov.horizon);
    preset->add_option("--r", ov.r);
    preset->add_option("--reps", ov.reps);
    preset->add_option("--warmup", ov.warmup);

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*validate_cmd) {
            const auto cfg = load_config(com.config);
            const auto ms = is_max_stable(cfg);
            out << fmt::format("ok: {} classes, rho = {:.9g}\n", cfg.num_classes(), ms.rho);
            return kExitOk;
        }
        if (*preset) {
            namespace fs = std::filesystem;
            const fs::path dir = out_dir.empty() ? fs::path("out") / preset_name : fs::path(out_dir);
            run_preset(preset_name, dir, ov, err);
            return kExitOk;
        }
        if (*ctrl) {
            const auto cfg = load_config(com.config);
            const auto x0 = initial_state(x0_text, cfg.num_classes());
            Sink sink(com.out, out);
            auto m = base_manifest("control");
            m["config"] = config_to_json(cfg);
            m["x0"] = x0;
            CsvWriter w(sink.get(), m, kControlHeader);
            control_rows(w, optimal_control(cfg, x0));
            return kExitOk;
        }

        const auto l = load(com);
        const auto K = l.cfg.num_classes();
        const Policy policy(l.spec, l.cfg);
        Sink sink(com.out, out);

        if (*sim) {
            auto m = manifest("simulate", l);
            const auto s = seed.value_or(l.cfg.seed);
            m["seed"] = s;
            if (cost_mode) {
                if (slots <= warmup) throw UsageError("--slots must exceed --warmup");
                CostOptions o;
                o.horizon = slots;
                o.warmup = warmup;
                o.replications = reps;
                o.seed = s;
                m.update({{"slots", slots}, {"warmup", warmup}, {"reps", reps}});
                const auto est = estimate_mean_cost(l.cfg, policy, o);
                CsvWriter w(sink.get(), m, kCostHeader);
                cost_row(w, load_factor(l.cfg), l.spec, est);
            } else {
                TrajectoryOptions to;
                to.r = r;
                to.x0 = initial_state(x0_text, K);
                to.horizon = horizon;
                to.sample_dt = dt;
                to.seed = s;
                m.update({{"r", r}, {"horizon", horizon}, {"dt", dt}, {"x0", to.x0}});
                const auto traj = run_trajectory(l.cfg, policy, to);
                CsvWriter w(sink.get(), m, kTrajectoryHeader);
                trajectory_rows(w, traj);
            }
        } else if (*drift_cmd) {
            ClassSet sat;
            try {
                sat = parse_set(sat_text, K);
            } catch (const std::exception& e) {
                throw UsageError(fmt::format("bad --sat '{}': {}", sat_text, e.what()));
            }
            ClassSet in_u(K);
            for (std::size_t k = 0; k < K; ++k) in_u[k] = !sat[k];
            const auto d = averaged_drift(policy, l.cfg, in_u, numeric ? DriftRoute::Numeric : DriftRoute::Auto);
            auto m = manifest("drift", l);
            m["saturated"] = format_set(sat);
            CsvWriter w(sink.get(), m, kDriftHeader);
            drift_rows(w, l.spec, d);
        } else if (*fluid_cmd) {
            const auto x0 = initial_state(x0_text, K);
            const auto traj = fluid_trajectory(policy, l.cfg, x0);
            for (const auto& warn : traj.warnings) err << "warning: " << warn << '\n';
            auto m = manifest("fluid", l);
            m["x0"] = x0;
            CsvWriter w(sink.get(), m, kFluidHeader);
            fluid_rows(w, traj);
        } else if (*stab) {
            auto m = manifest("stability", l);
            const auto rep = is_stable(policy, l.cfg);
            double rho_star = is_best_rate(l.spec, l.cfg) ? 1.0 : std::numeric_limits<double>::quiet_NaN();
            if (!sweep_text.empty()) {
                int cls = 0;
                double lo = 0.0, hi = 0.0;
                char tail = 0;
                if (std::sscanf(sweep_text.c_str(), "lambda%d:%lf:%lf%c", &cls, &lo, &hi, &tail) != 3 || cls < 1 ||
                    static_cast<std::size_t>(cls) > K || !(lo < hi))
                    throw UsageError(fmt::format("bad --sweep '{}', expected lambda<k>:lo:hi", sweep_text));
                const auto th = stability_threshold(l.spec, l.cfg, {cls - 1, lo, hi});
                rho_star = th.rho_star;
                m["sweep"] = {{"class", cls}, {"lo", lo}, {"hi", hi}, {"lambda_star", th.lambda_star},
                              {"method", th.method}};
            }
            CsvWriter w(sink.get(), m, kStabilityHeader);
            stability_row(w, l.spec, rep, rho_star);
        }
        return kExitOk;
    } catch (const ConfigError& e) {
        err << "invalid config:\n";
        for (const auto& v : e.violations()) err << "  " << v << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace oppsched::cli
