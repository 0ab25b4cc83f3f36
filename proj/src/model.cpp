#include "oppsched/model.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

namespace oppsched {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
    std::string out;
    for (const auto& l : lines) {
        if (!out.empty()) out += "; ";
        out += l;
    }
    return out;
}

constexpr double kSumTolerance = 1e-12;

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::runtime_error(join_lines(violations)), violations_(std::move(violations)) {}

std::vector<double> mu_from_rates(const RateParams& rp) {
    std::vector<std::string> errs;
    if (!(rp.slot_length > 0.0)) errs.push_back("rate_params: slot_length must be positive");
    if (!(rp.mean_size > 0.0)) errs.push_back("rate_params: mean_size must be positive");
    for (std::size_t n = 0; n < rp.rates.size(); ++n) {
        if (rp.rates[n] < 0.0) errs.push_back(fmt::format("rate_params: rate of state {} is negative", n + 1));
        if (n > 0 && rp.rates[n] < rp.rates[n - 1])
            errs.push_back(fmt::format("rate_params: rates not nondecreasing at state {}", n + 1));
    }
    if (!errs.empty()) throw ConfigError(std::move(errs));

    std::vector<double> mu(rp.rates.size());
    for (std::size_t n = 0; n < mu.size(); ++n) {
        mu[n] = rp.rates[n] * rp.slot_length / rp.mean_size;
        if (mu[n] > 1.0)
            throw ConfigError({fmt::format(
                "state {}: slot can exceed remaining work; geometric approximation invalid (mu = {:.6g})",
                n + 1, mu[n])});
    }
    return mu;
}

std::vector<std::string> violations(const SystemConfig& cfg) {
    std::vector<std::string> errs;
    if (cfg.classes.empty()) errs.push_back("config: at least one class is required");

    for (std::size_t k = 0; k < cfg.classes.size(); ++k) {
        const auto& c = cfg.classes[k];
        const auto tag = [k](std::string_view field) { return fmt::format("class {} {}", k + 1, field); };

        if (!(c.lambda >= 0.0)) errs.push_back(tag("lambda: must be nonnegative"));
        if (cfg.arrival_kind == ArrivalKind::Bernoulli && c.lambda > 1.0)
            errs.push_back(tag("lambda: Bernoulli arrivals require lambda <= 1"));
        if (!(c.cost > 0.0)) errs.push_back(tag("cost: must be positive"));

        if (c.q.empty()) {
            errs.push_back(tag("q: at least one channel state is required"));
            continue;
        }
        if (c.mu.size() != c.q.size()) {
            errs.push_back(tag(fmt::format("mu: length {} differs from q length {}", c.mu.size(), c.q.size())));
            continue;
        }

        bool q_range_ok = true;
        for (std::size_t n = 0; n < c.q.size(); ++n) {
            if (!(c.q[n] >= 0.0 && c.q[n] <= 1.0)) {
                errs.push_back(tag(fmt::format("q: entry {} outside [0,1]", n + 1)));
                q_range_ok = false;
            }
        }
        const double qsum = std::accumulate(c.q.begin(), c.q.end(), 0.0);
        if (q_range_ok && std::abs(qsum - 1.0) > kSumTolerance)
            errs.push_back(tag(fmt::format("q: q does not sum to 1 (sum = {:.12g})", qsum)));

        for (std::size_t n = 0; n < c.mu.size(); ++n) {
            if (!(c.mu[n] >= 0.0 && c.mu[n] <= 1.0))
                errs.push_back(tag(fmt::format("mu: entry {} outside [0,1]", n + 1)));
            if (n > 0 && c.mu[n] < c.mu[n - 1])
                errs.push_back(tag(fmt::format("mu: mu not nondecreasing at state {}", n + 1)));
        }
        if (!(c.q.back() * c.mu.back() > 0.0))
            errs.push_back(tag("q,mu: best state must have q*mu > 0"));
    }
    return errs;
}

const SystemConfig& validate(const SystemConfig& cfg) {
    auto errs = violations(cfg);
    if (!errs.empty()) throw ConfigError(std::move(errs));
    return cfg;
}

std::string to_string(ArrivalKind kind) {
    return kind == ArrivalKind::Bernoulli ? "bernoulli" : "poisson";
}

SystemConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError({"config: top-level value must be an object"});
    if (!j.contains("classes") || !j.at("classes").is_array())
        throw ConfigError({"config: missing array 'classes'"});

    SystemConfig cfg;
    try {
        if (j.contains("arrival_kind")) {
            const auto kind = j.at("arrival_kind").get<std::string>();
            if (kind == "bernoulli" || kind == "Bernoulli")
                cfg.arrival_kind = ArrivalKind::Bernoulli;
            else if (kind == "poisson" || kind == "PoissonCounts")
                cfg.arrival_kind = ArrivalKind::PoissonCounts;
            else
                throw ConfigError({fmt::format("config: unknown arrival_kind '{}'", kind)});
        }
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

        for (const auto& jc : j.at("classes")) {
            ClassParams c;
            c.lambda = jc.at("lambda").get<double>();
            c.q = jc.at("q").get<std::vector<double>>();
            if (jc.contains("cost")) c.cost = jc.at("cost").get<double>();
            if (jc.contains("rate_params")) {
                const auto& rp = jc.at("rate_params");
                RateParams p;
                p.rates = rp.at("rates").get<std::vector<double>>();
                p.slot_length = rp.at("slot_length").get<double>();
                p.mean_size = rp.at("mean_size").get<double>();
                c.mu = mu_from_rates(p);
            } else {
                c.mu = jc.at("mu").get<std::vector<double>>();
            }
            cfg.classes.push_back(std::move(c));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError({fmt::format("config: {}", e.what())});
    }
    return cfg;
}

nlohmann::json config_to_json(const SystemConfig& cfg) {
    nlohmann::json j;
    j["arrival_kind"] = to_string(cfg.arrival_kind);
    j["seed"] = cfg.seed;
    j["classes"] = nlohmann::json::array();
    for (const auto& c : cfg.classes) {
        j["classes"].push_back({{"lambda", c.lambda}, {"q", c.q}, {"mu", c.mu}, {"cost", c.cost}});
    }
    return j;
}

SystemConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({fmt::format("cannot open '{}'", path.string())});
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError({fmt::format("parse error in '{}': {}", path.string(), e.what())});
    }
    auto cfg = config_from_json(j);
    validate(cfg);
    return cfg;
}

void write_config(const SystemConfig& cfg, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    out << config_to_json(cfg).dump(2) << '\n';
}

double load_factor(const SystemConfig& cfg) {
    double rho = 0.0;
    for (const auto& c : cfg.classes) rho += c.lambda / c.best_mu();
    return rho;
}

namespace cdma {

namespace {

// Table of q rows; zero-probability states are kept.
constexpr double kQ1[11] = {0, 0, 0.05, 0, 0.23, 0, 0.42, 0, 0.21, 0, 0.09};
constexpr double kQ2[7] = {0, 0, 0.15, 0, 0.33, 0, 0.52};

SystemConfig build(double lambda1, double lambda2, bool rounded) {
    RateParams rp;
    rp.rates.assign(std::begin(kRates), std::end(kRates));
    rp.slot_length = kSlotLength;
    rp.mean_size = kMeanSize;
    auto mu = mu_from_rates(rp);
    if (rounded)
        for (auto& m : mu) m = std::round(m * 1000.0) / 1000.0;

    SystemConfig cfg;
    ClassParams c1;
    c1.lambda = lambda1;
    c1.q.assign(std::begin(kQ1), std::end(kQ1));
    c1.mu = mu;
    ClassParams c2;
    c2.lambda = lambda2;
    c2.q.assign(std::begin(kQ2), std::end(kQ2));
    c2.mu.assign(mu.begin(), mu.begin() + 7);
    cfg.classes = {c1, c2};
    return validate(cfg);
}

}  // namespace

SystemConfig two_class(double lambda1, double lambda2) { return build(lambda1, lambda2, true); }

SystemConfig two_class_from_rates(double lambda1, double lambda2) { return build(lambda1, lambda2, false); }

}  // namespace cdma

}  // namespace oppsched
