#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace oppsched {

/// Per-class parameters of the slotted system. States are stored 0-based;
/// the best channel state of a class is the last entry.
struct ClassParams {
    double lambda = 0.0;        ///< expected arrivals per slot
    std::vector<double> q;      ///< channel-state probabilities
    std::vector<double> mu;     ///< departure probability when served in each state
    double cost = 1.0;          ///< holding cost per user per slot

    std::size_t num_states() const { return q.size(); }
    std::size_t best_state() const { return q.size() - 1; }
    double best_mu() const { return mu.back(); }

    bool operator==(const ClassParams&) const = default;
};

enum class ArrivalKind { Bernoulli, PoissonCounts };

struct SystemConfig {
    std::vector<ClassParams> classes;
    ArrivalKind arrival_kind = ArrivalKind::Bernoulli;
    std::uint64_t seed = 1;

    std::size_t num_classes() const { return classes.size(); }

    bool operator==(const SystemConfig&) const = default;
};

/// Transmission-rate description of one class; converted to departure
/// probabilities with the geometric-size approximation.
struct RateParams {
    std::vector<double> rates;  ///< kb/s per channel state
    double slot_length = 0.0;   ///< seconds
    double mean_size = 0.0;     ///< kb
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// mu[n] = rates[n] * slot_length / mean_size. Throws ConfigError when a
/// value exceeds one.
std::vector<double> mu_from_rates(const RateParams& rp);

/// All invariant violations of `cfg`, each tagged with class index (1-based)
/// and field. Empty when the configuration is valid.
std::vector<std::string> violations(const SystemConfig& cfg);

/// Returns `cfg` unchanged when valid, otherwise throws ConfigError listing
/// every violation.
const SystemConfig& validate(const SystemConfig& cfg);

SystemConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const SystemConfig& cfg);

/// Parses and validates a JSON configuration file. Throws ConfigError on
/// parse or validation failure.
SystemConfig load_config(const std::filesystem::path& path);
void write_config(const SystemConfig& cfg, const std::filesystem::path& path);

/// rho = sum_k lambda_k / mu_{k,N_k}.
double load_factor(const SystemConfig& cfg);

std::string to_string(ArrivalKind kind);

namespace cdma {

/// Transmission rates of the eleven 1xEV-DO channel states (kb/s).
inline constexpr double kRates[11] = {38.4,  76.8,  102.6, 153.6,  204.8, 307.2,
                                      614.4, 921.6, 1228.8, 1843.2, 2457.6};
inline constexpr double kSlotLength = 1.67e-3;
inline constexpr double kMeanSize = 10.257;
inline constexpr double kLambda2 = 0.05;

/// Two-class CDMA system with departure probabilities rounded to three
/// decimals, the values the published tables are computed from. Class 2 is
/// truncated after its best reachable state (state 7).
SystemConfig two_class(double lambda1, double lambda2 = kLambda2);

/// Same system with departure probabilities taken unrounded from the rates.
SystemConfig two_class_from_rates(double lambda1, double lambda2 = kLambda2);

}  // namespace cdma

}  // namespace oppsched
