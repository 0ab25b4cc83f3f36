#include <doctest.h>

#include <fstream>
#include <random>

#include "helpers.hpp"
#include "oppsched/model.hpp"

using namespace oppsched;

namespace {

RateParams cdma_rate(double rate) { return {{rate}, cdma::kSlotLength, cdma::kMeanSize}; }

bool has(const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
        if (s.find(needle) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("mu_from_rates converts rates to departure probabilities") {
    CHECK(std::abs(mu_from_rates(cdma_rate(2457.6))[0] - 0.400) <= 1e-3);
    CHECK(mu_from_rates({{0.0}, 0.5, 3.0})[0] == 0.0);
    const double expected = 1228.8 * 1.67e-3 / 10.257;
    CHECK(mu_from_rates(cdma_rate(1228.8))[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(std::abs(mu_from_rates(cdma_rate(1228.8))[0] - 0.200) <= 1e-3);
}

TEST_CASE("mu_from_rates rejects a slot longer than the mean job") {
    try {
        mu_from_rates({{1000.0}, 1.0, 1.0});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(has(e.violations(), "slot can exceed remaining work; geometric approximation invalid"));
    }
}

TEST_CASE("table rates reproduce the published nonzero departure probabilities") {
    RateParams rp{std::vector<double>(std::begin(cdma::kRates), std::end(cdma::kRates)), cdma::kSlotLength,
                  cdma::kMeanSize};
    const auto mu = mu_from_rates(rp);
    // Published mu entries for the states with q > 0 (states 3, 5, 7, 9, 11).
    const std::pair<int, double> published[] = {{3, 0.017}, {5, 0.033}, {7, 0.1}, {9, 0.2}, {11, 0.4}};
    for (auto [state, value] : published) CHECK(std::abs(mu[state - 1] - value) <= 1e-3);
}

TEST_CASE("mu_from_rates is monotone in the rates") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> rates(8);
        for (auto& r : rates) r = u(rng);
        std::sort(rates.begin(), rates.end());
        const auto mu = mu_from_rates({rates, 1e-3, 0.2});
        CHECK(std::is_sorted(mu.begin(), mu.end()));
    }
}

TEST_CASE("validate accepts the two-class system and lists violations") {
    CHECK(violations(cdma::two_class(0.14)).empty());

    auto bad_q = testing::single_class(0.1, {0.5, 0.6}, {0.1, 0.2});
    CHECK(has(violations(bad_q), "q does not sum to 1"));
    auto bad_mu = testing::single_class(0.1, {0.5, 0.5}, {0.2, 0.1});
    CHECK(has(violations(bad_mu), "mu not nondecreasing"));

    auto several = testing::single_class(-0.1, {0.5, 0.6}, {0.2, 0.1});
    several.classes[0].cost = 0.0;
    const auto v = violations(several);
    CHECK(v.size() >= 4);
    CHECK(has(v, "class 1"));
    CHECK_THROWS_AS(validate(several), ConfigError);

    auto no_best = testing::single_class(0.1, {1.0, 0.0}, {0.1, 0.2});
    CHECK(!violations(no_best).empty());
    auto over = testing::single_class(1.5, {1.0}, {0.5});
    CHECK(has(violations(over), "lambda"));
}

TEST_CASE("load_config reads the bundled system") {
    const auto cfg = load_config(std::filesystem::path(OPPSCHED_SOURCE_DIR) / "configs/cdma_table1.json");
    CHECK(cfg.num_classes() == 2);
    CHECK(cfg.classes[1].lambda == 0.05);
    CHECK(cfg.classes[0].q[1] == 0.0);  // q = 0 states are kept
    CHECK(cfg == cdma::two_class(0.14));

    const auto derived = load_config(std::filesystem::path(OPPSCHED_SOURCE_DIR) / "configs/cdma_table1_rates.json");
    CHECK(derived.classes[0].mu.back() == doctest::Approx(0.4).epsilon(1e-3));
}

TEST_CASE("load_config errors and minimal system") {
    const auto empty = testing::temp_path("empty.json");
    std::ofstream(empty).close();
    CHECK_THROWS_AS(load_config(empty), ConfigError);

    const auto minimal = testing::temp_path("minimal.json");
    std::ofstream(minimal) << R"({"classes": [{"lambda": 0.2, "q": [1], "mu": [0.5]}]})";
    const auto cfg = load_config(minimal);
    CHECK(cfg.num_classes() == 1);
    CHECK(cfg.classes[0].cost == 1.0);
    CHECK(cfg.arrival_kind == ArrivalKind::Bernoulli);
}

TEST_CASE("write then load round-trips") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        SystemConfig cfg;
        cfg.seed = rng();
        cfg.arrival_kind = trial % 2 ? ArrivalKind::PoissonCounts : ArrivalKind::Bernoulli;
        for (int k = 0; k < 1 + trial % 3; ++k) {
            ClassParams c;
            const int N = 1 + static_cast<int>(rng() % 5);
            double total = 0.0;
            for (int n = 0; n < N; ++n) {
                c.q.push_back(u(rng));
                total += c.q.back();
                c.mu.push_back(u(rng));
            }
            for (auto& q : c.q) q /= total;
            std::sort(c.mu.begin(), c.mu.end());
            c.lambda = 0.5 * u(rng);
            c.cost = u(rng);
            cfg.classes.push_back(c);
        }
        if (!violations(cfg).empty()) continue;  // q rounding off by > 1e-12
        const auto path = testing::temp_path("roundtrip.json");
        write_config(cfg, path);
        CHECK(validate(load_config(path)) == cfg);
    }
}

TEST_CASE("load factor") {
    CHECK(load_factor(cdma::two_class(0.14)) == doctest::Approx(0.85));
    CHECK(load_factor(cdma::two_class(0.24)) == doctest::Approx(1.1));
}
