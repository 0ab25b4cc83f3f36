#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dense_chain.hpp"
#include "helpers.hpp"
#include "oppsched/drift.hpp"
#include "serve_oracle.hpp"

using namespace oppsched;

namespace {

PolicySpec spec(const char* p, const char* tie = "", std::size_t K = 2) { return parse_policy(p, tie, K); }

void check_against_oracle(const PolicySpec& s, const SystemConfig& cfg, const std::vector<Count>& x,
                          const ClassSet& in_u) {
    const Policy p(s, cfg);
    const auto got = serve_distribution(p, cfg, x, in_u);
    const auto want = oracle::serve_table(s, cfg, x, in_u);
    CHECK(std::abs(got.idle - want.idle) <= 1e-12);
    for (std::size_t k = 0; k < cfg.num_classes(); ++k)
        for (std::size_t n = 0; n < want.prob[k].size(); ++n) CHECK(std::abs(got.prob[k][n] - want.prob[k][n]) <= 1e-12);
    CHECK(std::abs(got.total() - 1.0) <= 1e-12);
}

/// Table I plus a slower third class whose best state is state 6.
SystemConfig three_class() {
    auto cfg = cdma::two_class(0.05, 0.02);
    ClassParams c3;
    c3.lambda = 0.01;
    c3.q = {0, 0, 0.2, 0, 0.3, 0.5};
    c3.mu.assign(cfg.classes[0].mu.begin(), cfg.classes[0].mu.begin() + 6);
    cfg.classes.push_back(c3);
    return validate(cfg);
}

}  // namespace

TEST_CASE("serve distribution matches brute force on small occupancies") {
    const auto cfg = cdma::two_class(0.14);
    check_against_oracle(spec("sb", "random:1,1"), cfg, {2, 1}, full_set(2));
    for (const auto& [name, s0] : standard_policies(2)) {
        for (const char* tie : {"myopic", "random:0.3,0.7", "priority:2,1"}) {
            const auto s = parse_policy(name, tie, 2);
            for (Count x1 = 0; x1 <= 3; ++x1)
                for (Count x2 = 0; x2 <= 3; ++x2) check_against_oracle(s, cfg, {x1, x2}, full_set(2));
            for (Count x1 = 0; x1 <= 4; ++x1) check_against_oracle(s, cfg, {x1, 0}, make_set(2, {0}));
            check_against_oracle(s, cfg, {0, 0}, empty_set(2));
        }
    }
}

TEST_CASE("serve distribution with three-way ties") {
    const auto cfg = three_class();
    for (const char* p : {"sb", "pb", "pi", "cmu", "rb"})
        for (const char* tie : {"myopic", "random:1,2,3", "priority:3,1,2"}) {
            const auto s = parse_policy(p, tie, 3);
            check_against_oracle(s, cfg, {2, 1, 2}, full_set(3));
            check_against_oracle(s, cfg, {1, 2, 0}, make_set(3, {0, 1}));
            check_against_oracle(s, cfg, {0, 0, 0}, empty_set(3));
        }
}

TEST_CASE("serve distribution examples") {
    const auto single = testing::single_class(0.1, {0.2, 0.0, 0.3, 0.5}, {0.1, 0.1, 0.2, 0.4});
    const Policy p(spec("cmu", "", 1), single);
    const std::vector<Count> one{1};
    const auto sd = serve_distribution(p, single, one, full_set(1));
    for (std::size_t n = 0; n < 4; ++n) CHECK(sd.prob[0][n] == doctest::Approx(single.classes[0].q[n]));
    CHECK(sd.idle == 0.0);

    const auto cfg = cdma::two_class(0.14);
    const Policy pi(spec("pi"), cfg);
    const std::vector<Count> zero{0, 0};
    const auto sat = serve_distribution(pi, cfg, zero, empty_set(2));
    CHECK(sat.prob[0][10] == 1.0);
    CHECK(sat.idle == 0.0);
    CHECK(serve_distribution(pi, cfg, zero, full_set(2)).idle == 1.0);
}

TEST_CASE("one-slot drifts") {
    const auto cfg = cdma::two_class(0.14);
    const std::vector<Count> zero{0, 0};
    const auto d_pi = drift(Policy(spec("pi"), cfg), cfg, zero, empty_set(2));
    CHECK(d_pi[0] == doctest::Approx(-0.26).epsilon(1e-12));
    CHECK(d_pi[1] == doctest::Approx(0.05).epsilon(1e-12));
    const auto d_sb = drift(Policy(spec("sb", "random:1,1"), cfg), cfg, zero, empty_set(2));
    CHECK(d_sb[0] == doctest::Approx(-0.06).epsilon(1e-12));
    CHECK(std::abs(d_sb[1]) <= 1e-15);

    const auto single = testing::single_class(0.3, {1.0}, {0.5});
    const std::vector<Count> none{0};
    CHECK(drift(Policy(spec("cmu", "", 1), single), single, none, full_set(1))[0] == 0.3);
}

TEST_CASE("1-d solver: constant service gives geometric masses") {
    const double lambda = 0.2, s = 0.5;
    const auto cfg = testing::single_class(lambda, {1.0}, {s});
    const auto st = stationary_1d(Policy(spec("cmu", "", 1), cfg), cfg, 0);
    const double ratio = lambda * (1 - s) / ((1 - lambda) * s);
    CHECK(st.mass[1] / st.mass[0] == doctest::Approx(lambda / ((1 - lambda) * s)));
    REQUIRE(st.mass.size() >= 10);
    for (std::size_t x = 2; x < st.mass.size(); ++x) CHECK(st.mass[x] / st.mass[x - 1] == doctest::Approx(ratio));
    CHECK(std::accumulate(st.mass.begin(), st.mass.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.tail_bound < 1e-8);
}

TEST_CASE("1-d solver: two-state priority example") {
    // Any class-1 user goes first; class 2 is saturated with one state.
    SystemConfig cfg;
    cfg.classes = {ClassParams{0.1, {0.6, 0.4}, {0.2, 0.5}, 1.0}, ClassParams{0.05, {1.0}, {0.3}, 1.0}};
    PolicySpec s;
    s.index.kind = IndexKind::Custom;
    s.index.table = {{2.0, 3.0}, {1.0}};
    const Policy p(s, cfg);
    const auto st = stationary_1d(p, cfg, 0);

    const double l = 0.1, qN = 0.4, muN = 0.5, muN1 = 0.2;
    auto s1 = [&](int x) { return x == 0 ? 0.0 : muN * (1 - std::pow(1 - qN, x)) + muN1 * std::pow(1 - qN, x); };
    std::vector<double> w{1.0};
    for (int j = 1; j < 200; ++j) w.push_back(w.back() * l * (1 - s1(j - 1)) / ((1 - l) * s1(j)));
    const double C = 1.0 / std::accumulate(w.begin(), w.end(), 0.0);
    REQUIRE(st.mass.size() >= 5);
    for (std::size_t x = 0; x < st.mass.size(); ++x) {
        CHECK(st.mass[x] / st.mass[0] == doctest::Approx(w[x]).epsilon(1e-12));
        CHECK(st.mass[x] == doctest::Approx(C * w[x]).epsilon(1e-7));
    }

    // Class 2 is served only when class 1 is empty.
    const auto a = averaged_drift(p, cfg, make_set(2, {0}));
    CHECK(a.delta[1] == doctest::Approx(0.05 - 0.3 * C).epsilon(1e-9));
    CHECK(std::abs(a.delta[0]) <= 1e-8);
}

TEST_CASE("1-d solver errors") {
    const auto cfg = cdma::two_class(0.24);
    CHECK_THROWS_WITH_AS(stationary_1d(Policy(spec("sb"), cfg), cfg, 0), doctest::Contains("not ergodic"),
                         SolverError);
    auto poisson = cdma::two_class(0.14);
    poisson.arrival_kind = ArrivalKind::PoissonCounts;
    CHECK_THROWS_WITH_AS(stationary_1d(Policy(spec("cmu"), poisson), poisson, 0),
                         doctest::Contains("requires Bernoulli arrivals"), SolverError);
}

TEST_CASE("1-d solver agrees with a saturated simulation") {
    const auto cfg = cdma::two_class(0.14);
    const Policy p(spec("cmu"), cfg);
    const double exact = stationary_1d(p, cfg, 0).mean(0);
    std::vector<double> means;
    for (std::uint64_t seed = 1; seed <= 8; ++seed)
        means.push_back(run_saturated(cfg, p, make_set(2, {0}), 400'000, seed).mean_count[0]);
    const double m = std::accumulate(means.begin(), means.end(), 0.0) / 8;
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    const double se = std::sqrt(var / 7 / 8);
    CHECK(std::abs(m - exact) <= 3 * se + 1e-3);
}

TEST_CASE("multi-d solver: one class matches the 1-d solver") {
    const auto cfg = cdma::two_class(0.14);
    const Policy p(spec("cmu"), cfg);
    StationaryOptions o;
    o.initial_grid = 100;
    const auto one = stationary_1d(p, cfg, 0, o);
    const auto multi = stationary_multid(p, cfg, make_set(2, {0}), o);
    for (std::size_t x = 0; x < std::min(one.mass.size(), multi.mass.size()); ++x)
        CHECK(std::abs(one.mass[x] - multi.mass[x]) <= 1e-8);
}

TEST_CASE("multi-d solver matches a dense linear solve") {
    auto cfg = cdma::two_class(0.03, 0.02);
    for (const char* name : {"cmu", "rb", "sb"}) {
        const auto s = spec(name);
        StationaryOptions o;
        o.initial_grid = 24;
        o.tail_tol = 1e-6;
        o.tol = 1e-13;
        const auto st = stationary_multid(Policy(s, cfg), cfg, full_set(2), o);
        REQUIRE(st.extent[0] == 25);
        const auto dense = oracle::dense_stationary(Policy(s, cfg), cfg, 0, 1, 24);
        double worst = 0.0;
        for (std::size_t i = 0; i < dense.size(); ++i) worst = std::max(worst, std::abs(dense[i] - st.mass[i]));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("multi-d solver on a three-class extension") {
    const auto cfg = three_class();
    const Policy p(spec("cmu", "", 3), cfg);
    StationaryOptions o;
    o.initial_grid = 48;
    const auto in_u = make_set(3, {0, 1});
    const auto st = stationary_multid(p, cfg, in_u, o);
    CHECK(std::accumulate(st.mass.begin(), st.mass.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(st.tail_bound < o.tail_tol);
    const auto a = averaged_drift(p, cfg, in_u, DriftRoute::Auto, o);
    CHECK(a.method == DriftMethod::TruncatedSolve);
    CHECK(std::abs(a.delta[0]) <= 1e-6);
    CHECK(std::abs(a.delta[1]) <= 1e-6);
}

TEST_CASE("averaged drift examples") {
    const auto cfg = cdma::two_class(0.14);
    const auto u1 = make_set(2, {0});
    for (const char* br : {"pi", "sb", "pb"}) {
        const auto a = averaged_drift(Policy(spec(br), cfg), cfg, u1);
        CHECK(a.method == DriftMethod::ClosedForm);
        CHECK(a.delta[0] == 0.0);
        CHECK(a.delta[1] == doctest::Approx(-0.015).epsilon(1e-12));
    }
    const auto cmu = averaged_drift(Policy(spec("cmu"), cfg), cfg, u1);
    CHECK(std::abs(cmu.delta[1] - 0.0096) <= 0.002);
    const auto rb = averaged_drift(Policy(spec("rb"), cfg), cfg, u1);
    CHECK(std::abs(rb.delta[1] - 0.0004) <= 0.002);

    const auto over = cdma::two_class(0.24);
    const auto a = averaged_drift(Policy(spec("pi"), over), over, u1);
    CHECK(a.delta[0] == 0.0);
    CHECK(a.delta[1] == doctest::Approx(0.01).epsilon(1e-12));
    CHECK_THROWS_AS(averaged_drift(Policy(spec("sb"), over), over, u1), SolverError);
    CHECK_THROWS_AS(averaged_drift(Policy(spec("pi"), over), over, full_set(2)), SolverError);
}

TEST_CASE("closed forms agree with the numeric path on best-rate entries") {
    for (double l1 : {0.14, 0.24}) {
        const auto cfg = cdma::two_class(l1);
        for (const char* br : {"pi", "sb", "pb"}) {
            const Policy p(spec(br), cfg);
            for (const auto& u : {empty_set(2), make_set(2, {0})}) {
                AveragedDrift closed, numeric;
                try {
                    closed = averaged_drift(p, cfg, u, DriftRoute::Auto);
                } catch (const SolverError&) {
                    CHECK_THROWS_AS(averaged_drift(p, cfg, u, DriftRoute::Numeric), SolverError);
                    continue;
                }
                numeric = averaged_drift(p, cfg, u, DriftRoute::Numeric);
                for (std::size_t k = 0; k < 2; ++k) CHECK(std::abs(closed.delta[k] - numeric.delta[k]) <= 2e-3);
            }
        }
    }
}

TEST_CASE("averaged drift of unsaturated classes vanishes") {
    const auto cfg = cdma::two_class(0.14);
    for (const auto& [name, s] : standard_policies(2)) {
        const auto a = averaged_drift(Policy(s, cfg), cfg, make_set(2, {0}), DriftRoute::Numeric);
        CHECK(std::abs(a.delta[0]) <= std::max(a.tolerance, 1e-8));
        for (double d : a.delta) {
            CHECK(d >= -1.0);
            CHECK(d <= 0.14 + 1e-12);
        }
    }
}

TEST_CASE("drift is partially increasing") {
    const auto check = [](const PolicySpec& s, const SystemConfig& cfg, Count hi) {
        const Policy p(s, cfg);
        const auto K = cfg.num_classes();
        std::vector<Count> x(K, 0);
        // Walk the lattice [0, hi]^K.
        for (;;) {
            const auto base = drift(p, cfg, x, full_set(K));
            for (std::size_t j = 0; j < K; ++j) {
                auto y = x;
                ++y[j];
                const auto up = drift(p, cfg, y, full_set(K));
                for (std::size_t i = 0; i < K; ++i)
                    if (i != j) CHECK(up[i] >= base[i] - 1e-12);
            }
            std::size_t k = 0;
            while (k < K && ++x[k] > hi) x[k++] = 0;
            if (k == K) break;
        }
    };
    const auto cfg = cdma::two_class(0.14);
    for (const auto& [name, s0] : standard_policies(2))
        for (const char* tie : {"myopic", "random:1,1", "priority:2,1"}) check(parse_policy(name, tie, 2), cfg, 8);
    const auto three = three_class();
    for (const char* name : {"pi", "sb", "cmu"}) check(parse_policy(name, "random:1,2,3", 3), three, 3);
}

TEST_CASE("drift converges to the saturated drift as counts grow") {
    const auto cfg = cdma::two_class(0.14);
    for (const auto& [name, s] : standard_policies(2)) {
        const Policy p(s, cfg);
        for (Count x1 : {0, 1, 3}) {
            const std::vector<Count> part{x1, 0};
            const auto limit = drift(p, cfg, part, make_set(2, {0}));
            double prev = INFINITY;
            for (Count x2 : {1, 10, 100}) {
                const std::vector<Count> x{x1, x2};
                const auto d = drift(p, cfg, x, full_set(2));
                const double gap = std::max(std::abs(d[0] - limit[0]), std::abs(d[1] - limit[1]));
                // Union bound over the class-2 states that could be missing.
                double bound = 0.0;
                for (double q : cfg.classes[1].q)
                    if (q > 0) bound += std::pow(1 - q, static_cast<double>(x2));
                CHECK(gap <= bound + 1e-15);
                CHECK(gap <= prev + 1e-15);
                prev = gap;
            }
            CHECK(prev <= 1e-15);
        }
    }
}

TEST_CASE("class sets") {
    CHECK(format_set(make_set(3, {0, 2})) == "{1;3}");
    CHECK(format_set(empty_set(2)) == "{}");
    CHECK(parse_set("2", 2) == make_set(2, {1}));
    CHECK(parse_set("", 2) == empty_set(2));
    CHECK_THROWS(parse_set("3", 2));
}
