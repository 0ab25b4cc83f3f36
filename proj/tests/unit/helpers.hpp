#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "oppsched/model.hpp"
#include "oppsched/policy.hpp"

namespace testing {

inline std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "oppsched_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline oppsched::SystemConfig single_class(double lambda, std::vector<double> q, std::vector<double> mu) {
    oppsched::SystemConfig cfg;
    oppsched::ClassParams c;
    c.lambda = lambda;
    c.q = std::move(q);
    c.mu = std::move(mu);
    cfg.classes = {c};
    return cfg;
}

/// sum_n q_{k,n} mu_{k,n}
inline double mean_rate(const oppsched::ClassParams& c) {
    double s = 0.0;
    for (std::size_t n = 0; n < c.q.size(); ++n) s += c.q[n] * c.mu[n];
    return s;
}

}  // namespace testing
