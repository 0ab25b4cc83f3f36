#include "oppsched/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace oppsched {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-12;

bool same_index(double a, double b) {
    if (std::isinf(a) || std::isinf(b)) return a == b;
    return std::abs(a - b) <= kTieTolerance * std::max(std::abs(a), std::abs(b));
}

std::vector<double> parse_list(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string item(text.substr(pos, comma - pos));
        if (item.empty()) throw std::invalid_argument("empty list entry");
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(fmt::format("bad number '{}'", item));
        pos = comma + 1;
    }
    return out;
}

std::string format_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += fmt::format("{}{}", i ? "," : "", v[i]);
    return out;
}

double json_index(const nlohmann::json& v) {
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s == "inf" || s == "+inf" || s == "infinity") return kInf;
        if (s == "-inf") return -kInf;
        return std::stod(s);
    }
    return v.get<double>();
}

}  // namespace

Count Occupancy::total(std::size_t k) const {
    return std::accumulate(counts[k].begin(), counts[k].end(), Count{0});
}

Count Occupancy::total() const {
    Count t = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) t += total(k);
    return t;
}

double index_value(const PolicySpec& spec, std::size_t k, std::size_t n, const SystemConfig& cfg) {
    const auto& c = cfg.classes.at(k);
    switch (spec.index.kind) {
    case IndexKind::ScoreBased: {
        double s = 0.0;
        for (std::size_t m = 0; m <= n; ++m) s += c.q[m];
        return s;
    }
    case IndexKind::PotentialImprovement: {
        double denom = 0.0;
        for (std::size_t m = n + 1; m < c.num_states(); ++m) denom += c.q[m] * (c.mu[m] - c.mu[n]);
        if (denom <= 0.0) return kInf;
        return c.cost * c.mu[n] / denom;
    }
    case IndexKind::WeightBased:
        return spec.index.weights.at(k) * c.mu[n];
    case IndexKind::CMu:
        return c.cost * c.mu[n];
    case IndexKind::RelativeBest: {
        double mean = 0.0;
        for (std::size_t m = 0; m < c.num_states(); ++m) mean += c.q[m] * c.mu[m];
        return c.mu[n] / mean;
    }
    case IndexKind::ProportionallyBest:
        return c.mu[n] / c.best_mu();
    case IndexKind::Custom:
        return spec.index.table.at(k).at(n);
    }
    return 0.0;
}

std::vector<int> myopic_order(const SystemConfig& cfg) {
    std::vector<int> order(cfg.num_classes());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return cfg.classes[a].cost * cfg.classes[a].best_mu() > cfg.classes[b].cost * cfg.classes[b].best_mu();
    });
    return order;
}

Policy::Policy(PolicySpec spec, const SystemConfig& cfg) : spec_(std::move(spec)) {
    const auto K = cfg.num_classes();
    if (spec_.index.kind == IndexKind::WeightBased && spec_.index.weights.size() != K)
        throw std::invalid_argument(fmt::format("weight policy needs {} weights", K));
    if (spec_.index.kind == IndexKind::Custom) {
        if (spec_.index.table.size() != K) throw std::invalid_argument("custom index table: wrong class count");
        for (std::size_t k = 0; k < K; ++k)
            if (spec_.index.table[k].size() != cfg.classes[k].num_states())
                throw std::invalid_argument(fmt::format("custom index table: wrong state count for class {}", k + 1));
    }
    const auto& tie = spec_.tie;
    if (tie.kind == TieKind::RandomWeights) {
        if (tie.weights.size() != K) throw std::invalid_argument(fmt::format("random tie-break needs {} weights", K));
        if (std::any_of(tie.weights.begin(), tie.weights.end(), [](double w) { return !(w >= 0.0); }))
            throw std::invalid_argument("random tie-break weights must be nonnegative");
        if (std::accumulate(tie.weights.begin(), tie.weights.end(), 0.0) <= 0.0)
            throw std::invalid_argument("random tie-break weights are all zero");
    }
    if (tie.kind == TieKind::PriorityOrder) {
        auto sorted = tie.order;
        std::sort(sorted.begin(), sorted.end());
        std::vector<int> ident(K);
        std::iota(ident.begin(), ident.end(), 0);
        if (sorted != ident) throw std::invalid_argument("priority tie-break order is not a permutation");
    }

    index_.resize(K);
    level_.resize(K);
    struct Entry {
        double value;
        std::size_t k, n;
    };
    std::vector<Entry> entries;
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = cfg.classes[k];
        index_[k].resize(c.num_states());
        level_[k].assign(c.num_states(), -1);
        for (std::size_t n = 0; n < c.num_states(); ++n) {
            index_[k][n] = index_value(spec_, k, n, cfg);
            if (c.q[n] > 0.0) {
                if (std::isnan(index_[k][n]))
                    throw std::invalid_argument(fmt::format("index of class {} state {} is undefined", k + 1, n + 1));
                entries.push_back({index_[k][n], k, n});
            }
        }
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
    int lvl = -1;
    double rep = 0.0;
    for (const auto& e : entries) {
        if (lvl < 0 || !same_index(e.value, rep)) {
            ++lvl;
            rep = e.value;
        }
        level_[e.k][e.n] = lvl;
    }
    num_levels_ = lvl + 1;

    by_level_.assign(K, std::vector<std::vector<int>>(num_levels_));
    for (std::size_t k = 0; k < K; ++k) {
        const auto& c = cfg.classes[k];
        for (int n = static_cast<int>(c.num_states()) - 1; n >= 0; --n)
            if (level_[k][n] >= 0) by_level_[k][level_[k][n]].push_back(n);
        for (auto& states : by_level_[k])
            std::stable_sort(states.begin(), states.end(), [&](int a, int b) { return c.mu[a] > c.mu[b]; });
    }

    const auto order = myopic_order(cfg);
    myopic_rank_.resize(K);
    for (std::size_t i = 0; i < K; ++i) myopic_rank_[order[i]] = static_cast<int>(i);
}

std::vector<double> Policy::tie_probabilities(std::span<const int> tied) const {
    std::vector<double> p(tied.size(), 0.0);
    if (tied.empty()) return p;
    const auto pick_min = [&](auto&& rank) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < tied.size(); ++i)
            if (rank(tied[i]) < rank(tied[best])) best = i;
        p[best] = 1.0;
    };
    switch (spec_.tie.kind) {
    case TieKind::Myopic:
        pick_min([&](int k) { return myopic_rank_[k]; });
        break;
    case TieKind::PriorityOrder:
        pick_min([&](int k) {
            return std::find(spec_.tie.order.begin(), spec_.tie.order.end(), k) - spec_.tie.order.begin();
        });
        break;
    case TieKind::RandomWeights: {
        double total = 0.0;
        for (int k : tied) total += spec_.tie.weights[k];
        for (std::size_t i = 0; i < tied.size(); ++i)
            p[i] = total > 0.0 ? spec_.tie.weights[tied[i]] / total : 1.0 / static_cast<double>(tied.size());
        break;
    }
    }
    return p;
}

int Policy::break_tie(std::span<const int> tied, Rng& rng) const {
    if (tied.size() == 1) return tied[0];
    const auto p = tie_probabilities(tied);
    if (spec_.tie.kind != TieKind::RandomWeights) {
        return tied[std::max_element(p.begin(), p.end()) - p.begin()];
    }
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < tied.size(); ++i) {
        acc += p[i];
        if (u < acc) return tied[i];
    }
    // Rounding left u above the running sum; return the last class with mass.
    for (std::size_t i = tied.size(); i-- > 0;)
        if (p[i] > 0.0) return tied[i];
    return tied.back();
}

ServeDecision Policy::select(const Occupancy& occ, Rng& rng) const {
    static const std::vector<bool> none;
    return select(occ, none, rng);
}

ServeDecision Policy::select(const Occupancy& occ, const std::vector<bool>& saturated, Rng& rng) const {
    const auto K = num_classes();
    int best = -1;
    int tied_buf[64];
    std::vector<int> tied_heap;
    int* tied = tied_buf;
    if (K > 64) {
        tied_heap.resize(K);
        tied = tied_heap.data();
    }
    std::size_t ntied = 0;

    for (std::size_t k = 0; k < K; ++k) {
        int lvl = -1;
        if (!saturated.empty() && saturated[k]) {
            for (std::size_t n = 0; n < level_[k].size(); ++n) lvl = std::max(lvl, level_[k][n]);
        } else {
            const auto& cnt = occ.counts[k];
            for (std::size_t n = 0; n < cnt.size(); ++n)
                if (cnt[n] > 0) lvl = std::max(lvl, level_[k][n]);
        }
        if (lvl < 0) continue;
        if (lvl > best) {
            best = lvl;
            ntied = 0;
        }
        if (lvl == best) tied[ntied++] = static_cast<int>(k);
    }
    if (best < 0) return {};

    const int k = break_tie(std::span<const int>(tied, ntied), rng);
    const auto& states = by_level_[k][best];
    if (!saturated.empty() && saturated[k]) return ServeDecision::serve(k, states.front());
    for (int n : states)
        if (occ.counts[k][n] > 0) return ServeDecision::serve(k, n);
    return {};  // unreachable: class level came from a present state
}

ServeDecision select_user(const Policy& policy, const Occupancy& occ, Rng& rng) { return policy.select(occ, rng); }

bool is_best_rate(const PolicySpec& spec, const SystemConfig& cfg) {
    const Policy policy(spec, cfg);
    const auto K = cfg.num_classes();
    for (std::size_t k = 0; k < K; ++k) {
        const int best_k = policy.level(k, cfg.classes[k].best_state());
        for (std::size_t j = 0; j < K; ++j) {
            const auto& cj = cfg.classes[j];
            for (std::size_t n = 0; n + 1 < cj.num_states(); ++n) {
                const int lvl = policy.level(j, n);
                if (lvl < 0) continue;
                if (lvl > best_k) return false;
                if (lvl == best_k && j != k) {
                    const int pair[2] = {static_cast<int>(k), static_cast<int>(j)};
                    if (policy.tie_probabilities(pair)[0] < 1.0) return false;
                }
            }
        }
    }
    return true;
}

bool is_brp(const PolicySpec& spec, const SystemConfig& cfg) {
    return spec.tie.kind == TieKind::Myopic && is_best_rate(spec, cfg);
}

TieBreakRule parse_tie(std::string_view tie, std::size_t num_classes) {
    TieBreakRule rule;
    if (tie == "myopic") return rule;
    const auto colon = tie.find(':');
    const auto head = tie.substr(0, colon);
    if (colon == std::string_view::npos) {
        if (head == "random") {
            rule.kind = TieKind::RandomWeights;
            rule.weights.assign(num_classes, 1.0);
            return rule;
        }
        throw std::invalid_argument(fmt::format("unknown tie-break '{}'", tie));
    }
    const auto values = parse_list(tie.substr(colon + 1));
    if (values.size() != num_classes)
        throw std::invalid_argument(fmt::format("tie-break '{}' needs {} entries", tie, num_classes));
    if (head == "random") {
        rule.kind = TieKind::RandomWeights;
        rule.weights = values;
        if (std::any_of(values.begin(), values.end(), [](double w) { return w < 0.0; }) ||
            std::accumulate(values.begin(), values.end(), 0.0) <= 0.0)
            throw std::invalid_argument("random tie-break weights must be nonnegative and not all zero");
    } else if (head == "priority") {
        rule.kind = TieKind::PriorityOrder;
        for (double v : values) {
            if (v != std::floor(v) || v < 1 || v > static_cast<double>(num_classes))
                throw std::invalid_argument(fmt::format("priority entry {} is not a class", v));
            rule.order.push_back(static_cast<int>(v) - 1);
        }
        auto sorted = rule.order;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("priority order is not a permutation");
    } else {
        throw std::invalid_argument(fmt::format("unknown tie-break '{}'", tie));
    }
    return rule;
}

PolicySpec parse_policy(std::string_view policy, std::string_view tie, std::size_t num_classes) {
    PolicySpec spec;
    bool myopic_default = false;
    if (policy == "sb") {
        spec.index.kind = IndexKind::ScoreBased;
    } else if (policy == "pi") {
        spec.index.kind = IndexKind::PotentialImprovement;
        myopic_default = true;
    } else if (policy == "pb") {
        spec.index.kind = IndexKind::ProportionallyBest;
    } else if (policy == "rb") {
        spec.index.kind = IndexKind::RelativeBest;
    } else if (policy == "cmu") {
        spec.index.kind = IndexKind::CMu;
    } else if (policy.starts_with("weight:")) {
        spec.index.kind = IndexKind::WeightBased;
        spec.index.weights = parse_list(policy.substr(7));
        if (spec.index.weights.size() != num_classes)
            throw std::invalid_argument(fmt::format("weight policy needs {} weights", num_classes));
    } else if (policy.starts_with("custom:")) {
        spec.index.kind = IndexKind::Custom;
        const std::string path(policy.substr(7));
        std::ifstream in(path);
        if (!in) throw std::invalid_argument(fmt::format("cannot open custom index table '{}'", path));
        nlohmann::json j;
        in >> j;
        const auto& rows = j.is_object() ? j.at("table") : j;
        for (const auto& row : rows) {
            std::vector<double> r;
            for (const auto& v : row) r.push_back(json_index(v));
            spec.index.table.push_back(std::move(r));
        }
    } else {
        throw std::invalid_argument(fmt::format("unknown policy '{}'", policy));
    }

    if (!tie.empty()) {
        spec.tie = parse_tie(tie, num_classes);
    } else if (!myopic_default) {
        spec.tie.kind = TieKind::RandomWeights;
        spec.tie.weights.assign(num_classes, 1.0);
    }
    return spec;
}

std::string policy_name(const PolicySpec& spec) {
    switch (spec.index.kind) {
    case IndexKind::ScoreBased: return "sb";
    case IndexKind::PotentialImprovement: return "pi";
    case IndexKind::ProportionallyBest: return "pb";
    case IndexKind::RelativeBest: return "rb";
    case IndexKind::CMu: return "cmu";
    case IndexKind::WeightBased: return "weight:" + format_list(spec.index.weights);
    case IndexKind::Custom: return "custom";
    }
    return "?";
}

std::string tie_name(const TieBreakRule& tie) {
    switch (tie.kind) {
    case TieKind::Myopic: return "myopic";
    case TieKind::RandomWeights: return "random:" + format_list(tie.weights);
    case TieKind::PriorityOrder: {
        std::string out = "priority:";
        for (std::size_t i = 0; i < tie.order.size(); ++i) out += fmt::format("{}{}", i ? "," : "", tie.order[i] + 1);
        return out;
    }
    }
    return "?";
}

std::vector<std::pair<std::string, PolicySpec>> standard_policies(std::size_t num_classes) {
    std::vector<std::pair<std::string, PolicySpec>> out;
    for (const char* name : {"pi", "sb", "pb", "rb", "cmu"}) out.emplace_back(name, parse_policy(name, "", num_classes));
    return out;
}

}  // namespace oppsched
