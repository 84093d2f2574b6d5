#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtal/common.hpp"
#include "mtal/strategies.hpp"

namespace mtal {

// One task's ranking: position 0 holds the least confident example (rank 1).
struct TaskRanking {
    std::vector<std::int64_t> order;

    void validate() const {
        require(!order.empty(), "TaskRanking: empty ranking");
        std::set<std::int64_t> seen(order.begin(), order.end());
        require(seen.size() == order.size(), "TaskRanking: ids must be unique");
    }
};

struct RRFParams {
    double k = 60.0;
    std::vector<double> weights;  // per task; empty = all 1

    // Two-task scaling form: the dependent task's term (index 1) gets beta.
    static RRFParams beta_weighted(double beta, double k = 60.0) {
        require(beta >= 0.0 && beta <= 1.0, "RRFParams: beta outside [0,1]");
        return {k, {1.0 - beta, beta}};
    }
};

inline TaskRanking ranking_from_confidence(const std::vector<double>& scores,
                                           const std::vector<std::int64_t>& ids) {
    return TaskRanking{confidence_order(scores, ids)};
}

// score(x) = sum_i w_i / (k + r_i(x)), ranks 1-based. Returned sorted by id.
inline std::vector<std::pair<std::int64_t, double>> rrf_scores(const std::vector<TaskRanking>& rankings,
                                                               const RRFParams& params = {}) {
    require(!rankings.empty(), "rrf_scores: no rankings");
    require(params.k > 0.0, "rrf_scores: k must be positive");
    std::vector<double> weights = params.weights;
    if (weights.empty()) weights.assign(rankings.size(), 1.0);
    require(weights.size() == rankings.size(), "rrf_scores: weight count != ranking count");
    for (double w : weights) require(w >= 0.0, "rrf_scores: negative weight");

    for (const auto& r : rankings) r.validate();
    const std::set<std::int64_t> base(rankings.front().order.begin(), rankings.front().order.end());
    for (const auto& r : rankings) {
        std::set<std::int64_t> mine(r.order.begin(), r.order.end());
        require(mine == base, "rrf_scores: rankings cover different id sets");
    }

    std::map<std::int64_t, double> acc;
    for (auto id : base) acc[id] = 0.0;
    for (std::size_t t = 0; t < rankings.size(); ++t)
        for (std::size_t pos = 0; pos < rankings[t].order.size(); ++pos)
            acc[rankings[t].order[pos]] += weights[t] / (params.k + static_cast<double>(pos + 1));

    return {acc.begin(), acc.end()};
}

// Fuse per-column rankings and take the n highest RRF scores (ties by id).
inline SelectionResult rrf_select(const ConfidenceMatrix& cm, std::size_t n, const RRFParams& params = {}) {
    cm.validate();
    require(n <= cm.examples(), "rrf_select: n exceeds pool");
    std::vector<TaskRanking> rankings;
    rankings.reserve(cm.tasks());
    for (std::size_t t = 0; t < cm.tasks(); ++t)
        rankings.push_back(ranking_from_confidence(cm.column(t), cm.ids));

    auto scored = rrf_scores(rankings, params);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::int64_t> picked;
    picked.reserve(n);
    for (std::size_t i = 0; i < n; ++i) picked.push_back(scored[i].first);
    return make_full_selection(std::move(picked), cm.tasks(), "rrf");
}

// Per-task quotas floor(fraction * n), leftover slots one per task from task 0.
// Tasks then claim in round-robin order, each taking its next least-confident
// example not already claimed.
inline SelectionResult ind_select(const ConfidenceMatrix& cm, std::size_t n,
                                  std::vector<double> split = {}) {
    cm.validate();
    require(n <= cm.examples(), "ind_select: n exceeds pool");
    const std::size_t t = cm.tasks();
    if (split.empty()) split.assign(t, 1.0 / static_cast<double>(t));
    require(split.size() == t, "ind_select: split size != task count");
    double sum = 0.0;
    for (double f : split) {
        require(f >= 0.0, "ind_select: negative fraction");
        sum += f;
    }
    require(std::abs(sum - 1.0) <= 1e-9, "ind_select: fractions must sum to 1");

    std::vector<std::size_t> quota(t);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < t; ++i) {
        quota[i] = static_cast<std::size_t>(split[i] * static_cast<double>(n));
        assigned += quota[i];
    }
    for (std::size_t i = 0; assigned < n; i = (i + 1) % t, ++assigned) ++quota[i];

    std::vector<TaskRanking> rankings;
    rankings.reserve(t);
    for (std::size_t j = 0; j < t; ++j)
        rankings.push_back(ranking_from_confidence(cm.column(j), cm.ids));

    std::set<std::int64_t> claimed;
    std::vector<std::size_t> cursor(t, 0);
    std::vector<std::int64_t> picked;
    picked.reserve(n);
    while (picked.size() < n) {
        for (std::size_t j = 0; j < t && picked.size() < n; ++j) {
            if (quota[j] == 0) continue;
            auto& pos = cursor[j];
            const auto& order = rankings[j].order;
            while (pos < order.size() && claimed.count(order[pos])) ++pos;
            // pos < order.size() always holds: claimed < n <= pool and order covers the pool
            claimed.insert(order[pos]);
            picked.push_back(order[pos]);
            --quota[j];
        }
    }
    return make_full_selection(std::move(picked), t, "independent");
}

} // namespace mtal
