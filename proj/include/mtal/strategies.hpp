#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "mtal/common.hpp"
#include "mtal/rng.hpp"

namespace mtal {

enum class ScoreKind { entropy_confidence, dropout_agreement };

inline const char* to_string(ScoreKind kind) {
    return kind == ScoreKind::entropy_confidence ? "entropy_confidence" : "dropout_agreement";
}

// n examples x t tasks of per-task confidence scores, plus what kind of score
// each column holds. Aggregations that only make sense for one kind check the
// tags instead of silently mixing units.
struct ConfidenceMatrix {
    std::vector<std::int64_t> ids;
    std::vector<ScoreKind> kinds;   // one per task
    std::vector<double> scores;     // row-major, ids.size() x kinds.size()

    std::size_t examples() const { return ids.size(); }
    std::size_t tasks() const { return kinds.size(); }
    double at(std::size_t example, std::size_t task) const { return scores[example * kinds.size() + task]; }

    void validate() const {
        require(!kinds.empty(), "ConfidenceMatrix: need at least one task");
        require(!ids.empty(), "ConfidenceMatrix: need at least one example");
        require(scores.size() == ids.size() * kinds.size(), "ConfidenceMatrix: score grid size mismatch");
        for (double v : scores) require(v >= 0.0 && v <= 1.0, "ConfidenceMatrix: score outside [0,1]");
        std::unordered_set<std::int64_t> seen;
        for (auto id : ids) require(seen.insert(id).second, "ConfidenceMatrix: duplicate example id");
    }

    std::vector<double> column(std::size_t task) const {
        std::vector<double> out(examples());
        for (std::size_t i = 0; i < examples(); ++i) out[i] = at(i, task);
        return out;
    }
};

struct AggregationScheme {
    enum class Kind { avg, avgda, max, min, weighted_avg };

    Kind kind = Kind::avg;
    std::vector<double> weights;  // weighted_avg only, one weight per task

    static AggregationScheme avg() { return {Kind::avg, {}}; }
    static AggregationScheme avgda() { return {Kind::avgda, {}}; }
    static AggregationScheme max() { return {Kind::max, {}}; }
    static AggregationScheme min() { return {Kind::min, {}}; }
    static AggregationScheme weighted(std::vector<double> w) { return {Kind::weighted_avg, std::move(w)}; }

    // Two-task scaling form: beta weights the dependent task (index 1),
    // 1-beta the task it depends on (index 0).
    static AggregationScheme beta_weighted(double beta) {
        require(beta >= 0.0 && beta <= 1.0, "AggregationScheme: beta outside [0,1]");
        return weighted({1.0 - beta, beta});
    }
};

struct SelectionResult {
    std::vector<std::int64_t> ids;              // selection order
    std::vector<std::vector<bool>> task_flags;  // per selected id, per task: annotate?
    std::string strategy;
    std::optional<std::int64_t> total_cost;

    void validate() const {
        require(task_flags.size() == ids.size(), "SelectionResult: flag rows != ids");
        std::unordered_set<std::int64_t> seen;
        for (auto id : ids) require(seen.insert(id).second, "SelectionResult: duplicate id");
    }
};

inline SelectionResult make_full_selection(std::vector<std::int64_t> ids, std::size_t tasks,
                                           std::string strategy) {
    SelectionResult res;
    res.task_flags.assign(ids.size(), std::vector<bool>(tasks, true));
    res.ids = std::move(ids);
    res.strategy = std::move(strategy);
    return res;
}

inline std::vector<double> aggregate_confidences(const ConfidenceMatrix& cm, const AggregationScheme& scheme) {
    cm.validate();
    const std::size_t t = cm.tasks();

    auto require_kind = [&](ScoreKind want, const char* name) {
        for (auto k : cm.kinds)
            require(k == want, std::string(name) + ": column kind mismatch, expected " + to_string(want));
    };

    if (scheme.kind == AggregationScheme::Kind::avg) require_kind(ScoreKind::entropy_confidence, "AVG");
    if (scheme.kind == AggregationScheme::Kind::avgda) require_kind(ScoreKind::dropout_agreement, "AVGDA");
    if (scheme.kind == AggregationScheme::Kind::weighted_avg) {
        require(scheme.weights.size() == t, "WEIGHTED_AVG: weight count != task count");
        double sum = 0.0;
        for (double w : scheme.weights) {
            require(w >= 0.0, "WEIGHTED_AVG: negative weight");
            sum += w;
        }
        require(std::abs(sum - 1.0) <= 1e-9, "WEIGHTED_AVG: weights must sum to 1");
    }

    std::vector<double> out(cm.examples());
    for (std::size_t i = 0; i < cm.examples(); ++i) {
        switch (scheme.kind) {
            case AggregationScheme::Kind::avg:
            case AggregationScheme::Kind::avgda: {
                double acc = 0.0;
                for (std::size_t j = 0; j < t; ++j) acc += cm.at(i, j);
                out[i] = acc / static_cast<double>(t);
                break;
            }
            case AggregationScheme::Kind::max: {
                double best = cm.at(i, 0);
                for (std::size_t j = 1; j < t; ++j) best = std::max(best, cm.at(i, j));
                out[i] = best;
                break;
            }
            case AggregationScheme::Kind::min: {
                double best = cm.at(i, 0);
                for (std::size_t j = 1; j < t; ++j) best = std::min(best, cm.at(i, j));
                out[i] = best;
                break;
            }
            case AggregationScheme::Kind::weighted_avg: {
                double acc = 0.0;
                for (std::size_t j = 0; j < t; ++j) acc += scheme.weights[j] * cm.at(i, j);
                out[i] = acc;
                break;
            }
        }
    }
    return out;
}

// Ids ordered by ascending confidence, ties by ascending id. The full
// ordering, not just a selection; callers slice prefixes.
inline std::vector<std::int64_t> confidence_order(const std::vector<double>& scores,
                                                  const std::vector<std::int64_t>& ids) {
    require(scores.size() == ids.size(), "confidence_order: scores/ids size mismatch");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] < scores[b];
        return ids[a] < ids[b];
    });
    std::vector<std::int64_t> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ids[idx[i]];
    return out;
}

inline SelectionResult rank_by_confidence(const std::vector<double>& scores,
                                          const std::vector<std::int64_t>& ids, std::size_t n,
                                          std::size_t tasks = 1, std::string strategy = "least_confident") {
    auto order = confidence_order(scores, ids);
    if (order.size() > n) order.resize(n);
    return make_full_selection(std::move(order), tasks, std::move(strategy));
}

inline SelectionResult rank_by_confidence(const std::vector<double>& scores, std::size_t n) {
    std::vector<std::int64_t> ids(scores.size());
    std::iota(ids.begin(), ids.end(), 0);
    return rank_by_confidence(scores, ids, n);
}

// Uniform sample without replacement, reproducible for a given seed.
inline SelectionResult random_select(const std::vector<std::int64_t>& pool, std::size_t n,
                                     std::uint64_t seed, std::size_t tasks = 1) {
    std::vector<std::int64_t> items = pool;
    Rng rng(seed);
    const std::size_t take = std::min(n, items.size());
    rng.partial_shuffle(items, take);
    items.resize(take);
    return make_full_selection(std::move(items), tasks, "random");
}

// Percentage of a's ids also present in b. Both sides must be the same size,
// mirroring same-budget comparisons.
inline double selection_overlap(const SelectionResult& a, const SelectionResult& b) {
    require(!a.ids.empty(), "selection_overlap: empty selection");
    require(a.ids.size() == b.ids.size(), "selection_overlap: selections differ in size");
    std::unordered_set<std::int64_t> bset(b.ids.begin(), b.ids.end());
    std::size_t shared = 0;
    for (auto id : a.ids)
        if (bset.count(id)) ++shared;
    return 100.0 * static_cast<double>(shared) / static_cast<double>(a.ids.size());
}

} // namespace mtal
