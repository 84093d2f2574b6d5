#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "mtal/common.hpp"
#include "mtal/strategies.hpp"

namespace mtal {

struct ParetoPoint {
    std::int64_t id = 0;
    std::vector<double> c;  // per-task confidence, minimization objective
};

struct ParetoConfig {
    std::size_t n = 1;
    std::optional<double> beta;       // two-task restriction weight
    std::size_t restricted_task = 1;  // the dependent task's coordinate
};

namespace detail {

inline void validate_points(const std::vector<ParetoPoint>& points) {
    require(!points.empty(), "pareto: empty point set");
    const std::size_t t = points.front().c.size();
    require(t >= 1, "pareto: points need at least one coordinate");
    for (const auto& p : points) {
        require(p.c.size() == t, "pareto: inconsistent dimensionality");
        for (double v : p.c) require(v >= 0.0 && v <= 1.0, "pareto: coordinate outside [0,1]");
    }
}

// a dominates b: a <= b everywhere, a < b somewhere.
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.c.size(); ++i) {
        if (a.c[i] > b.c[i]) return false;
        if (a.c[i] < b.c[i]) strict = true;
    }
    return strict;
}

} // namespace detail

inline std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
    detail::validate_points(points);
    std::vector<ParetoPoint> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j)
            if (j != i && detail::dominates(points[j], points[i])) dominated = true;
        if (!dominated) out.push_back(points[i]);
    }
    return out;
}

// Successive frontier peels. Concatenated layers are a partition of the input.
inline std::vector<std::vector<ParetoPoint>> pareto_layers(std::vector<ParetoPoint> points) {
    detail::validate_points(points);
    std::vector<std::vector<ParetoPoint>> layers;
    while (!points.empty()) {
        auto layer = pareto_frontier(points);
        std::vector<bool> on_layer(points.size(), false);
        std::size_t li = 0;
        for (std::size_t i = 0; i < points.size() && li < layer.size(); ++i)
            if (points[i].id == layer[li].id) {
                on_layer[i] = true;
                ++li;
            }
        std::vector<ParetoPoint> rest;
        for (std::size_t i = 0; i < points.size(); ++i)
            if (!on_layer[i]) rest.push_back(std::move(points[i]));
        layers.push_back(std::move(layer));
        points = std::move(rest);
    }
    return layers;
}

namespace detail {

inline void sort_by_first_axis(std::vector<ParetoPoint>& layer) {
    std::sort(layer.begin(), layer.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        if (a.c[0] != b.c[0]) return a.c[0] < b.c[0];
        return a.id < b.id;
    });
}

} // namespace detail

inline std::vector<ParetoPoint> beta_pareto_frontier(const std::vector<ParetoPoint>& points, double beta,
                                                     std::size_t restricted_task);

// Accumulate whole frontier layers; if the last layer would overshoot, walk it
// in first-axis order with stride floor(f/p) starting at position 0. With a
// beta restriction the layers are peeled under the restricted dominance
// predicate, quantile recomputed over each remaining set.
inline SelectionResult pareto_select(const std::vector<ParetoPoint>& points, const ParetoConfig& cfg) {
    detail::validate_points(points);
    require(cfg.n >= 1, "pareto_select: n must be >= 1");
    require(cfg.n <= points.size(), "pareto_select: n exceeds point count");
    const std::size_t tasks = points.front().c.size();
    const bool restricted = cfg.beta.has_value() && *cfg.beta != 0.5;

    std::vector<std::int64_t> picked;
    picked.reserve(cfg.n);
    std::vector<ParetoPoint> remaining = points;
    while (picked.size() < cfg.n) {
        auto layer = restricted ? beta_pareto_frontier(remaining, *cfg.beta, cfg.restricted_task)
                                : pareto_frontier(remaining);
        require(!layer.empty(), "pareto_select: empty layer");
        // Membership scan must run before sorting: the layer comes back in
        // remaining's order, which the two-pointer match relies on.
        std::vector<bool> on_layer(remaining.size(), false);
        std::size_t li = 0;
        for (std::size_t i = 0; i < remaining.size() && li < layer.size(); ++i)
            if (remaining[i].id == layer[li].id) {
                on_layer[i] = true;
                ++li;
            }
        detail::sort_by_first_axis(layer);
        const std::size_t want = cfg.n - picked.size();
        if (layer.size() <= want) {
            for (const auto& p : layer) picked.push_back(p.id);
        } else {
            const std::size_t stride = layer.size() / want;
            for (std::size_t s = 0; picked.size() < cfg.n; s += stride) picked.push_back(layer[s].id);
            break;
        }
        std::vector<ParetoPoint> rest;
        for (std::size_t i = 0; i < remaining.size(); ++i)
            if (!on_layer[i]) rest.push_back(std::move(remaining[i]));
        remaining = std::move(rest);
    }
    return make_full_selection(std::move(picked), tasks, "pareto");
}

// Nearest-rank empirical quantile: 1-based index max(1, ceil(beta * n)).
inline double beta_quantile(std::vector<double> values, double beta) {
    require(!values.empty(), "beta_quantile: empty values");
    require(beta >= 0.0 && beta <= 1.0, "beta_quantile: beta outside [0,1]");
    std::sort(values.begin(), values.end());
    const auto rank = static_cast<std::size_t>(
        std::max<double>(1.0, std::ceil(beta * static_cast<double>(values.size()))));
    return values[rank - 1];
}

// Two-task frontier where one coordinate's comparisons are tightened to
// c <= q_beta * c' (strict form <). beta < 0.5 tightens the restricted task's
// coordinate, beta > 0.5 the other's, beta = 0.5 is the plain frontier.
// Dominance here: both weak conditions hold and at least one strict one does,
// with the tightened forms substituted at the affected coordinate.
inline std::vector<ParetoPoint> beta_pareto_frontier(const std::vector<ParetoPoint>& points, double beta,
                                                     std::size_t restricted_task) {
    detail::validate_points(points);
    require(beta >= 0.0 && beta <= 1.0, "beta_pareto_frontier: beta outside [0,1]");
    const std::size_t t = points.front().c.size();
    if (t != 2) throw unsupported_error("beta_pareto_frontier: defined for exactly two tasks");
    require(restricted_task < 2, "beta_pareto_frontier: restricted task out of range");

    if (beta == 0.5) return pareto_frontier(points);

    const std::size_t eff = beta < 0.5 ? restricted_task : 1 - restricted_task;
    std::vector<double> coord(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) coord[i] = points[i].c[eff];
    const double q = beta_quantile(coord, beta);

    auto weak = [&](const ParetoPoint& a, const ParetoPoint& b, std::size_t i) {
        return i == eff ? a.c[i] <= q * b.c[i] : a.c[i] <= b.c[i];
    };
    auto strict = [&](const ParetoPoint& a, const ParetoPoint& b, std::size_t i) {
        return i == eff ? a.c[i] < q * b.c[i] : a.c[i] < b.c[i];
    };
    auto dominates = [&](const ParetoPoint& a, const ParetoPoint& b) {
        return weak(a, b, 0) && weak(a, b, 1) && (strict(a, b, 0) || strict(a, b, 1));
    };

    std::vector<ParetoPoint> out;
    for (std::size_t i = 0; i < points.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < points.size() && !dominated; ++j)
            if (j != i && dominates(points[j], points[i])) dominated = true;
        if (!dominated) out.push_back(points[i]);
    }
    return out;
}

} // namespace mtal
