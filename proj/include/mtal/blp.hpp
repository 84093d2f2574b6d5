#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "mtal/common.hpp"

namespace mtal {

// One binary-program "group": mutually exclusive states, exactly one chosen.
// A plain 0/1 variable is a two-state group; an example with multiple
// annotation flags is a group whose states enumerate the feasible flag
// patterns with their combined cost and objective value.
//
// pattern packs the flag bits with flag 0 in the highest used bit, so plain
// integer order on pattern equals lexicographic order on the flag vector.
struct McState {
    std::int64_t cost = 0;
    double value = 0.0;
    std::uint32_t pattern = 0;
};

struct McGroup {
    std::vector<McState> states;
};

struct SolverOptions {
    std::size_t node_limit = 1'000'000;
};

struct McSolution {
    std::vector<std::size_t> choice;  // chosen state index per group
    double value = 0.0;
    std::int64_t cost = 0;
    bool optimal = true;
    std::size_t nodes = 0;
};

namespace detail {

constexpr double kBoundSlack = 1e-9;

struct FilteredState {
    std::int64_t cost;
    double value;
    std::uint32_t pattern;
    std::size_t orig;
};

// Keep only states that can appear in the returned solution. Safe drops:
// strictly value-dominated states, and equal-value states that are both no
// cheaper and lexicographically larger than a kept one.
inline std::vector<FilteredState> filter_states(const McGroup& group) {
    std::vector<FilteredState> in;
    in.reserve(group.states.size());
    for (std::size_t i = 0; i < group.states.size(); ++i) {
        const auto& s = group.states[i];
        require(s.cost >= 0, "solve_mckp: negative state cost");
        in.push_back({s.cost, s.value, s.pattern, i});
    }
    std::sort(in.begin(), in.end(), [](const FilteredState& a, const FilteredState& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.pattern < b.pattern;
    });
    std::vector<FilteredState> kept;
    for (const auto& s : in) {
        bool drop = false;
        for (const auto& k : kept) {
            if (k.value > s.value && k.cost <= s.cost) { drop = true; break; }
            if (k.value == s.value && k.cost <= s.cost && k.pattern <= s.pattern) { drop = true; break; }
        }
        if (!drop) kept.push_back(s);
    }
    return kept;
}

struct HullItem {
    std::size_t group;
    std::size_t hull_idx;  // 1-based position inside the group's hull
    std::int64_t dcost;
    double dvalue;
    double ratio;
};

} // namespace detail

// Exact maximizer of sum(value) over one state per group with total cost <= budget.
// Depth-first branch and bound; the bound is the LP relaxation built from each
// group's cost/value convex hull, consumed greedily in ratio order. Among equal
// objective values the lexicographically smallest concatenated flag pattern
// (group order, then pattern bits) is preferred. If the node limit trips, the
// best solution found so far is returned with optimal = false.
inline McSolution solve_mckp(const std::vector<McGroup>& groups, std::int64_t budget,
                             SolverOptions opts = {}) {
    require(budget >= 0, "solve_mckp: negative budget");
    require(!groups.empty(), "solve_mckp: no groups");
    for (const auto& g : groups) require(!g.states.empty(), "solve_mckp: empty group");

    const std::size_t G = groups.size();
    std::vector<std::vector<detail::FilteredState>> st(G);
    for (std::size_t g = 0; g < G; ++g) st[g] = detail::filter_states(groups[g]);

    // Base state = cheapest kept state (the filter leaves exactly one per cost,
    // so min cost is unambiguous). Hull: value must rise with cost, slopes fall.
    std::vector<std::vector<std::size_t>> hull(G);  // indices into st[g]
    std::int64_t base_cost_total = 0;
    double base_value_total = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
        auto& s = st[g];
        std::sort(s.begin(), s.end(), [](const detail::FilteredState& a, const detail::FilteredState& b) {
            if (a.cost != b.cost) return a.cost < b.cost;
            return a.pattern < b.pattern;
        });
        auto& h = hull[g];
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!h.empty() && s[i].value <= s[h.back()].value) continue;
            auto slope = [&](std::size_t a, std::size_t b) {
                return (s[b].value - s[a].value) / static_cast<double>(s[b].cost - s[a].cost);
            };
            while (h.size() >= 2 && slope(h[h.size() - 2], h.back()) <= slope(h.back(), i))
                h.pop_back();
            h.push_back(i);
        }
        base_cost_total += s[h.front()].cost;
        base_value_total += s[h.front()].value;
    }
    require(base_cost_total <= budget, "solve_mckp: minimal-cost assignment exceeds the budget");

    std::vector<detail::HullItem> items;
    for (std::size_t g = 0; g < G; ++g)
        for (std::size_t i = 1; i < hull[g].size(); ++i) {
            const auto& lo = st[g][hull[g][i - 1]];
            const auto& hi = st[g][hull[g][i]];
            const auto dc = hi.cost - lo.cost;
            items.push_back({g, i, dc, hi.value - lo.value, (hi.value - lo.value) / static_cast<double>(dc)});
        }
    std::sort(items.begin(), items.end(), [](const detail::HullItem& a, const detail::HullItem& b) {
        if (a.ratio != b.ratio) return a.ratio > b.ratio;
        if (a.group != b.group) return a.group < b.group;
        return a.hull_idx < b.hull_idx;
    });

    constexpr std::size_t kFree = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> fixed(G, kFree);  // index into st[g]
    std::int64_t fixed_cost = 0, free_base_cost = base_cost_total;
    double fixed_value = 0.0, free_base_value = base_value_total;

    auto canonical_value = [&](const std::vector<std::size_t>& choice) {
        double v = 0.0;
        for (std::size_t g = 0; g < G; ++g) v += st[g][choice[g]].value;
        return v;
    };
    auto total_cost = [&](const std::vector<std::size_t>& choice) {
        std::int64_t c = 0;
        for (std::size_t g = 0; g < G; ++g) c += st[g][choice[g]].cost;
        return c;
    };
    auto lex_less = [&](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
        for (std::size_t g = 0; g < G; ++g) {
            const auto pa = st[g][a[g]].pattern, pb = st[g][b[g]].pattern;
            if (pa != pb) return pa < pb;
        }
        return false;
    };

    std::vector<std::size_t> incumbent(G);
    for (std::size_t g = 0; g < G; ++g) incumbent[g] = hull[g].front();
    double incumbent_value = canonical_value(incumbent);

    std::vector<std::size_t> lp_pos(G);
    std::size_t nodes = 0;
    bool limit_hit = false;

    auto consider = [&](const std::vector<std::size_t>& cand) {
        const double v = canonical_value(cand);
        if (v > incumbent_value || (v == incumbent_value && lex_less(cand, incumbent))) {
            incumbent = cand;
            incumbent_value = v;
        }
    };

    auto dfs = [&](auto&& self) -> void {
        if (++nodes > opts.node_limit) {
            limit_hit = true;
            return;
        }
        std::int64_t R = budget - fixed_cost - free_base_cost;
        if (R < 0) return;

        double bound = fixed_value + free_base_value;
        for (std::size_t g = 0; g < G; ++g) lp_pos[g] = 0;
        std::size_t frac_group = kFree;
        for (const auto& it : items) {
            if (fixed[it.group] != kFree) continue;
            if (it.dcost <= R) {
                R -= it.dcost;
                bound += it.dvalue;
                lp_pos[it.group] = it.hull_idx;
                if (R == 0) break;
            } else {
                bound += it.dvalue * (static_cast<double>(R) / static_cast<double>(it.dcost));
                frac_group = it.group;
                break;
            }
        }
        if (bound < incumbent_value - detail::kBoundSlack) return;

        if (frac_group == kFree) {
            // LP solution is integral: realize it, then keep searching the
            // subtree only for equal-value lexicographic improvements
            std::vector<std::size_t> cand(G);
            for (std::size_t g = 0; g < G; ++g)
                cand[g] = fixed[g] != kFree ? fixed[g] : hull[g][lp_pos[g]];
            consider(cand);
        }

        std::size_t branch = frac_group;
        if (branch == kFree) {
            // plateau search: branch on the first undecided group that still
            // has alternatives
            for (std::size_t g = 0; g < G && branch == kFree; ++g)
                if (fixed[g] == kFree && st[g].size() > 1) branch = g;
            if (branch == kFree) return;  // everything forced, nothing below
        }

        std::vector<std::size_t> order(st[branch].size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& sa = st[branch][a];
            const auto& sb = st[branch][b];
            if (sa.value != sb.value) return sa.value > sb.value;
            if (sa.cost != sb.cost) return sa.cost < sb.cost;
            return sa.pattern < sb.pattern;
        });
        const auto base_idx = hull[branch].front();
        for (auto sidx : order) {
            fixed[branch] = sidx;
            fixed_cost += st[branch][sidx].cost;
            fixed_value += st[branch][sidx].value;
            free_base_cost -= st[branch][base_idx].cost;
            free_base_value -= st[branch][base_idx].value;
            self(self);
            fixed[branch] = kFree;
            fixed_cost -= st[branch][sidx].cost;
            fixed_value -= st[branch][sidx].value;
            free_base_cost += st[branch][base_idx].cost;
            free_base_value += st[branch][base_idx].value;
            if (limit_hit) return;
        }
    };
    dfs(dfs);

    McSolution sol;
    sol.choice.resize(G);
    for (std::size_t g = 0; g < G; ++g) sol.choice[g] = st[g][incumbent[g]].orig;
    sol.value = incumbent_value;
    sol.cost = total_cost(incumbent);
    sol.optimal = !limit_hit;
    sol.nodes = nodes;
    return sol;
}

} // namespace mtal
