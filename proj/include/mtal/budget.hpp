#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "mtal/blp.hpp"
#include "mtal/common.hpp"
#include "mtal/strategies.hpp"

namespace mtal {

struct ExampleSize {
    std::int64_t m = 1;   // token count
    std::int64_t nt = 0;  // entity count
};

struct CostParams {
    std::int64_t tp = 1;  // per-token annotation cost
    std::int64_t ts = 3;  // sentence-level annotation cost
};

// cost_sf: annotate the sequence task; cost_id: annotate the sentence task;
// jcost: annotate both, paying the shared token-reading term m once.
struct AnnotationCosts {
    std::vector<std::int64_t> cost_sf;
    std::vector<std::int64_t> cost_id;
    std::vector<std::int64_t> jcost;

    std::size_t size() const { return jcost.size(); }
};

inline AnnotationCosts compute_costs(const std::vector<ExampleSize>& sizes, CostParams params = {}) {
    require(params.tp >= 0 && params.ts >= 0, "compute_costs: negative cost parameter");
    AnnotationCosts out;
    out.cost_sf.reserve(sizes.size());
    out.cost_id.reserve(sizes.size());
    out.jcost.reserve(sizes.size());
    for (const auto& s : sizes) {
        require(s.m >= 1, "compute_costs: token count must be >= 1");
        require(s.nt >= 0, "compute_costs: negative entity count");
        const auto sf = s.m + params.tp * s.nt;
        const auto id = s.m + params.ts;
        out.cost_sf.push_back(sf);
        out.cost_id.push_back(id);
        out.jcost.push_back(sf + id - s.m);
    }
    return out;
}

// Scan in ascending confidence (ties by id); take an example jointly if its
// jcost still fits, otherwise skip it and keep scanning.
inline SelectionResult greedy_budgeted_select(const std::vector<double>& confidence,
                                              const std::vector<std::int64_t>& ids,
                                              const std::vector<std::int64_t>& jcost,
                                              std::int64_t budget, std::size_t tasks = 2) {
    require(budget >= 0, "greedy_budgeted_select: negative budget");
    require(confidence.size() == ids.size() && ids.size() == jcost.size(),
            "greedy_budgeted_select: input size mismatch");
    std::vector<std::size_t> idx(ids.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (confidence[a] != confidence[b]) return confidence[a] < confidence[b];
        return ids[a] < ids[b];
    });
    std::vector<std::int64_t> picked;
    std::int64_t remaining = budget, spent = 0;
    for (auto i : idx) {
        require(jcost[i] >= 0, "greedy_budgeted_select: negative cost");
        if (jcost[i] <= remaining) {
            picked.push_back(ids[i]);
            remaining -= jcost[i];
            spent += jcost[i];
        }
    }
    auto res = make_full_selection(std::move(picked), tasks, "greedy_budget");
    res.total_cost = spent;
    return res;
}

enum class Formulation { udjs, eqb_djs, joint, stcs };

inline const char* to_string(Formulation f) {
    switch (f) {
        case Formulation::udjs: return "UDJS";
        case Formulation::eqb_djs: return "EQB-DJS";
        case Formulation::joint: return "JOINT";
        case Formulation::stcs: return "STCS";
    }
    return "?";
}

struct BudgetProgram {
    Formulation formulation = Formulation::joint;
    std::size_t stcs_task = 0;
    std::vector<std::int64_t> ids;
    std::vector<std::vector<double>> uncertainty;  // per example, per task
    AnnotationCosts costs;
    std::int64_t budget = 500;

    void validate() const {
        require(!ids.empty(), "BudgetProgram: no examples");
        require(budget >= 0, "BudgetProgram: negative budget");
        require(uncertainty.size() == ids.size(), "BudgetProgram: uncertainty rows != ids");
        const std::size_t t = uncertainty.front().size();
        require(t >= 1, "BudgetProgram: need at least one task");
        for (const auto& row : uncertainty) {
            require(row.size() == t, "BudgetProgram: ragged uncertainty rows");
            for (double u : row) require(u >= 0.0 && u <= 1.0, "BudgetProgram: uncertainty outside [0,1]");
        }
        require(costs.size() == ids.size(), "BudgetProgram: costs != ids");
        if (formulation == Formulation::stcs) require(stcs_task < t, "BudgetProgram: STCS task out of range");
    }
};

struct BudgetSolution {
    std::vector<std::vector<bool>> x;  // per example, per task
    std::vector<bool> y;               // joint-annotation indicator
    double objective = 0.0;
    std::int64_t total_cost = 0;
    bool optimal = true;

    std::vector<std::int64_t> selected_ids(const std::vector<std::int64_t>& ids) const {
        std::vector<std::int64_t> out;
        for (std::size_t i = 0; i < ids.size(); ++i) {
            bool any = false;
            for (bool f : x[i]) any = any || f;
            if (any) out.push_back(ids[i]);
        }
        return out;
    }
};

// All-or-nothing annotation: maximize sum(u * Y) subject to sum(jcost * Y) <= B.
inline BudgetSolution solve_joint_blp(const std::vector<double>& uncertainty,
                                      const std::vector<std::int64_t>& jcost, std::int64_t budget,
                                      std::size_t tasks = 2, SolverOptions opts = {}) {
    require(uncertainty.size() == jcost.size(), "solve_joint_blp: input size mismatch");
    require(!uncertainty.empty(), "solve_joint_blp: no examples");
    for (double u : uncertainty) require(u >= 0.0 && u <= 1.0, "solve_joint_blp: uncertainty outside [0,1]");

    std::vector<McGroup> groups(uncertainty.size());
    for (std::size_t i = 0; i < uncertainty.size(); ++i)
        groups[i].states = {{0, 0.0, 0}, {jcost[i], uncertainty[i], 1}};

    auto mc = solve_mckp(groups, budget, opts);

    BudgetSolution sol;
    sol.x.resize(uncertainty.size());
    sol.y.resize(uncertainty.size());
    for (std::size_t i = 0; i < uncertainty.size(); ++i) {
        const bool take = groups[i].states[mc.choice[i]].pattern == 1;
        sol.y[i] = take;
        sol.x[i].assign(tasks, take);
        if (take) sol.total_cost += jcost[i];
    }
    sol.objective = mc.value;
    sol.optimal = mc.optimal;
    return sol;
}

// Per-task flags with a shared-budget row. An example annotated on every task
// switches to the joint cost (the token term is paid once), which the solver
// expresses by enumerating each example's flag patterns with their true cost.
// Y is implied: it is 1 exactly when all task flags are 1.
inline BudgetSolution solve_udjs_blp(const std::vector<std::vector<double>>& uncertainty,
                                     const std::vector<std::vector<std::int64_t>>& task_cost,
                                     const std::vector<std::int64_t>& m, std::int64_t budget,
                                     SolverOptions opts = {}) {
    require(!uncertainty.empty(), "solve_udjs_blp: no examples");
    const std::size_t n = uncertainty.size();
    const std::size_t t = uncertainty.front().size();
    require(t >= 2, "solve_udjs_blp: need at least two tasks");
    require(t <= 16, "solve_udjs_blp: too many tasks for pattern enumeration");
    require(task_cost.size() == n && m.size() == n, "solve_udjs_blp: input size mismatch");

    std::vector<McGroup> groups(n);
    const std::uint32_t full = (1u << t) - 1u;
    for (std::size_t i = 0; i < n; ++i) {
        require(uncertainty[i].size() == t && task_cost[i].size() == t,
                "solve_udjs_blp: ragged rows");
        require(m[i] >= 0, "solve_udjs_blp: negative token count");
        auto& states = groups[i].states;
        for (std::uint32_t sub = 0; sub <= full; ++sub) {
            std::int64_t cost = 0;
            double value = 0.0;
            std::uint32_t pattern = 0;
            for (std::size_t tau = 0; tau < t; ++tau) {
                if (!(sub >> tau & 1u)) continue;
                cost += task_cost[i][tau];
                value += uncertainty[i][tau];
                pattern |= 1u << (t - 1 - tau);  // task 0 in the high bit
            }
            if (sub == full) cost -= static_cast<std::int64_t>(t - 1) * m[i];
            require(cost >= 0, "solve_udjs_blp: joint discount drives a cost negative");
            states.push_back({cost, value, pattern});
        }
    }

    auto mc = solve_mckp(groups, budget, opts);

    BudgetSolution sol;
    sol.x.resize(n);
    sol.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto pattern = groups[i].states[mc.choice[i]].pattern;
        sol.x[i].resize(t);
        bool all = true;
        for (std::size_t tau = 0; tau < t; ++tau) {
            sol.x[i][tau] = (pattern >> (t - 1 - tau)) & 1u;
            all = all && sol.x[i][tau];
        }
        sol.y[i] = all;
        sol.total_cost += groups[i].states[mc.choice[i]].cost;
    }
    sol.objective = mc.value;
    sol.optimal = mc.optimal;
    return sol;
}

namespace detail {

// Single-task knapsack over the not-yet-annotated examples. Marginal costs:
// completing an example the other task already covers costs cost_t - m.
inline bool eqb_round(const std::vector<double>& u, const std::vector<std::int64_t>& cost,
                      const std::vector<std::int64_t>& m, const std::vector<bool>& other,
                      std::vector<bool>& mine, std::int64_t round_budget, SolverOptions opts,
                      bool& optimal) {
    std::vector<std::size_t> cand;
    for (std::size_t i = 0; i < mine.size(); ++i)
        if (!mine[i]) cand.push_back(i);
    if (cand.empty() || round_budget <= 0) return false;

    std::vector<McGroup> groups(cand.size());
    for (std::size_t c = 0; c < cand.size(); ++c) {
        const auto i = cand[c];
        const auto marginal = cost[i] - (other[i] ? m[i] : 0);
        require(marginal >= 0, "eqb_djs_select: negative marginal cost");
        groups[c].states = {{0, 0.0, 0}, {marginal, u[i], 1}};
    }
    auto mc = solve_mckp(groups, round_budget, opts);
    optimal = optimal && mc.optimal;

    bool any = false;
    for (std::size_t c = 0; c < cand.size(); ++c)
        if (groups[c].states[mc.choice[c]].pattern == 1) {
            mine[cand[c]] = true;
            any = true;
        }
    return any;
}

} // namespace detail

// Equal budget split: both tasks first solve independent knapsacks at half the
// budget and full single-task costs. Overlapping picks then pay the joint cost,
// and the freed amount funds re-solve rounds over the residual pools (task 0
// gets half the remainder, task 1 whatever is left, completions priced at
// cost - m) until a round adds nothing, the budget is gone, or the cap trips.
inline BudgetSolution eqb_djs_select(const std::vector<std::vector<double>>& uncertainty,
                                     const AnnotationCosts& costs,
                                     const std::vector<std::int64_t>& m, std::int64_t budget,
                                     std::size_t round_cap = 10, SolverOptions opts = {}) {
    require(!uncertainty.empty(), "eqb_djs_select: no examples");
    const std::size_t n = uncertainty.size();
    require(costs.size() == n && m.size() == n, "eqb_djs_select: input size mismatch");
    for (const auto& row : uncertainty)
        require(row.size() == 2, "eqb_djs_select: defined for exactly two tasks");
    require(budget >= 0, "eqb_djs_select: negative budget");

    std::vector<double> u0(n), u1(n);
    for (std::size_t i = 0; i < n; ++i) {
        u0[i] = uncertainty[i][0];
        u1[i] = uncertainty[i][1];
    }

    std::vector<bool> x0(n, false), x1(n, false);
    bool optimal = true;
    auto spent = [&]() {
        std::int64_t s = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (x0[i]) s += costs.cost_sf[i];
            if (x1[i]) s += costs.cost_id[i];
            if (x0[i] && x1[i]) s -= m[i];
        }
        return s;
    };

    const std::vector<bool> nobody(n, false);
    detail::eqb_round(u0, costs.cost_sf, m, nobody, x0, budget / 2, opts, optimal);
    detail::eqb_round(u1, costs.cost_id, m, nobody, x1, budget / 2, opts, optimal);

    bool capped = false;
    for (std::size_t round = 0;; ++round) {
        const std::int64_t remaining = budget - spent();
        if (remaining <= 0) break;
        if (round == round_cap) {
            capped = true;
            break;
        }
        bool any = detail::eqb_round(u0, costs.cost_sf, m, x1, x0, remaining / 2, opts, optimal);
        any = detail::eqb_round(u1, costs.cost_id, m, x0, x1, budget - spent(), opts, optimal) || any;
        if (!any) break;
    }
    optimal = optimal && !capped;

    BudgetSolution sol;
    sol.x.resize(n);
    sol.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        sol.x[i] = {x0[i], x1[i]};
        sol.y[i] = x0[i] && x1[i];
        if (x0[i]) sol.objective += u0[i];
        if (x1[i]) sol.objective += u1[i];
    }
    sol.total_cost = spent();
    sol.optimal = optimal;
    return sol;
}

// One task's uncertainty drives the objective; costs stay joint.
inline BudgetSolution solve_stcs_blp(const std::vector<std::vector<double>>& uncertainty,
                                     std::size_t task, const std::vector<std::int64_t>& jcost,
                                     std::int64_t budget, SolverOptions opts = {}) {
    require(!uncertainty.empty(), "solve_stcs_blp: no examples");
    const std::size_t t = uncertainty.front().size();
    require(task < t, "solve_stcs_blp: task out of range");
    std::vector<double> u(uncertainty.size());
    for (std::size_t i = 0; i < uncertainty.size(); ++i) {
        require(uncertainty[i].size() == t, "solve_stcs_blp: ragged rows");
        u[i] = uncertainty[i][task];
    }
    return solve_joint_blp(u, jcost, budget, t, opts);
}

inline BudgetSolution solve_budget_program(const BudgetProgram& program, SolverOptions opts = {}) {
    program.validate();
    const std::size_t n = program.ids.size();
    std::vector<std::int64_t> m(n);
    for (std::size_t i = 0; i < n; ++i)
        m[i] = program.costs.cost_sf[i] + program.costs.cost_id[i] - program.costs.jcost[i];

    switch (program.formulation) {
        case Formulation::joint: {
            const std::size_t t = program.uncertainty.front().size();
            std::vector<double> u(n);
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (double v : program.uncertainty[i]) acc += v;
                u[i] = acc / static_cast<double>(t);
            }
            return solve_joint_blp(u, program.costs.jcost, program.budget, t, opts);
        }
        case Formulation::stcs:
            return solve_stcs_blp(program.uncertainty, program.stcs_task, program.costs.jcost,
                                  program.budget, opts);
        case Formulation::udjs: {
            std::vector<std::vector<std::int64_t>> task_cost(n);
            for (std::size_t i = 0; i < n; ++i)
                task_cost[i] = {program.costs.cost_sf[i], program.costs.cost_id[i]};
            for (const auto& row : program.uncertainty)
                require(row.size() == 2, "solve_budget_program: UDJS costs cover two tasks");
            return solve_udjs_blp(program.uncertainty, task_cost, m, program.budget, opts);
        }
        case Formulation::eqb_djs:
            return eqb_djs_select(program.uncertainty, program.costs, m, program.budget, 10, opts);
    }
    throw unsupported_error("solve_budget_program: unknown formulation");
}

} // namespace mtal
