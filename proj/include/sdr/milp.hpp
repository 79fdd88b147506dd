#ifndef SDR_MILP_HPP
#define SDR_MILP_HPP

// Two exact solvers for the disjunctive model. branch_and_bound searches
// over the z selectors with the Big-M LP relaxation as bound;
// enumerate_leaves solves each leaf's plain LP and keeps the cheapest.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <queue>
#include <vector>

#include "sdr/gdp.hpp"
#include "sdr/simplex.hpp"

namespace sdr {

inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kOptimalityGap = 1e-9; // $/h, absolute

enum class MilpStatus { optimal, infeasible };

inline const char* to_string(MilpStatus s) { return s == MilpStatus::optimal ? "optimal" : "infeasible"; }

struct MilpResult {
    MilpStatus status = MilpStatus::infeasible;
    double objective = std::numeric_limits<double>::quiet_NaN(); // $/h
    std::vector<double> x;                                       // full model assignment
    std::optional<std::size_t> disjunct;                         // position in model.disjuncts
    std::optional<std::size_t> leaf;                             // tree node id of the chosen leaf
    double root_bound = std::numeric_limits<double>::quiet_NaN();
    std::size_t nodes = 0;        // LPs solved
    double wall_seconds = 0.0;

    bool optimal() const { return status == MilpStatus::optimal; }
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline void set_incumbent(MilpResult& r, const DisjunctiveModel& m, std::size_t k, LpResult&& lp) {
    r.status = MilpStatus::optimal;
    r.objective = lp.objective;
    r.x = std::move(lp.x);
    r.disjunct = k;
    r.leaf = m.disjuncts[k].leaf;
}

} // namespace detail

/// Best-bound-first branch and bound over the selectors. A node fixes some
/// z to 0 and at most one z to 1; fixing z_t = 1 forces the rest to 0 and the
/// node becomes the plain LP of leaf t. Branching picks the fractional z with
/// the largest relaxation value.
inline MilpResult branch_and_bound(const DisjunctiveModel& model, const SimplexOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t T = model.binaries.size();
    MilpResult best;
    if (T == 0) throw DataError("branch_and_bound: the model has no leaves");

    struct Node {
        double bound;
        std::size_t seq;              // FIFO among equal bounds
        std::vector<char> fixed_zero; // per disjunct
    };
    auto worse = [](const Node& a, const Node& b) {
        return a.bound != b.bound ? a.bound > b.bound : a.seq > b.seq;
    };
    std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);
    std::size_t seq = 0;

    auto solve_relaxation = [&](const std::vector<char>& zero) {
        LinearProgram lp = model.lp;
        for (std::size_t t = 0; t < T; ++t)
            if (zero[t]) lp.upper[model.binaries[t]] = 0.0;
        ++best.nodes;
        return simplex_solve(lp, opt);
    };
    auto solve_leaf = [&](std::size_t k) {
        ++best.nodes;
        return simplex_solve(model.leaf_lp(k), opt);
    };
    auto cutoff = [&](double bound) { return best.optimal() && bound >= best.objective - kOptimalityGap; };

    // Process one relaxation: prune or branch on the largest free z. The
    // z_t = 1 child is a leaf LP and is solved at once; the z_t = 0 child is
    // queued with the parent's bound. An integral relaxation is handled the
    // same way, so its exact point comes from the leaf LP.
    auto process = [&](std::vector<char> zero, LpResult&& rel) {
        if (rel.status != LpStatus::optimal || cutoff(rel.objective)) return;
        std::optional<std::size_t> pick;
        for (std::size_t t = 0; t < T; ++t) {
            if (zero[t]) continue;
            double z = rel.x[model.binaries[t]];
            if (z > kIntegralityTol && (!pick || z > rel.x[model.binaries[*pick]])) pick = t;
        }
        if (!pick) return; // unreachable while sum z = 1 holds
        const std::size_t t = *pick;
        auto leaf = solve_leaf(t);
        if (leaf.status == LpStatus::optimal && !cutoff(leaf.objective))
            detail::set_incumbent(best, model, t, std::move(leaf));
        zero[t] = 1;
        std::size_t free = 0;
        for (char c : zero) free += !c;
        if (free) open.push({rel.objective, seq++, std::move(zero)});
    };

    std::vector<char> root(T, 0);
    auto rel = solve_relaxation(root);
    if (rel.status == LpStatus::optimal) best.root_bound = rel.objective;
    process(root, std::move(rel));
    while (!open.empty()) {
        Node n = open.top();
        open.pop();
        if (cutoff(n.bound)) continue;
        process(n.fixed_zero, solve_relaxation(n.fixed_zero));
    }
    best.wall_seconds = detail::seconds_since(t0);
    return best;
}

/// One plain LP per surviving leaf; the cheapest feasible one wins (ties to
/// the earlier leaf).
inline MilpResult enumerate_leaves(const DisjunctiveModel& model, const SimplexOptions& opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    MilpResult best;
    for (std::size_t k = 0; k < model.disjuncts.size(); ++k) {
        auto res = simplex_solve(model.leaf_lp(k), opt);
        ++best.nodes;
        if (res.status != LpStatus::optimal) continue;
        if (!best.optimal() || res.objective < best.objective) detail::set_incumbent(best, model, k, std::move(res));
    }
    best.wall_seconds = detail::seconds_since(t0);
    return best;
}

} // namespace sdr

#endif
