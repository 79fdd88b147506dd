#ifndef SDR_GDP_HPP
#define SDR_GDP_HPP

// Disjunctive dispatch model. Every acceptable leaf t of the tree is one
// disjunct: the conjunction of its ancestor split constraints, shifted
// inward by the safety margin alpha. A binary z_t selects the active
// disjunct; inactive ones are relaxed by the smallest valid big-M constants.
//
//   left ancestor  (x_j <= b):  x_j + (M1_j - b + alpha) z_t <= M1_j
//   right ancestor (x_j >  b):  x_j - (b + alpha - M2_j) z_t >= M2_j + gamma
//   sum_t z_t = 1
//
// With z_t = 1 these read x_j <= b - alpha and x_j >= b + alpha + gamma; with
// z_t = 0 they reduce to x_j <= M1_j and x_j >= M2_j + gamma, which hold on
// the whole feature box when M1_j >= x^U_j and M2_j + gamma <= x^L_j.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdr/cart.hpp"
#include "sdr/error.hpp"
#include "sdr/features.hpp"
#include "sdr/lp.hpp"
#include "sdr/net.hpp"

namespace sdr {

inline constexpr double kDefaultGamma = 0.001; // MW

struct PathStep {
    std::size_t node = 0;    // ancestor branch node
    std::size_t feature = 0; // split feature
    double threshold = 0.0;  // split threshold b
};

/// Decision path of one leaf: left-branch ancestors (x <= b) and
/// right-branch ancestors (x > b), root first.
struct LeafPath {
    std::size_t leaf = 0;
    std::vector<PathStep> left;
    std::vector<PathStep> right;

    std::size_t depth() const { return left.size() + right.size(); }

    /// Does x satisfy every ancestor constraint (exact tree semantics)?
    bool admits(std::span<const double> x) const {
        for (const auto& s : left)
            if (!(x[s.feature] <= s.threshold)) return false;
        for (const auto& s : right)
            if (!(x[s.feature] > s.threshold)) return false;
        return true;
    }
};

/// Paths of all leaves of class `cls`, ordered by leaf node id.
inline std::vector<LeafPath> extract_paths(const DecisionTree& tree, int cls) {
    std::vector<LeafPath> out;
    struct Item {
        std::size_t node;
        LeafPath path;
    };
    std::vector<Item> stack;
    stack.push_back({0, {}});
    while (!stack.empty()) {
        auto [i, path] = std::move(stack.back());
        stack.pop_back();
        const auto& nd = tree.nodes[i];
        if (nd.is_leaf()) {
            if (nd.cls == cls) {
                path.leaf = i;
                out.push_back(std::move(path));
            }
            continue;
        }
        LeafPath l = path, r = std::move(path);
        l.left.push_back({i, nd.feature, nd.threshold});
        r.right.push_back({i, nd.feature, nd.threshold});
        stack.push_back({static_cast<std::size_t>(nd.right), std::move(r)});
        stack.push_back({static_cast<std::size_t>(nd.left), std::move(l)});
    }
    std::sort(out.begin(), out.end(), [](const LeafPath& a, const LeafPath& b) { return a.leaf < b.leaf; });
    return out;
}

/// Paths of the acceptable leaves T_A.
inline std::vector<LeafPath> extract_leaf_paths(const DecisionTree& tree) {
    if (tree.nodes.empty()) throw DataError("empty acceptable region: the tree has no nodes");
    auto paths = extract_paths(tree, 1);
    if (paths.empty()) throw DataError("empty acceptable region: the tree has no acceptable leaf");
    return paths;
}

struct BigM {
    std::vector<double> m1; // per feature, relaxes left constraints
    std::vector<double> m2; // per feature, relaxes right constraints
};

/// Smallest constants that keep every relaxed constraint slack on the box
/// [lower, upper]: M1_j = max(x^U_j, left thresholds on j) and
/// M2_j = min(x^L_j, right thresholds on j) - gamma. The thresholds only
/// matter when a split lies outside the physical box.
inline BigM compute_big_m(std::span<const LeafPath> paths, std::span<const double> lower,
                          std::span<const double> upper, double gamma = kDefaultGamma) {
    if (lower.size() != upper.size()) throw DataError("big-M: bound vectors differ in length");
    const std::size_t p = lower.size();
    BigM m;
    m.m1.assign(upper.begin(), upper.end());
    m.m2.assign(lower.begin(), lower.end());
    for (std::size_t j = 0; j < p; ++j)
        if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]))
            throw DataError("big-M: feature " + std::to_string(j) + " is unbounded");
    for (const auto& path : paths) {
        for (const auto& s : path.left) {
            if (s.feature >= p) throw DataError("big-M: path feature out of range");
            m.m1[s.feature] = std::max(m.m1[s.feature], s.threshold);
        }
        for (const auto& s : path.right) {
            if (s.feature >= p) throw DataError("big-M: path feature out of range");
            m.m2[s.feature] = std::min(m.m2[s.feature], s.threshold);
        }
    }
    for (auto& v : m.m2) v -= gamma;
    return m;
}

/// One resolved path constraint on a decision feature, already shifted:
/// x_feature <= bound (upper) or x_feature >= bound (lower, gamma included).
struct RuleBound {
    std::size_t feature = 0;
    bool upper = true;
    double bound = 0.0;
};

/// A surviving disjunct: its leaf and tightest per-feature bounds.
struct Disjunct {
    std::size_t leaf = 0;
    std::vector<RuleBound> rules;

    bool admits(std::span<const double> x, double tol = 0.0) const {
        for (const auto& r : rules)
            if (r.upper ? x[r.feature] > r.bound + tol : x[r.feature] < r.bound - tol) return false;
        return true;
    }
};

/// Big-M form of one rule: x_f + z_coef z <= rhs (upper) or >= rhs (lower).
struct BigMRow {
    std::size_t feature = 0;
    bool upper = true;
    double z_coef = 0.0;
    double rhs = 0.0;

    bool holds(std::span<const double> x, double z, double tol = 0.0) const {
        double a = x[feature] + z_coef * z;
        return upper ? a <= rhs + tol : a >= rhs - tol;
    }
};

inline std::vector<BigMRow> big_m_rows(const Disjunct& d, const BigM& m, double gamma) {
    std::vector<BigMRow> out;
    for (const auto& r : d.rules) {
        if (r.upper) {
            // x <= (b - alpha) z + M1 (1 - z)
            out.push_back({r.feature, true, m.m1[r.feature] - r.bound, m.m1[r.feature]});
        } else {
            // x >= (b + alpha) z + M2 (1 - z) + gamma
            const double shifted = r.bound - gamma;
            out.push_back({r.feature, false, -(shifted - m.m2[r.feature]), m.m2[r.feature] + gamma});
        }
    }
    return out;
}

struct PrunedLeaf {
    std::size_t leaf = 0;
    std::string reason;
};

struct ModelOptions {
    double alpha = 0.0;
    double gamma = kDefaultGamma;
};

/// Shift and deduplicate the path of one leaf. `fixed[j]` is the value of a
/// parameter feature (a load) or NaN for a decision feature. Conditions on
/// parameters are decided here; decision-feature conditions are kept at their
/// tightest value per feature. Returns the pruning reason, if any: a violated
/// parameter condition or an empty range within [lower, upper].
inline std::optional<std::string> resolve_path(const LeafPath& path, std::span<const double> lower,
                                               std::span<const double> upper, std::span<const double> fixed,
                                               const ModelOptions& opt, std::span<const std::string> names,
                                               Disjunct& out) {
    const std::size_t p = lower.size();
    auto label = [&](std::size_t j) { return j < names.size() ? names[j] : "x" + std::to_string(j); };
    std::vector<double> hi(upper.begin(), upper.end()), lo(lower.begin(), lower.end());
    std::vector<char> has_hi(p, 0), has_lo(p, 0);
    for (const auto& s : path.left) {
        const double b = s.threshold - opt.alpha;
        if (!std::isnan(fixed[s.feature])) {
            if (!(fixed[s.feature] <= b))
                return label(s.feature) + " = " + text::format_double(fixed[s.feature]) + " exceeds " +
                       text::format_double(b);
            continue;
        }
        hi[s.feature] = has_hi[s.feature] ? std::min(hi[s.feature], b) : b;
        has_hi[s.feature] = 1;
    }
    for (const auto& s : path.right) {
        const double b = s.threshold + opt.alpha + opt.gamma;
        if (!std::isnan(fixed[s.feature])) {
            if (!(fixed[s.feature] >= b))
                return label(s.feature) + " = " + text::format_double(fixed[s.feature]) + " is below " +
                       text::format_double(b);
            continue;
        }
        lo[s.feature] = has_lo[s.feature] ? std::max(lo[s.feature], b) : b;
        has_lo[s.feature] = 1;
    }
    out.leaf = path.leaf;
    out.rules.clear();
    for (std::size_t j = 0; j < p; ++j) {
        if (!has_hi[j] && !has_lo[j]) continue;
        const double a = std::max(lo[j], lower[j]), b = std::min(hi[j], upper[j]);
        if (a > b)
            return label(j) + " has an empty range [" + text::format_double(a) + ", " + text::format_double(b) +
                   "]";
        if (has_hi[j]) out.rules.push_back({j, true, hi[j]});
        if (has_lo[j]) out.rules.push_back({j, false, lo[j]});
    }
    return std::nullopt;
}

/// The disjunctive MILP for one load realization. `lp` holds the full Big-M
/// model with z relaxed to [0, 1]; `binaries` lists the z variables.
struct DisjunctiveModel {
    LinearProgram lp;
    std::vector<std::size_t> gen_vars;  // p_g
    std::vector<std::size_t> flow_vars; // f_l
    std::vector<std::size_t> binaries;  // z_t, parallel to `disjuncts`
    std::vector<Disjunct> disjuncts;
    std::vector<std::vector<std::size_t>> rule_vars; // model variable of each rule
    std::vector<PrunedLeaf> pruned;
    std::size_t core_rows = 0;          // balance and flow rows come first
    BigM big_m;
    ModelOptions options;
    std::vector<double> load_mw;

    std::size_t leaf_count() const { return disjuncts.size(); }

    /// Plain LP of disjunct k: the core rows, z_k = 1, the other z = 0, and
    /// the path constraints as variable bounds (no big-M).
    LinearProgram leaf_lp(std::size_t k) const {
        LinearProgram out;
        out.cost = lp.cost;
        out.lower = lp.lower;
        out.upper = lp.upper;
        out.var_names = lp.var_names;
        for (std::size_t t = 0; t < binaries.size(); ++t)
            out.lower[binaries[t]] = out.upper[binaries[t]] = t == k ? 1.0 : 0.0;
        out.rows.assign(lp.rows.begin(), lp.rows.begin() + static_cast<std::ptrdiff_t>(core_rows));
        const auto& rules = disjuncts[k].rules;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            const auto v = rule_vars[k][i];
            if (rules[i].upper) out.upper[v] = std::min(out.upper[v], rules[i].bound);
            else out.lower[v] = std::max(out.lower[v], rules[i].bound);
        }
        return out;
    }

    /// Generator setpoints from a solution vector.
    std::vector<double> dispatch(std::span<const double> x) const {
        std::vector<double> p;
        for (auto v : gen_vars) p.push_back(x[v]);
        return p;
    }

    void write(std::ostream& out) const {
        write_lp(out, lp, binaries,
                 "disjunctive dispatch model, alpha " + text::format_double(options.alpha) + " MW, gamma " +
                     text::format_double(options.gamma) + " MW, " + std::to_string(disjuncts.size()) +
                     " leaves, " + std::to_string(pruned.size()) + " pruned");
    }
};

/// Build the disjunctive dispatch model for one load realization.
inline DisjunctiveModel build_model(const Network& net, const PtdfMatrix& ptdf, const DecisionTree& tree,
                                    std::span<const LeafPath> paths, std::span<const double> load,
                                    const ModelOptions& opt) {
    if (!(opt.alpha >= 0.0) || !std::isfinite(opt.alpha)) throw ValidationError("alpha must be >= 0");
    if (!(opt.gamma > 0.0) || !std::isfinite(opt.gamma)) throw ValidationError("gamma must be > 0");
    if (load.size() != net.loads.size()) throw DataError("load realization has the wrong length");
    for (std::size_t d = 0; d < load.size(); ++d) {
        const auto& ld = net.loads[d];
        const double tol = 1e-9 * std::max(1.0, ld.nominal);
        if (!(load[d] >= ld.lower() - tol && load[d] <= ld.upper() + tol))
            throw DataError("load at bus " + std::to_string(ld.bus) + " is outside its band");
    }
    FeatureLayout layout(net);
    if (tree.feature_names != layout.names())
        throw DataError("tree features do not match the network feature layout");

    DisjunctiveModel m;
    m.options = opt;
    m.load_mw.assign(load.begin(), load.end());
    m.big_m = compute_big_m(paths, layout.lower(), layout.upper(), opt.gamma);
    auto& lp = m.lp;

    // Dispatch and flow variables.
    for (std::size_t g = 0; g < net.generators.size(); ++g) {
        const auto& u = net.generators[g];
        m.gen_vars.push_back(lp.add_variable(u.p_min, u.p_max, u.cost, "p" + std::to_string(g)));
    }
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& ln = net.lines[l];
        m.flow_vars.push_back(lp.add_variable(-ln.flow_limit, ln.flow_limit, 0.0, "f" + std::to_string(l)));
    }

    // Balance: sum p = sum load.
    double total_load = 0.0;
    for (double v : load) total_load += v;
    {
        std::vector<LinearTerm> t;
        for (auto v : m.gen_vars) t.push_back({v, 1.0});
        lp.add_row(std::move(t), RowSense::eq, total_load, "balance");
    }
    // DC flows: f_l - sum_g PTDF(l, bus_g) p_g = -sum_d PTDF(l, bus_d) load_d.
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        std::vector<LinearTerm> t{{m.flow_vars[l], 1.0}};
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            double s = ptdf(l, net.bus_index(net.generators[g].bus));
            if (s != 0.0) t.push_back({m.gen_vars[g], -s});
        }
        double offset = 0.0;
        for (std::size_t d = 0; d < net.loads.size(); ++d) offset -= ptdf(l, net.bus_index(net.loads[d].bus)) * load[d];
        lp.add_row(std::move(t), RowSense::eq, offset, "flow" + std::to_string(l));
    }
    m.core_rows = lp.rows.size();

    // Surviving disjuncts; load features are parameters.
    std::vector<double> fixed(layout.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 0; j < layout.size(); ++j)
        if (layout.ref(j).kind == FeatureKind::load) fixed[j] = load[layout.ref(j).index];
    for (const auto& path : paths) {
        Disjunct d;
        if (auto why = resolve_path(path, layout.lower(), layout.upper(), fixed, opt, tree.feature_names, d)) {
            m.pruned.push_back({path.leaf, *why});
            continue;
        }
        m.disjuncts.push_back(std::move(d));
    }
    if (m.disjuncts.empty())
        throw DataError("no admissible leaf for this realization (" + std::to_string(m.pruned.size()) +
                        " leaves pruned)");

    std::vector<LinearTerm> pick;
    for (std::size_t k = 0; k < m.disjuncts.size(); ++k) {
        const auto& d = m.disjuncts[k];
        auto z = lp.add_variable(0.0, 1.0, 0.0, "z" + std::to_string(d.leaf));
        m.binaries.push_back(z);
        pick.push_back({z, 1.0});
        std::vector<std::size_t> vars;
        for (const auto& row : big_m_rows(d, m.big_m, opt.gamma)) {
            const auto& ref = layout.ref(row.feature);
            auto x = ref.kind == FeatureKind::generator ? m.gen_vars[ref.index] : m.flow_vars[ref.index];
            vars.push_back(x);
            lp.add_row({{x, 1.0}, {z, row.z_coef}}, row.upper ? RowSense::le : RowSense::ge, row.rhs,
                       "t" + std::to_string(d.leaf) + "_" + tree.feature_names[row.feature] +
                           (row.upper ? "_le" : "_ge"));
        }
        m.rule_vars.push_back(std::move(vars));
    }
    lp.add_row(std::move(pick), RowSense::eq, 1.0, "select");
    return m;
}

/// Convenience overload computing the PTDF and the leaf paths.
inline DisjunctiveModel build_model(const Network& net, const DecisionTree& tree, std::span<const double> load,
                                    const ModelOptions& opt) {
    auto ptdf = build_ptdf(net);
    auto paths = extract_leaf_paths(tree);
    return build_model(net, ptdf, tree, paths, load, opt);
}

} // namespace sdr

#endif
