#ifndef SDR_SCOPF_HPP
#define SDR_SCOPF_HPP

// Corrective DC security-constrained OPF: minimize generation cost over a
// base dispatch p and one corrective dispatch p + d^c per contingency, with
// |d^c_g| within the unit's corrective range, sum d^c = 0, and all base and
// post-outage flows within limits.
//
// Contingency blocks are added lazily. The LP starts with the base case
// only; after each solve every outage is checked with the security labeler
// and the blocks of the failing ones are added. The loop stops when the base
// dispatch passes all checks. That dispatch is then optimal for the full
// problem: it is optimal for a relaxation and feasible for every block.

#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/label.hpp"
#include "sdr/lp.hpp"
#include "sdr/simplex.hpp"

namespace sdr {

struct ScopfOptions {
    bool lazy = true;          // false: every contingency block from the start
    std::size_t max_rounds = 100;
    SimplexOptions simplex{};
};

struct ScopfResult {
    LpStatus status = LpStatus::infeasible;
    double objective = std::numeric_limits<double>::quiet_NaN(); // $/h
    std::vector<double> base;                  // p_g, MW
    std::vector<std::vector<double>> corrective; // p_g + d^c_g per contingency position
    std::vector<std::size_t> modeled;          // contingency positions with an explicit block
    std::size_t rounds = 0;

    bool optimal() const { return status == LpStatus::optimal; }
};

namespace detail {

/// Rows bounding a flow expression sum_k coef_k x_k + offset to [-limit, limit].
inline void add_flow_rows(LinearProgram& lp, std::vector<LinearTerm> terms, double offset, double limit,
                          const std::string& name) {
    lp.add_row(terms, RowSense::le, limit - offset, name + "_max");
    lp.add_row(std::move(terms), RowSense::ge, -limit - offset, name + "_min");
}

inline LinearProgram scopf_lp(const SecurityAssessor& sa, std::span<const double> load,
                              std::span<const std::size_t> blocks, std::vector<std::vector<std::size_t>>& dvars) {
    const Network& net = sa.network();
    const std::size_t ng = net.generators.size();
    LinearProgram lp;
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& u = net.generators[g];
        lp.add_variable(u.p_min, u.p_max, u.cost, "p" + std::to_string(g));
    }
    double total = 0.0;
    for (double v : load) total += v;
    std::vector<LinearTerm> bal;
    for (std::size_t g = 0; g < ng; ++g) bal.push_back({g, 1.0});
    lp.add_row(bal, RowSense::eq, total, "balance");

    std::vector<double> load_inj(net.bus_count(), 0.0);
    for (std::size_t d = 0; d < net.loads.size(); ++d) load_inj[net.bus_index(net.loads[d].bus)] -= load[d];

    const auto& base = sa.base_ptdf();
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        std::vector<LinearTerm> t;
        for (std::size_t g = 0; g < ng; ++g) {
            double s = base(l, net.bus_index(net.generators[g].bus));
            if (s != 0.0) t.push_back({g, s});
        }
        double offset = 0.0;
        for (std::size_t b = 0; b < net.bus_count(); ++b) offset += base(l, b) * load_inj[b];
        add_flow_rows(lp, std::move(t), offset, net.lines[l].flow_limit, "f" + net.lines[l].name());
    }

    dvars.clear();
    for (auto c : blocks) {
        const auto& ptdf = sa.outage_ptdf(c);
        const auto& lines = sa.surviving_lines(c);
        const std::string tag = "c" + net.lines[sa.contingencies().lines[c]].name();
        std::vector<std::size_t> d;
        for (std::size_t g = 0; g < ng; ++g) {
            const auto& u = net.generators[g];
            d.push_back(lp.add_variable(-u.corrective_range, u.corrective_range, 0.0,
                                        tag + "_d" + std::to_string(g)));
        }
        std::vector<LinearTerm> sum;
        for (auto v : d) sum.push_back({v, 1.0});
        lp.add_row(std::move(sum), RowSense::eq, 0.0, tag + "_balance");
        for (std::size_t g = 0; g < ng; ++g) {
            const auto& u = net.generators[g];
            lp.add_row({{g, 1.0}, {d[g], 1.0}}, RowSense::le, u.p_max, tag + "_pmax" + std::to_string(g));
            lp.add_row({{g, 1.0}, {d[g], 1.0}}, RowSense::ge, u.p_min, tag + "_pmin" + std::to_string(g));
        }
        for (std::size_t r = 0; r < lines.size(); ++r) {
            std::vector<LinearTerm> t;
            for (std::size_t g = 0; g < ng; ++g) {
                double s = ptdf(r, net.bus_index(net.generators[g].bus));
                if (s == 0.0) continue;
                t.push_back({g, s});
                t.push_back({d[g], s});
            }
            double offset = 0.0;
            for (std::size_t b = 0; b < net.bus_count(); ++b) offset += ptdf(r, b) * load_inj[b];
            add_flow_rows(lp, std::move(t), offset, net.lines[lines[r]].flow_limit,
                          tag + "_f" + net.lines[lines[r]].name());
        }
        dvars.push_back(std::move(d));
    }
    return lp;
}

} // namespace detail

/// Solve the corrective SCOPF for one load realization over the assessor's
/// contingency set.
inline ScopfResult solve_scopf(const SecurityAssessor& sa, std::span<const double> load,
                               const ScopfOptions& opt = {}) {
    const Network& net = sa.network();
    if (load.size() != net.loads.size()) throw DataError("load realization has the wrong length");
    const std::size_t nc = sa.contingencies().lines.size(), ng = net.generators.size();
    ScopfResult out;
    std::vector<char> in_model(nc, 0);
    if (!opt.lazy) {
        for (std::size_t c = 0; c < nc; ++c) {
            in_model[c] = 1;
            out.modeled.push_back(c);
        }
    }
    for (;;) {
        if (out.rounds++ >= opt.max_rounds)
            throw SolverError("SCOPF did not converge in " + std::to_string(opt.max_rounds) + " rounds");
        std::vector<std::vector<std::size_t>> dvars;
        auto lp = detail::scopf_lp(sa, load, out.modeled, dvars);
        LpResult res;
        try {
            res = simplex_solve(lp, opt.simplex);
        } catch (const SolverError& e) {
            throw SolverError(std::string("SCOPF LP: ") + e.what());
        }
        if (res.status != LpStatus::optimal) {
            out.status = res.status;
            return out;
        }
        std::vector<double> p(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(ng));

        // Check every outage; corrective dispatches of unmodeled blocks come
        // from the labeler.
        std::vector<std::vector<double>> corrective(nc);
        for (std::size_t k = 0; k < out.modeled.size(); ++k) {
            auto& v = corrective[out.modeled[k]];
            for (std::size_t g = 0; g < ng; ++g) v.push_back(p[g] + res.x[dvars[k][g]]);
        }
        std::vector<std::size_t> missing;
        for (std::size_t c = 0; c < nc; ++c) {
            if (in_model[c]) continue;
            auto d = sa.corrective_redispatch(c, p, load);
            if (!d) {
                missing.push_back(c);
                continue;
            }
            for (std::size_t g = 0; g < ng; ++g) corrective[c].push_back(p[g] + (*d)[g]);
        }
        if (missing.empty()) {
            out.status = LpStatus::optimal;
            out.objective = res.objective;
            out.base = std::move(p);
            out.corrective = std::move(corrective);
            return out;
        }
        for (auto c : missing) {
            in_model[c] = 1;
            out.modeled.push_back(c);
        }
    }
}

/// Results CSV: realization, status, objective, base dispatch p0..p{G-1}.
inline void write_scopf_csv(std::ostream& out, std::span<const ScopfResult> results, std::size_t generators) {
    out << "realization,status,objective";
    for (std::size_t g = 0; g < generators; ++g) out << ",p" << g;
    out << "\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        out << i << "," << to_string(r.status) << "," << (r.optimal() ? text::format_double(r.objective) : "");
        for (std::size_t g = 0; g < generators; ++g)
            out << "," << (r.optimal() ? text::format_double(r.base[g]) : "");
        out << "\n";
    }
}

} // namespace sdr

#endif
