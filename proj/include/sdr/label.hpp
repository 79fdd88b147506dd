#ifndef SDR_LABEL_HPP
#define SDR_LABEL_HPP

// N-1 security labels. A point is acceptable when the base case respects
// every line limit and, for each non-bridge line outage, some balanced
// corrective redispatch within each unit's corrective range brings every
// post-outage flow back within limits without shedding load.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/mc.hpp"
#include "sdr/net.hpp"
#include "sdr/parallel.hpp"
#include "sdr/simplex.hpp"

namespace sdr {

enum class Label : int { unacceptable = 0, acceptable = 1 };

struct ContingencySet {
    std::vector<std::size_t> lines; // indices into Network::lines
};

/// Every line except bridges (whose outage would island part of the grid).
inline ContingencySet build_contingency_set(const Network& net) {
    std::vector<bool> bridge(net.lines.size(), false);
    for (auto b : find_bridges(net)) bridge[b] = true;
    ContingencySet set;
    for (std::size_t l = 0; l < net.lines.size(); ++l)
        if (!bridge[l]) set.lines.push_back(l);
    return set;
}

struct LabeledSample {
    Label label = Label::acceptable;
    bool base_violation = false;              // failed before any outage
    std::optional<std::size_t> failing_line;  // first outage without a remedy

    /// "" when acceptable, "base" for a pre-fault overload, else the line name.
    std::string failing_contingency(const Network& net) const {
        if (base_violation) return "base";
        if (failing_line) return net.lines[*failing_line].name();
        return {};
    }
};

/// Tolerance on the elastic slack sum, MW.
inline constexpr double kShedTolerance = 1e-6;

/// Limit tolerance for labeling, MW. Dispatches that come out of an LP sit
/// on binding limits up to solver round-off; they must not be rejected for it.
inline constexpr double kLimitTolerance = 1e-6;

/// Precomputed base and per-outage PTDFs; immutable and shareable.
class SecurityAssessor {
public:
    SecurityAssessor(const Network& net, ContingencySet contingencies)
        : net_(&net), base_(build_ptdf(net)), set_(std::move(contingencies)) {
        for (auto l : set_.lines) {
            auto reduced = net.without_line(l);
            outage_.push_back(build_ptdf(reduced));
            std::vector<std::size_t> map;
            for (std::size_t k = 0; k < net.lines.size(); ++k)
                if (k != l) map.push_back(k);
            surviving_.push_back(std::move(map));
        }
    }

    explicit SecurityAssessor(const Network& net) : SecurityAssessor(net, build_contingency_set(net)) {}

    const Network& network() const { return *net_; }
    const PtdfMatrix& base_ptdf() const { return base_; }
    const ContingencySet& contingencies() const { return set_; }

    /// PTDF of the network with contingency `c` (position in the set) removed;
    /// row r corresponds to original line surviving_lines(c)[r].
    const PtdfMatrix& outage_ptdf(std::size_t c) const { return outage_[c]; }
    const std::vector<std::size_t>& surviving_lines(std::size_t c) const { return surviving_[c]; }

    std::size_t position_of(std::size_t line) const {
        auto it = std::find(set_.lines.begin(), set_.lines.end(), line);
        if (it == set_.lines.end())
            throw DataError("line " + net_->lines[line].name() + " is not an eligible outage");
        return static_cast<std::size_t>(it - set_.lines.begin());
    }

    /// Is there a corrective redispatch for outage position `c`?
    bool contingency_feasible(std::size_t c, std::span<const double> gen, std::span<const double> load) const {
        return corrective_redispatch(c, gen, load).has_value();
    }

    /// A balanced redispatch (one entry per generator) that clears every
    /// overload after outage position `c`; all zero when none is needed;
    /// nullopt when no redispatch within the corrective ranges suffices.
    std::optional<std::vector<double>> corrective_redispatch(std::size_t c, std::span<const double> gen,
                                                             std::span<const double> load) const {
        const Network& net = *net_;
        const PtdfMatrix& ptdf = outage_[c];
        const auto& lines = surviving_[c];
        auto inj = bus_injections(net, gen, load);
        auto flow0 = dc_flows(ptdf, inj);

        const std::size_t ng = net.generators.size();
        std::vector<double> lo(ng), hi(ng);
        for (std::size_t g = 0; g < ng; ++g) {
            const auto& u = net.generators[g];
            lo[g] = std::max(-u.corrective_range, u.p_min - gen[g]);
            hi[g] = std::min(u.corrective_range, u.p_max - gen[g]);
            // Round-off may leave a dispatch a hair outside its box.
            if (lo[g] > 0.0) lo[g] = 0.0;
            if (hi[g] < 0.0) hi[g] = 0.0;
        }

        // Fast path: no redispatch needed.
        bool clean = true;
        for (std::size_t r = 0; r < lines.size() && clean; ++r)
            clean = std::abs(flow0[r]) <= net.lines[lines[r]].flow_limit + kLimitTolerance;
        if (clean) return std::vector<double>(ng, 0.0);

        // Elastic LP: min sum of overload slacks over the corrective box.
        // Only lines that some redispatch in the box could overload get rows.
        LinearProgram lp;
        for (std::size_t g = 0; g < ng; ++g) lp.add_variable(lo[g], hi[g], 0.0);
        std::vector<LinearTerm> balance;
        for (std::size_t g = 0; g < ng; ++g) balance.push_back({g, 1.0});
        lp.add_row(std::move(balance), RowSense::eq, 0.0);
        for (std::size_t r = 0; r < lines.size(); ++r) {
            std::vector<LinearTerm> terms;
            double fmin = flow0[r], fmax = flow0[r];
            for (std::size_t g = 0; g < ng; ++g) {
                double s = ptdf(r, net.bus_index(net.generators[g].bus));
                if (s == 0.0) continue;
                terms.push_back({g, s});
                fmin += std::min(s * lo[g], s * hi[g]);
                fmax += std::max(s * lo[g], s * hi[g]);
            }
            const double limit = net.lines[lines[r]].flow_limit;
            if (fmax > limit) {
                auto s = lp.add_variable(0.0, fmax - limit, 1.0);
                auto t = terms;
                t.push_back({s, -1.0});
                lp.add_row(std::move(t), RowSense::le, limit - flow0[r]);
            }
            if (fmin < -limit) {
                auto s = lp.add_variable(0.0, -limit - fmin, 1.0);
                auto t = terms;
                t.push_back({s, 1.0});
                lp.add_row(std::move(t), RowSense::ge, -limit - flow0[r]);
            }
        }
        LpResult res;
        try {
            res = simplex_solve(lp);
        } catch (const SolverError& e) {
            throw SolverError(std::string("corrective LP for outage of line ") +
                              net.lines[set_.lines[c]].name() + ": " + e.what());
        }
        if (res.status != LpStatus::optimal)
            throw SolverError("corrective LP for outage of line " + net.lines[set_.lines[c]].name() + " is " +
                              to_string(res.status));
        if (res.objective > kShedTolerance) return std::nullopt;
        return std::vector<double>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(ng));
    }

    LabeledSample label(std::span<const double> gen, std::span<const double> load) const {
        LabeledSample out;
        auto flows = dc_flows(base_, bus_injections(*net_, gen, load));
        if (!check_limits(*net_, flows, kLimitTolerance).ok) {
            out.label = Label::unacceptable;
            out.base_violation = true;
            return out;
        }
        for (std::size_t c = 0; c < set_.lines.size(); ++c) {
            if (!contingency_feasible(c, gen, load)) {
                out.label = Label::unacceptable;
                out.failing_line = set_.lines[c];
                return out;
            }
        }
        return out;
    }

    LabeledSample label(const OperatingPoint& p) const { return label(p.gen_mw, p.load_mw); }

private:
    const Network* net_;
    PtdfMatrix base_;
    ContingencySet set_;
    std::vector<PtdfMatrix> outage_;
    std::vector<std::vector<std::size_t>> surviving_;
};

inline LabeledSample label_point(const SecurityAssessor& sa, const OperatingPoint& p) { return sa.label(p); }

/// Labels in input order; independent of the worker count.
inline std::vector<LabeledSample> label_dataset(const SecurityAssessor& sa, std::span<const OperatingPoint> points,
                                                unsigned workers = 1) {
    std::vector<LabeledSample> out(points.size());
    parallel_for(points.size(), workers, [&](std::size_t i) {
        try {
            out[i] = sa.label(points[i]);
        } catch (const SolverError& e) {
            throw SolverError("row " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

} // namespace sdr

#endif
