#ifndef SDR_PIPELINE_HPP
#define SDR_PIPELINE_HPP

// Offline and online procedures. Offline: train the tree, then sweep the
// safety margin alpha over fresh load realizations, dispatching each with
// the disjunctive model, labeling the outcome and comparing its cost with
// the SCOPF optimum. Online: one branch-and-bound solve at the chosen alpha.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdr/cart.hpp"
#include "sdr/dataset.hpp"
#include "sdr/gdp.hpp"
#include "sdr/label.hpp"
#include "sdr/mc.hpp"
#include "sdr/milp.hpp"
#include "sdr/parallel.hpp"
#include "sdr/scopf.hpp"

namespace sdr {

// ---- Metrics -----------------------------------------------------------------

/// Share of returned dispatches whose true label is unacceptable; nullopt
/// when nothing was dispatched.
inline std::optional<double> control_error(std::span<const Label> labels) {
    if (labels.empty()) return std::nullopt;
    std::size_t bad = 0;
    for (auto l : labels) bad += l == Label::unacceptable;
    return static_cast<double>(bad) / static_cast<double>(labels.size());
}

/// Linear-interpolation percentile (q in [0, 100]) of unsorted values.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double dispatch_cost(const Network& net, std::span<const double> p) {
    double c = 0.0;
    for (std::size_t g = 0; g < p.size(); ++g) c += net.generators[g].cost * p[g];
    return c;
}

// ---- Training ------------------------------------------------------------------

/// Grid-searched tree from a labeled dataset.
inline TrainedModel train_tree(const Dataset& ds, const GridSpec& grid, int folds = 5, unsigned workers = 1,
                               std::ostream* log = nullptr) {
    if (!ds.labeled()) throw DataError("training needs a labeled dataset");
    SampleView view{ds.x, ds.labels, ds.cols()};
    return grid_search_cv(view, ds.names, grid, folds, workers, log);
}

/// Misclassification rate of the tree on a labeled dataset.
inline double test_error(const DecisionTree& tree, const Dataset& ds) {
    if (!ds.labeled() || ds.rows() == 0) throw DataError("test error needs a nonempty labeled dataset");
    Confusion c;
    for (std::size_t i = 0; i < ds.rows(); ++i) c.add(ds.labels[i], tree.predict(ds.row(i)));
    return c.error();
}

// ---- Online dispatch -------------------------------------------------------------

/// Shared immutable inputs for building and solving models.
struct DispatchContext {
    const Network* net = nullptr;
    const SecurityAssessor* assessor = nullptr; // provides the base PTDF
    const DecisionTree* tree = nullptr;
    std::vector<LeafPath> paths;

    DispatchContext(const SecurityAssessor& sa, const DecisionTree& t)
        : net(&sa.network()), assessor(&sa), tree(&t), paths(extract_leaf_paths(t)) {}
};

struct DispatchOutcome {
    MilpResult milp;
    std::vector<double> gen_mw;  // empty unless optimal
    std::vector<double> flow_mw;
    std::size_t leaves = 0;      // surviving leaves
    std::size_t pruned = 0;
    std::string message;         // reason when no dispatch was produced

    bool dispatched() const { return milp.optimal(); }
};

/// Build and solve the disjunctive model for one realization.
inline DispatchOutcome dispatch(const DispatchContext& ctx, std::span<const double> load, double alpha,
                                double gamma = kDefaultGamma) {
    DispatchOutcome out;
    DisjunctiveModel m;
    try {
        m = build_model(*ctx.net, ctx.assessor->base_ptdf(), *ctx.tree, ctx.paths, load, {alpha, gamma});
    } catch (const DataError& e) {
        if (std::string(e.what()).rfind("no admissible leaf", 0) != 0) throw;
        out.pruned = ctx.paths.size();
        out.message = e.what();
        return out;
    }
    out.leaves = m.leaf_count();
    out.pruned = m.pruned.size();
    out.milp = branch_and_bound(m);
    if (!out.milp.optimal()) {
        out.message = "the disjunctive model is infeasible for this realization";
        return out;
    }
    out.gen_mw = m.dispatch(out.milp.x);
    for (auto v : m.flow_vars) out.flow_mw.push_back(out.milp.x[v]);
    return out;
}

// ---- Alpha search ------------------------------------------------------------------

struct AlphaSearchConfig {
    std::vector<double> alpha_grid = default_grid();
    std::size_t eval_samples = 100;
    std::uint64_t seed = 2;
    double gamma = kDefaultGamma;
    SamplerConfig sampler{};      // load distribution (its seed is replaced by `seed`)
    double test_error = std::numeric_limits<double>::quiet_NaN(); // reported alongside
    unsigned workers = 1;

    static std::vector<double> default_grid(double lo = 0.0, double hi = 60.0, double step = 1.0) {
        std::vector<double> g;
        for (int k = 0; lo + k * step <= hi + 1e-9; ++k) g.push_back(lo + k * step);
        return g;
    }

    void validate() const {
        if (alpha_grid.empty()) throw ValidationError("the alpha grid is empty");
        for (std::size_t k = 0; k < alpha_grid.size(); ++k) {
            if (!(alpha_grid[k] >= 0.0) || !std::isfinite(alpha_grid[k]))
                throw ValidationError("alpha values must be finite and >= 0");
            if (k && alpha_grid[k] < alpha_grid[k - 1]) throw ValidationError("the alpha grid must be nondecreasing");
        }
        if (eval_samples < 1) throw ValidationError("need at least one evaluation realization");
        if (!(gamma > 0.0)) throw ValidationError("gamma must be > 0");
    }
};

/// Outcome of one (alpha, realization) cell.
struct EvalCell {
    enum class Status { dispatched, pruned, infeasible, failed } status = Status::failed;
    std::optional<std::size_t> leaf;
    Label label = Label::unacceptable;
    std::string failing;       // failing contingency of an unacceptable dispatch
    double cost = std::numeric_limits<double>::quiet_NaN();
    double cost_gap = std::numeric_limits<double>::quiet_NaN(); // relative to SCOPF
    double distance_mw = std::numeric_limits<double>::quiet_NaN();
    std::size_t nodes = 0;
    double seconds = 0.0;
    std::string message;

    bool feasible() const { return status == Status::dispatched; }
};

inline const char* to_string(EvalCell::Status s) {
    switch (s) {
    case EvalCell::Status::dispatched: return "dispatched";
    case EvalCell::Status::pruned: return "pruned";
    case EvalCell::Status::infeasible: return "infeasible";
    case EvalCell::Status::failed: return "failed";
    }
    return "?";
}

struct AlphaReportRow {
    double alpha = 0.0;
    std::size_t realizations = 0;
    std::size_t dispatched = 0;
    std::size_t infeasible = 0;   // all leaves pruned or model infeasible
    std::size_t failed = 0;       // solver failures, excluded
    std::size_t unacceptable = 0;
    std::optional<double> control_error;
    double test_error = std::numeric_limits<double>::quiet_NaN();
    std::size_t compared = 0;     // acceptable dispatches with a SCOPF optimum
    double mean_cost_gap = std::numeric_limits<double>::quiet_NaN();
    double p10_cost_gap = std::numeric_limits<double>::quiet_NaN();
    double p90_cost_gap = std::numeric_limits<double>::quiet_NaN();
    double min_cost_gap = std::numeric_limits<double>::quiet_NaN();
    double mean_distance_mw = std::numeric_limits<double>::quiet_NaN();
    double mean_solve_seconds = std::numeric_limits<double>::quiet_NaN();
    double mean_nodes = std::numeric_limits<double>::quiet_NaN();

    bool all_infeasible() const { return dispatched == 0 && failed < realizations; }
};

struct AlphaSearchResult {
    std::vector<double> alphas;
    std::vector<std::vector<double>> loads;       // evaluation realizations
    std::vector<ScopfResult> scopf;               // one per realization
    std::vector<std::vector<EvalCell>> cells;     // [alpha][realization]
    std::vector<AlphaReportRow> rows;

    /// Pairs (alpha1 < alpha2, realization) feasible at alpha2 but not at
    /// alpha1. Solver failures are not counted either way.
    std::size_t nesting_violations() const {
        std::size_t v = 0;
        for (std::size_t i = 0; i < loads.size(); ++i)
            for (std::size_t b = 0; b < alphas.size(); ++b) {
                if (!cells[b][i].feasible()) continue;
                for (std::size_t a = 0; a < b; ++a) {
                    if (!(alphas[a] < alphas[b])) continue;
                    const auto& c = cells[a][i];
                    v += c.status == EvalCell::Status::pruned || c.status == EvalCell::Status::infeasible;
                }
            }
        return v;
    }
};

inline AlphaReportRow summarize(double alpha, std::span<const EvalCell> cells, double test_err) {
    AlphaReportRow row;
    row.alpha = alpha;
    row.realizations = cells.size();
    row.test_error = test_err;
    std::vector<Label> labels;
    std::vector<double> gaps, dist;
    double secs = 0.0, nodes = 0.0;
    for (const auto& c : cells) {
        switch (c.status) {
        case EvalCell::Status::failed: ++row.failed; continue;
        case EvalCell::Status::pruned:
        case EvalCell::Status::infeasible: ++row.infeasible; break;
        case EvalCell::Status::dispatched:
            ++row.dispatched;
            labels.push_back(c.label);
            row.unacceptable += c.label == Label::unacceptable;
            if (c.label == Label::acceptable && std::isfinite(c.cost_gap)) {
                gaps.push_back(c.cost_gap);
                dist.push_back(c.distance_mw);
            }
            break;
        }
        secs += c.seconds;
        nodes += static_cast<double>(c.nodes);
    }
    row.control_error = control_error(labels);
    row.compared = gaps.size();
    if (!gaps.empty()) {
        double s = 0.0, d = 0.0;
        for (double g : gaps) s += g;
        for (double v : dist) d += v;
        row.mean_cost_gap = s / static_cast<double>(gaps.size());
        row.mean_distance_mw = d / static_cast<double>(dist.size());
        row.p10_cost_gap = percentile(gaps, 10.0);
        row.p90_cost_gap = percentile(gaps, 90.0);
        row.min_cost_gap = *std::min_element(gaps.begin(), gaps.end());
    }
    const std::size_t solved = row.realizations - row.failed;
    if (solved) {
        row.mean_solve_seconds = secs / static_cast<double>(solved);
        row.mean_nodes = nodes / static_cast<double>(solved);
    }
    return row;
}

/// Evaluation load realizations: same distribution as training, separate
/// random stream.
inline std::vector<std::vector<double>> evaluation_loads(const Network& net, const AlphaSearchConfig& cfg) {
    SamplerConfig s = cfg.sampler;
    s.seed = cfg.seed;
    return sample_loads(net, s, cfg.eval_samples);
}

/// Sweep the alpha grid. `log` receives one progress line per alpha.
inline AlphaSearchResult alpha_search(const SecurityAssessor& sa, const DecisionTree& tree,
                                      const AlphaSearchConfig& cfg, std::ostream* log = nullptr) {
    cfg.validate();
    const Network& net = sa.network();
    DispatchContext ctx(sa, tree);
    AlphaSearchResult res;
    res.alphas = cfg.alpha_grid;
    res.loads = evaluation_loads(net, cfg);
    const std::size_t n = res.loads.size();

    res.scopf.resize(n);
    parallel_for(n, cfg.workers, [&](std::size_t i) {
        try {
            res.scopf[i] = solve_scopf(sa, res.loads[i]);
        } catch (const SolverError&) {
            res.scopf[i] = ScopfResult{}; // reported as infeasible, no gap
        }
    });

    for (double alpha : res.alphas) {
        std::vector<EvalCell> cells(n);
        parallel_for(n, cfg.workers, [&](std::size_t i) {
            EvalCell& c = cells[i];
            try {
                auto d = dispatch(ctx, res.loads[i], alpha, cfg.gamma);
                c.nodes = d.milp.nodes;
                c.seconds = d.milp.wall_seconds;
                if (!d.dispatched()) {
                    c.status = d.leaves == 0 ? EvalCell::Status::pruned : EvalCell::Status::infeasible;
                    c.message = d.message;
                    return;
                }
                c.status = EvalCell::Status::dispatched;
                c.leaf = d.milp.leaf;
                auto lab = sa.label(d.gen_mw, res.loads[i]);
                c.label = lab.label;
                c.failing = lab.failing_contingency(net);
                c.cost = dispatch_cost(net, d.gen_mw);
                const auto& s = res.scopf[i];
                if (s.optimal()) {
                    c.cost_gap = (c.cost - s.objective) / s.objective;
                    double sq = 0.0;
                    for (std::size_t g = 0; g < d.gen_mw.size(); ++g)
                        sq += (d.gen_mw[g] - s.base[g]) * (d.gen_mw[g] - s.base[g]);
                    c.distance_mw = std::sqrt(sq);
                }
            } catch (const SolverError& e) {
                c.status = EvalCell::Status::failed;
                c.message = e.what();
            }
        });
        res.rows.push_back(summarize(alpha, cells, cfg.test_error));
        if (log) {
            const auto& r = res.rows.back();
            *log << "alpha " << text::format_double(alpha) << ": dispatched " << r.dispatched << "/"
                 << r.realizations << ", unacceptable " << r.unacceptable << ", infeasible " << r.infeasible
                 << ", failed " << r.failed << "\n";
            for (std::size_t i = 0; i < n; ++i)
                if (cells[i].status == EvalCell::Status::failed)
                    *log << "  realization " << i << " failed: " << cells[i].message << "\n";
        }
        res.cells.push_back(std::move(cells));
    }
    return res;
}

// ---- Margin selection ------------------------------------------------------------

/// Number for a CSV cell; empty when not finite.
inline std::string csv_number(double v) { return std::isfinite(v) ? text::format_double(v) : ""; }

enum class AlphaPolicy {
    smallest_safe, ///< smallest alpha with zero control error; ties by lower mean cost gap
    cheapest_safe  ///< lowest mean cost gap among zero-error rows; ties by smaller alpha
};

struct AlphaSelection {
    std::optional<std::size_t> row; // index into the rows
    std::optional<double> alpha;
    std::string message;
};

inline AlphaSelection select_best_alpha(std::span<const AlphaReportRow> rows,
                                        AlphaPolicy policy = AlphaPolicy::smallest_safe) {
    if (rows.empty()) throw DataError("no alpha rows to select from");
    auto gap = [](const AlphaReportRow& r) {
        return std::isnan(r.mean_cost_gap) ? std::numeric_limits<double>::infinity() : r.mean_cost_gap;
    };
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        if (!r.control_error || *r.control_error != 0.0) continue;
        if (!best) {
            best = k;
            continue;
        }
        const auto& b = rows[*best];
        bool better = false;
        if (policy == AlphaPolicy::smallest_safe)
            better = r.alpha < b.alpha || (r.alpha == b.alpha && gap(r) < gap(b));
        else
            better = gap(r) < gap(b) || (gap(r) == gap(b) && r.alpha < b.alpha);
        if (better) best = k;
    }
    AlphaSelection sel;
    if (!best) {
        sel.message = "no safe margin in grid: every alpha has a nonzero control error or no dispatch";
        return sel;
    }
    sel.row = best;
    sel.alpha = rows[*best].alpha;
    const auto& r = rows[*best];
    sel.message = "selected alpha = " + text::format_double(*sel.alpha) + " MW: control error 0 over " +
                  std::to_string(r.dispatched) + " dispatches, mean cost gap " + csv_number(r.mean_cost_gap);
    return sel;
}

// ---- Reports ---------------------------------------------------------------------

/// Plot-ready report, one row per alpha. Wall-clock columns are left out
/// unless requested so that reruns are byte-identical.
inline void write_alpha_report_csv(std::ostream& out, std::span<const AlphaReportRow> rows,
                                   bool include_timing = false) {
    out << "alpha,realizations,dispatched,infeasible,failed,unacceptable,control_error,test_error,compared,"
           "mean_cost_gap,p10_cost_gap,p90_cost_gap,min_cost_gap,mean_distance_mw,mean_nodes,all_infeasible";
    if (include_timing) out << ",mean_solve_seconds";
    out << "\n";
    for (const auto& r : rows) {
        out << text::format_double(r.alpha) << "," << r.realizations << "," << r.dispatched << "," << r.infeasible
            << "," << r.failed << "," << r.unacceptable << ","
            << (r.control_error ? text::format_double(*r.control_error) : "") << "," << csv_number(r.test_error)
            << "," << r.compared << "," << csv_number(r.mean_cost_gap) << "," << csv_number(r.p10_cost_gap) << ","
            << csv_number(r.p90_cost_gap) << "," << csv_number(r.min_cost_gap) << ","
            << csv_number(r.mean_distance_mw) << "," << csv_number(r.mean_nodes) << ","
            << (r.all_infeasible() ? 1 : 0);
        if (include_timing) out << "," << csv_number(r.mean_solve_seconds);
        out << "\n";
    }
}

/// One line per (alpha, realization) cell.
inline void write_alpha_cells_csv(std::ostream& out, const AlphaSearchResult& res) {
    out << "alpha,realization,status,leaf,label,failing_contingency,cost,scopf_cost,cost_gap,distance_mw\n";
    for (std::size_t a = 0; a < res.alphas.size(); ++a)
        for (std::size_t i = 0; i < res.loads.size(); ++i) {
            const auto& c = res.cells[a][i];
            const auto& s = res.scopf[i];
            out << text::format_double(res.alphas[a]) << "," << i << "," << to_string(c.status) << ","
                << (c.leaf ? std::to_string(*c.leaf) : "") << ","
                << (c.feasible() ? std::to_string(static_cast<int>(c.label)) : "") << "," << c.failing << ","
                << csv_number(c.cost) << "," << (s.optimal() ? text::format_double(s.objective) : "") << ","
                << csv_number(c.cost_gap) << "," << csv_number(c.distance_mw) << "\n";
        }
}

// ---- Timing study -----------------------------------------------------------------

struct TimingRow {
    std::size_t instance = 0;
    std::string method;  // "milp" or "enumerate"
    double wall_seconds = 0.0;
    std::size_t nodes = 0;
    std::string status;
    double objective = std::numeric_limits<double>::quiet_NaN();
};

struct TimingReport {
    std::vector<TimingRow> rows;
    std::size_t instances = 0;
    std::size_t disagreements = 0; // objective or status mismatch beyond 1e-6 relative
    double mean_milp_seconds = std::numeric_limits<double>::quiet_NaN();
    double mean_enumerate_seconds = std::numeric_limits<double>::quiet_NaN();

    /// Mean single-MILP time over mean all-leaves time.
    double ratio() const { return mean_milp_seconds / mean_enumerate_seconds; }
};

/// Solve each realization with branch_and_bound and with enumerate_leaves.
/// Realizations whose leaves are all pruned are skipped.
inline TimingReport benchmark_timing(const DispatchContext& ctx, std::span<const std::vector<double>> loads,
                                     double alpha, double gamma = kDefaultGamma) {
    TimingReport rep;
    double tb = 0.0, te = 0.0;
    for (std::size_t i = 0; i < loads.size(); ++i) {
        DisjunctiveModel m;
        try {
            m = build_model(*ctx.net, ctx.assessor->base_ptdf(), *ctx.tree, ctx.paths, loads[i], {alpha, gamma});
        } catch (const DataError& e) {
            if (std::string(e.what()).rfind("no admissible leaf", 0) != 0) throw;
            continue;
        }
        auto bb = branch_and_bound(m);
        auto en = enumerate_leaves(m);
        ++rep.instances;
        tb += bb.wall_seconds;
        te += en.wall_seconds;
        const bool agree = bb.status == en.status &&
                           (!bb.optimal() || std::abs(bb.objective - en.objective) <=
                                                 1e-6 * std::max(1.0, std::abs(en.objective)));
        rep.disagreements += !agree;
        rep.rows.push_back({i, "milp", bb.wall_seconds, bb.nodes, to_string(bb.status), bb.objective});
        rep.rows.push_back({i, "enumerate", en.wall_seconds, en.nodes, to_string(en.status), en.objective});
    }
    if (rep.instances) {
        rep.mean_milp_seconds = tb / static_cast<double>(rep.instances);
        rep.mean_enumerate_seconds = te / static_cast<double>(rep.instances);
    }
    return rep;
}

inline void write_timing_csv(std::ostream& out, const TimingReport& rep) {
    out << "instance,method,wall_seconds,nodes,status,objective\n";
    for (const auto& r : rep.rows)
        out << r.instance << "," << r.method << "," << text::format_double(r.wall_seconds) << "," << r.nodes << ","
            << r.status << "," << csv_number(r.objective) << "\n";
}

} // namespace sdr

#endif
