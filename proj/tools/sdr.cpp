// sdr: command-line front end for the offline and online procedures.
//
//   sdr sample        n, seed            -> dataset CSV
//   sdr label         dataset CSV        -> labeled CSV
//   sdr train         labeled CSV, grid  -> tree file
//   sdr alpha-search  tree, alpha grid   -> report CSV (+ optional cell CSV)
//   sdr dispatch      tree, alpha, loads -> JSON record
//   sdr scopf         loads              -> results CSV
//   sdr bench         tree, alpha, n     -> timing CSV
//
// Every option can also be set from a JSON file given with --config. Keys
// are long option names; top-level keys apply to global options and an
// object named after the subcommand applies to its options. Values from the
// file take precedence over flags.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 solver failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "sdr/pipeline.hpp"

namespace {

using nlohmann::json;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Records a JSON setter for every option so the config file can override
// parsed values.
class Options {
public:
    template <class T>
    CLI::Option* add(CLI::App& app, const std::string& name, T& var, const std::string& help) {
        auto* o = app.add_option("--" + name, var, help);
        if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>)
            o->delimiter(',');
        else
            o->capture_default_str();
        setters_[section(app)][name] = [&var, name](const json& j) {
            try {
                var = j.get<T>();
            } catch (const json::exception&) {
                throw UsageError("config key '" + name + "' has the wrong type");
            }
        };
        return o;
    }

    CLI::Option* flag(CLI::App& app, const std::string& name, bool& var, const std::string& help) {
        auto* o = app.add_flag("--" + name, var, help);
        setters_[section(app)][name] = [&var, name](const json& j) {
            if (!j.is_boolean()) throw UsageError("config key '" + name + "' must be a boolean");
            var = j.get<bool>();
        };
        return o;
    }

    /// Apply global keys and the active subcommand's section.
    void apply(const json& cfg, const std::string& command) const {
        if (!cfg.is_object()) throw UsageError("the config file must hold a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            if (value.is_object()) {
                if (!setters_.count(key)) throw UsageError("unknown config section '" + key + "'");
                if (key != command) continue;
                const auto& sec = setters_.at(key);
                for (const auto& [k, v] : value.items()) {
                    auto it = sec.find(k);
                    if (it == sec.end()) throw UsageError("unknown config key '" + key + "." + k + "'");
                    it->second(v);
                }
                continue;
            }
            auto it = setters_.at("").find(key);
            if (it == setters_.at("").end()) throw UsageError("unknown config key '" + key + "'");
            it->second(value);
        }
    }

private:
    static std::string section(const CLI::App& app) { return app.get_parent() ? app.get_name() : ""; }

    std::map<std::string, std::map<std::string, std::function<void(const json&)>>> setters_;
};

// ---- I/O helpers ------------------------------------------------------------------

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw sdr::DataError("cannot open '" + path + "' for reading");
    return in;
}

/// Writes to a file, or to stdout for "-".
class Output {
public:
    explicit Output(const std::string& path) {
        if (path == "-") return;
        file_ = std::make_unique<std::ofstream>(path);
        if (!*file_) throw sdr::DataError("cannot open '" + path + "' for writing");
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void close() {
        stream().flush();
        if (!stream()) throw sdr::DataError("write failed");
    }

private:
    std::unique_ptr<std::ofstream> file_;
};

/// Load realizations from any CSV whose header names the load columns
/// (l<bus>); a dataset CSV works as well as a loads-only file.
std::vector<std::vector<double>> read_loads(const sdr::Network& net, const std::string& path) {
    auto in = open_in(path);
    auto ds = sdr::read_dataset_csv(in, path);
    sdr::FeatureLayout layout(net);
    const std::size_t ng = net.generators.size();
    std::vector<std::size_t> cols;
    for (std::size_t d = 0; d < net.loads.size(); ++d) {
        const auto& name = layout.names()[ng + d];
        auto it = std::find(ds.names.begin(), ds.names.end(), name);
        if (it == ds.names.end()) throw sdr::DataError(path + ": missing load column '" + name + "'");
        cols.push_back(static_cast<std::size_t>(it - ds.names.begin()));
    }
    std::vector<std::vector<double>> out(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i)
        for (auto c : cols) out[i].push_back(ds.at(i, c));
    return out;
}

sdr::DecisionTree read_tree(const std::string& path, std::optional<sdr::GridCell>* cv = nullptr) {
    auto in = open_in(path);
    auto t = sdr::load_tree(in, path);
    if (cv) *cv = t.cv;
    return std::move(t.tree);
}

sdr::Dataset read_dataset(const std::string& path) {
    auto in = open_in(path);
    return sdr::read_dataset_csv(in, path);
}

sdr::AlphaPolicy parse_policy(const std::string& s) {
    if (s == "smallest-safe") return sdr::AlphaPolicy::smallest_safe;
    if (s == "cheapest-safe") return sdr::AlphaPolicy::cheapest_safe;
    throw UsageError("unknown policy '" + s + "' (smallest-safe, cheapest-safe)");
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

// ---- Settings ----------------------------------------------------------------------

struct Settings {
    std::string network = std::string(SDR_DATA_DIR) + "/ieee39.net";
    std::string config;
    unsigned workers = sdr::default_workers();
    bool quiet = false;

    // sample
    std::size_t n = 20000;
    std::uint64_t seed = 1;
    double rho = 0.75, deviation = 0.25, kumaraswamy_a = 1.6, kumaraswamy_b = 2.8;
    bool with_labels = false;

    // shared file arguments
    std::string in, out = "-", tree, loads, test, cells;

    // train
    std::vector<int> max_depth, max_leaves;
    int folds = 5, min_samples_leaf = 1;
    double purity = 0.0;

    // alpha search, dispatch, bench
    double alpha = 0.0, alpha_min = 0.0, alpha_max = 60.0, alpha_step = 1.0, gamma = sdr::kDefaultGamma;
    std::size_t n_eval = 100;
    std::uint64_t eval_seed = 2;
    std::string policy = "smallest-safe";
    bool timing = false;
    std::size_t row = 0;

    sdr::SamplerConfig sampler(std::uint64_t s) const {
        sdr::SamplerConfig c;
        c.seed = s;
        c.pearson_rho = rho;
        c.load_deviation = deviation;
        c.kumaraswamy_a = kumaraswamy_a;
        c.kumaraswamy_b = kumaraswamy_b;
        c.validate();
        return c;
    }

    std::ostream* log() const { return quiet ? nullptr : &std::cerr; }
};

sdr::Network load_net(const Settings& s) {
    auto net = sdr::load_network(s.network);
    net.validate();
    return net;
}

// ---- Subcommands ---------------------------------------------------------------------

void run_sample(const Settings& s) {
    auto net = load_net(s);
    if (s.n < 1) throw UsageError("--n must be >= 1");
    auto ptdf = sdr::build_ptdf(net);
    sdr::GenerationStats stats;
    auto pts = sdr::generate_dataset(net, ptdf, s.sampler(s.seed), s.n, &stats, s.workers);
    std::vector<sdr::LabeledSample> labels;
    if (s.with_labels) labels = sdr::label_dataset(sdr::SecurityAssessor(net), pts, s.workers);
    Output out(s.out);
    sdr::write_dataset_csv(out.stream(), net, pts, labels);
    out.close();
    if (auto* log = s.log()) {
        *log << "sampled " << pts.size() << " points (" << (stats.attempts - stats.accepted) << " rejected draws)";
        if (s.with_labels) {
            std::size_t ok = 0;
            for (const auto& l : labels) ok += l.label == sdr::Label::acceptable;
            *log << ", " << ok << " acceptable";
        }
        *log << "\n";
    }
}

void run_label(const Settings& s) {
    if (s.in.empty()) throw UsageError("--in is required");
    auto net = load_net(s);
    auto pts = sdr::dataset_points(net, read_dataset(s.in));
    sdr::SecurityAssessor sa(net);
    auto labels = sdr::label_dataset(sa, pts, s.workers);
    Output out(s.out);
    sdr::write_dataset_csv(out.stream(), net, pts, labels);
    out.close();
    if (auto* log = s.log()) {
        std::size_t ok = 0;
        for (const auto& l : labels) ok += l.label == sdr::Label::acceptable;
        *log << "labeled " << labels.size() << " points, " << ok << " acceptable\n";
    }
}

void run_train(const Settings& s) {
    if (s.in.empty()) throw UsageError("--in is required");
    auto ds = read_dataset(s.in);
    auto grid = sdr::GridSpec::standard();
    if (!s.max_depth.empty()) grid.max_depth = s.max_depth;
    if (!s.max_leaves.empty()) grid.max_leaf_nodes = s.max_leaves;
    grid.min_samples_leaf = s.min_samples_leaf;
    grid.purity_threshold = s.purity;
    for (int d : grid.max_depth)
        if (d < 1) throw UsageError("--max-depth values must be >= 1");
    for (int l : grid.max_leaf_nodes)
        if (l < 2) throw UsageError("--max-leaves values must be >= 2");
    if (s.folds < 2) throw UsageError("--folds must be >= 2");
    auto model = sdr::train_tree(ds, grid, s.folds, s.workers, s.log());
    Output out(s.out);
    sdr::save_tree(out.stream(), model.tree, &model.selected);
    out.close();
    if (auto* log = s.log()) {
        const auto& p = model.selected.params;
        *log << "selected max_depth=" << p.max_depth << " max_leaf_nodes=" << p.max_leaf_nodes
             << " cv_f1=" << model.selected.mean_f1 << " cv_error=" << model.selected.mean_error << "; "
             << model.tree.leaf_count(1) << " acceptable of "
             << model.tree.leaf_count(0) + model.tree.leaf_count(1) << " leaves, depth " << model.tree.depth() << "\n";
    }
}

void run_alpha_search(const Settings& s) {
    if (s.tree.empty()) throw UsageError("--tree is required");
    if (!(s.alpha_step > 0.0)) throw UsageError("--alpha-step must be > 0");
    auto net = load_net(s);
    std::optional<sdr::GridCell> cv;
    auto tree = read_tree(s.tree, &cv);
    sdr::AlphaSearchConfig cfg;
    cfg.alpha_grid = sdr::AlphaSearchConfig::default_grid(s.alpha_min, s.alpha_max, s.alpha_step);
    cfg.eval_samples = s.n_eval;
    cfg.seed = s.eval_seed;
    cfg.gamma = s.gamma;
    cfg.sampler = s.sampler(s.eval_seed);
    cfg.workers = s.workers;
    if (!s.test.empty()) cfg.test_error = sdr::test_error(tree, read_dataset(s.test));
    else if (cv) cfg.test_error = cv->mean_error;

    sdr::SecurityAssessor sa(net);
    auto res = sdr::alpha_search(sa, tree, cfg, s.log());
    Output out(s.out);
    sdr::write_alpha_report_csv(out.stream(), res.rows, s.timing);
    out.close();
    if (!s.cells.empty()) {
        Output cells(s.cells);
        sdr::write_alpha_cells_csv(cells.stream(), res);
        cells.close();
    }
    if (auto* log = s.log()) {
        auto sel = sdr::select_best_alpha(res.rows, parse_policy(s.policy));
        *log << sel.message << "\n";
        if (auto v = res.nesting_violations()) *log << "warning: " << v << " nesting violation(s)\n";
    }
}

void run_dispatch(const Settings& s) {
    if (s.tree.empty()) throw UsageError("--tree is required");
    auto net = load_net(s);
    auto tree = read_tree(s.tree);
    std::vector<double> load;
    if (s.loads.empty()) {
        for (const auto& ld : net.loads) load.push_back(ld.nominal);
    } else {
        auto all = read_loads(net, s.loads);
        if (s.row >= all.size())
            throw sdr::DataError(s.loads + ": row " + std::to_string(s.row) + " does not exist");
        load = all[s.row];
    }
    sdr::SecurityAssessor sa(net);
    sdr::DispatchContext ctx(sa, tree);
    auto d = sdr::dispatch(ctx, load, s.alpha, s.gamma);

    json rec;
    rec["alpha_mw"] = s.alpha;
    rec["gamma_mw"] = s.gamma;
    rec["status"] = d.dispatched() ? "optimal" : "infeasible";
    rec["leaves"] = d.leaves;
    rec["pruned_leaves"] = d.pruned;
    rec["load_mw"] = load;
    if (d.dispatched()) {
        rec["objective"] = d.milp.objective;
        rec["leaf"] = *d.milp.leaf;
        rec["nodes"] = d.milp.nodes;
        rec["root_bound"] = number_or_null(d.milp.root_bound);
        rec["gen_mw"] = d.gen_mw;
        auto lab = sa.label(d.gen_mw, load);
        rec["label"] = lab.label == sdr::Label::acceptable ? "acceptable" : "unacceptable";
        rec["failing_contingency"] = lab.failing_contingency(net);
    } else {
        rec["objective"] = nullptr;
        rec["message"] = d.message;
    }
    Output out(s.out);
    out.stream() << rec.dump(2) << "\n";
    out.close();
}

void run_scopf(const Settings& s) {
    auto net = load_net(s);
    std::vector<std::vector<double>> loads;
    if (!s.loads.empty()) loads = read_loads(net, s.loads);
    else loads = sdr::sample_loads(net, s.sampler(s.eval_seed), s.n_eval);
    sdr::SecurityAssessor sa(net);
    std::vector<sdr::ScopfResult> res(loads.size());
    sdr::parallel_for(loads.size(), s.workers, [&](std::size_t i) { res[i] = sdr::solve_scopf(sa, loads[i]); });
    Output out(s.out);
    sdr::write_scopf_csv(out.stream(), res, net.generators.size());
    out.close();
    if (auto* log = s.log()) {
        std::size_t ok = 0;
        for (const auto& r : res) ok += r.optimal();
        *log << ok << " of " << res.size() << " realizations solved to optimality\n";
    }
}

void run_bench(const Settings& s) {
    if (s.tree.empty()) throw UsageError("--tree is required");
    auto net = load_net(s);
    auto tree = read_tree(s.tree);
    std::vector<std::vector<double>> loads;
    if (!s.loads.empty()) loads = read_loads(net, s.loads);
    else loads = sdr::sample_loads(net, s.sampler(s.eval_seed), s.n_eval);
    sdr::SecurityAssessor sa(net);
    sdr::DispatchContext ctx(sa, tree);
    auto rep = sdr::benchmark_timing(ctx, loads, s.alpha, s.gamma);
    Output out(s.out);
    sdr::write_timing_csv(out.stream(), rep);
    out.close();
    if (auto* log = s.log()) {
        *log << rep.instances << " instances; mean wall time branch-and-bound " << rep.mean_milp_seconds
             << " s, enumeration " << rep.mean_enumerate_seconds << " s, ratio " << rep.ratio() << "; "
             << rep.disagreements << " objective disagreement(s)\n";
    }
    if (rep.disagreements) throw sdr::SolverError("branch and bound and enumeration disagree");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sample-derived disjunctive-rule secure dispatch"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand
    Settings s;
    Options opt;

    opt.add(app, "network", s.network, "network file");
    app.add_option("--config", s.config, "JSON config file; its values override flags");
    opt.add(app, "workers", s.workers, "worker threads");
    opt.flag(app, "quiet", s.quiet, "suppress progress output on stderr");

    auto sampler_opts = [&](CLI::App* c) {
        opt.add(*c, "rho", s.rho, "pairwise load correlation");
        opt.add(*c, "deviation", s.deviation, "load band half-width as a fraction of nominal");
        opt.add(*c, "kumaraswamy-a", s.kumaraswamy_a, "Kumaraswamy marginal shape a");
        opt.add(*c, "kumaraswamy-b", s.kumaraswamy_b, "Kumaraswamy marginal shape b");
    };

    auto* sample = app.add_subcommand("sample", "draw operating points into a dataset CSV");
    opt.add(*sample, "n", s.n, "number of points");
    opt.add(*sample, "seed", s.seed, "random seed");
    opt.add(*sample, "out", s.out, "output CSV ('-' for stdout)");
    opt.flag(*sample, "label", s.with_labels, "label the points as well");
    sampler_opts(sample);

    auto* label = app.add_subcommand("label", "add N-1 security labels to a dataset CSV");
    opt.add(*label, "in", s.in, "dataset CSV");
    opt.add(*label, "out", s.out, "output CSV ('-' for stdout)");

    auto* train = app.add_subcommand("train", "grid-search a decision tree on a labeled CSV");
    opt.add(*train, "in", s.in, "labeled dataset CSV");
    opt.add(*train, "out", s.out, "output tree file ('-' for stdout)");
    opt.add(*train, "max-depth", s.max_depth, "comma-separated depth grid (default 5..20)");
    opt.add(*train, "max-leaves", s.max_leaves, "comma-separated leaf budget grid (default 20..100, 200..500)");
    opt.add(*train, "folds", s.folds, "cross-validation folds");
    opt.add(*train, "min-samples-leaf", s.min_samples_leaf, "minimum samples per leaf");
    opt.add(*train, "purity", s.purity, "stop splitting nodes with Gini impurity at or below this value");

    auto* alpha = app.add_subcommand("alpha-search", "sweep the safety margin and write the report CSV");
    opt.add(*alpha, "tree", s.tree, "tree file");
    opt.add(*alpha, "alpha-min", s.alpha_min, "first margin (MW)");
    opt.add(*alpha, "alpha-max", s.alpha_max, "last margin (MW)");
    opt.add(*alpha, "alpha-step", s.alpha_step, "margin step (MW)");
    opt.add(*alpha, "n-eval", s.n_eval, "evaluation realizations");
    opt.add(*alpha, "seed", s.eval_seed, "evaluation seed");
    opt.add(*alpha, "gamma", s.gamma, "strict-inequality offset (MW)");
    opt.add(*alpha, "test", s.test, "labeled CSV for the reported test error (default: the tree's CV error)");
    opt.add(*alpha, "policy", s.policy, "margin selection policy: smallest-safe or cheapest-safe");
    opt.add(*alpha, "out", s.out, "report CSV ('-' for stdout)");
    opt.add(*alpha, "cells", s.cells, "optional per-realization CSV");
    opt.flag(*alpha, "timing", s.timing, "add solve-time columns to the report");
    sampler_opts(alpha);

    auto* disp = app.add_subcommand("dispatch", "solve one dispatch and print a JSON record");
    opt.add(*disp, "tree", s.tree, "tree file");
    opt.add(*disp, "alpha", s.alpha, "safety margin (MW)");
    opt.add(*disp, "gamma", s.gamma, "strict-inequality offset (MW)");
    opt.add(*disp, "loads", s.loads, "CSV with l<bus> columns (default: nominal loads)");
    opt.add(*disp, "row", s.row, "row of the loads file");
    opt.add(*disp, "out", s.out, "output file ('-' for stdout)");

    auto* scopf = app.add_subcommand("scopf", "solve the corrective SCOPF per load realization");
    opt.add(*scopf, "loads", s.loads, "CSV with l<bus> columns (default: sampled)");
    opt.add(*scopf, "n", s.n_eval, "sampled realizations when --loads is absent");
    opt.add(*scopf, "seed", s.eval_seed, "sampling seed");
    opt.add(*scopf, "out", s.out, "results CSV ('-' for stdout)");
    sampler_opts(scopf);

    auto* bench = app.add_subcommand("bench", "time branch and bound against leaf enumeration");
    opt.add(*bench, "tree", s.tree, "tree file");
    opt.add(*bench, "alpha", s.alpha, "safety margin (MW)");
    opt.add(*bench, "gamma", s.gamma, "strict-inequality offset (MW)");
    opt.add(*bench, "loads", s.loads, "CSV with l<bus> columns (default: sampled)");
    opt.add(*bench, "n", s.n_eval, "sampled realizations when --loads is absent");
    opt.add(*bench, "seed", s.eval_seed, "sampling seed");
    opt.add(*bench, "out", s.out, "timing CSV ('-' for stdout)");
    sampler_opts(bench);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (!s.config.empty()) {
            auto in = open_in(s.config);
            json cfg;
            try {
                cfg = json::parse(in);
            } catch (const json::parse_error& e) {
                throw sdr::DataError(s.config + ": " + e.what());
            }
            opt.apply(cfg, command);
        }
        if (s.workers < 1) throw UsageError("--workers must be >= 1");

        if (command == "sample") run_sample(s);
        else if (command == "label") run_label(s);
        else if (command == "train") run_train(s);
        else if (command == "alpha-search") run_alpha_search(s);
        else if (command == "dispatch") run_dispatch(s);
        else if (command == "scopf") run_scopf(s);
        else if (command == "bench") run_bench(s);
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sdr::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        // ParseError, ValidationError, DataError and I/O failures.
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
