// Quickstart: the whole offline/online procedure on the 39-bus system at a
// small scale. Samples and labels operating points, trains a tree, sweeps
// the safety margin, selects one and dispatches the nominal loads with it.
//
//   quickstart [network-file] [samples]

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>

#include "sdr/pipeline.hpp"

int main(int argc, char** argv) {
    const std::string path = argc > 1 ? argv[1] : std::string(SDR_DATA_DIR) + "/ieee39.net";
    const std::size_t n = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 4000;
    const unsigned workers = sdr::default_workers();
    try {
        auto net = sdr::load_network(path);
        net.validate();
        sdr::SecurityAssessor sa(net);
        std::cout << net.bus_count() << " buses, " << net.lines.size() << " lines, "
                  << sa.contingencies().lines.size() << " contingencies\n";

        // Offline: sample, label, train.
        sdr::SamplerConfig sampler;
        sampler.seed = 1;
        auto points = sdr::generate_dataset(net, sa.base_ptdf(), sampler, n, nullptr, workers);
        auto labels = sdr::label_dataset(sa, points, workers);
        std::stringstream csv;
        sdr::write_dataset_csv(csv, net, points, labels);
        auto ds = sdr::read_dataset_csv(csv);

        sdr::GridSpec grid;
        grid.max_depth = {5, 8, 12};
        grid.max_leaf_nodes = {20, 40, 100};
        auto model = sdr::train_tree(ds, grid, 5, workers);
        std::cout << "tree: " << model.tree.leaf_count(1) << " acceptable of "
                  << model.tree.leaf_count(0) + model.tree.leaf_count(1) << " leaves, cv error "
                  << model.selected.mean_error << "\n";

        // Offline: margin sweep against SCOPF on fresh realizations.
        sdr::AlphaSearchConfig cfg;
        cfg.alpha_grid = sdr::AlphaSearchConfig::default_grid(0.0, 60.0, 10.0);
        cfg.eval_samples = 30;
        cfg.test_error = model.selected.mean_error;
        cfg.workers = workers;
        auto res = sdr::alpha_search(sa, model.tree, cfg);
        sdr::write_alpha_report_csv(std::cout, res.rows);
        auto sel = sdr::select_best_alpha(res.rows);
        std::cout << sel.message << "\n";
        if (!sel.alpha) return 0;

        // Online: one branch-and-bound solve at the selected margin.
        std::vector<double> nominal;
        for (const auto& ld : net.loads) nominal.push_back(ld.nominal);
        sdr::DispatchContext ctx(sa, model.tree);
        auto d = sdr::dispatch(ctx, nominal, *sel.alpha);
        if (!d.dispatched()) {
            std::cout << "nominal loads: " << d.message << "\n";
            return 0;
        }
        auto lab = sa.label(d.gen_mw, nominal);
        std::cout << "nominal loads: cost " << d.milp.objective << " $/h, leaf " << *d.milp.leaf << ", "
                  << (lab.label == sdr::Label::acceptable ? "acceptable" : "unacceptable") << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
