#ifndef SDR_CART_HPP
#define SDR_CART_HPP

// Univariate binary classification tree (CART, Gini impurity) with
// class-balancing weights, best-first growth under a leaf budget, stratified
// k-fold grid search selected by f1 of the acceptable class, leaf boxes and
// a versioned text format.
//
// Conventions: a branch sends x to the left child when x[feature] <= threshold.
// Leaf classes are the weighted majority; ties go to class 0 (unacceptable).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/parallel.hpp"
#include "sdr/text.hpp"

namespace sdr {

/// 1 - sum of squared class fractions of the weighted counts.
inline double gini(double w0, double w1) {
    if (!(w0 >= 0.0 && w1 >= 0.0)) throw DataError("gini: negative class weight");
    const double t = w0 + w1;
    if (!(t > 0.0)) throw DataError("gini: all class weights are zero");
    const double q0 = w0 / t, q1 = w1 / t;
    return 1.0 - (q0 * q0 + q1 * q1);
}

struct HyperParams {
    int max_depth = 10;
    int max_leaf_nodes = 100;
    int min_samples_leaf = 1;
    bool class_balanced = true;
    /// Nodes whose impurity is at or below this value are not split.
    double purity_threshold = 0.0;

    void validate() const {
        if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
        if (max_leaf_nodes < 2) throw ValidationError("max_leaf_nodes must be >= 2");
        if (min_samples_leaf < 1) throw ValidationError("min_samples_leaf must be >= 1");
        if (!(purity_threshold >= 0.0 && purity_threshold < 0.5))
            throw ValidationError("purity_threshold must lie in [0, 0.5)");
    }
};

struct TreeNode {
    int left = -1, right = -1;     // children; -1 for a leaf
    std::size_t feature = 0;       // split feature (branch only)
    double threshold = 0.0;        // split threshold b (branch only)
    int cls = 0;                   // weighted-majority class of the node
    std::size_t count[2] = {0, 0}; // training samples per class
    double weight[2] = {0.0, 0.0}; // training weight per class
    int depth = 0;

    bool is_leaf() const { return left < 0; }
};

class DecisionTree {
public:
    std::vector<TreeNode> nodes; // nodes[0] is the root
    std::vector<std::string> feature_names;
    HyperParams params;

    std::size_t feature_count() const { return feature_names.size(); }

    std::size_t leaf_index(std::span<const double> x) const {
        if (x.size() != feature_count())
            throw DataError("predict: expected " + std::to_string(feature_count()) + " features, got " +
                            std::to_string(x.size()));
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left
                                                                                    : nodes[i].right);
        return i;
    }

    int predict(std::span<const double> x) const { return nodes[leaf_index(x)].cls; }

    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i].is_leaf()) out.push_back(i);
        return out;
    }

    std::size_t leaf_count(int cls) const {
        std::size_t n = 0;
        for (const auto& nd : nodes) n += nd.is_leaf() && nd.cls == cls;
        return n;
    }

    int depth() const {
        int d = 0;
        for (const auto& nd : nodes) d = std::max(d, nd.depth);
        return d;
    }
};

/// Row-major samples with binary labels.
struct SampleView {
    std::span<const double> x;
    std::span<const int> y;
    std::size_t cols = 0;

    std::size_t rows() const { return y.size(); }
    double at(std::size_t i, std::size_t f) const { return x[i * cols + f]; }
};

struct Split {
    std::size_t feature = 0;
    double threshold = 0.0;
    double child_impurity = 0.0; // W_l gini_l + W_r gini_r, weight units
};

namespace detail {

/// Per-sample weights: 1 each, or 0.5 / class count when balanced.
inline std::vector<double> sample_weights(const SampleView& data, std::span<const std::size_t> idx,
                                          bool balanced) {
    std::vector<double> w(data.rows(), 0.0);
    std::size_t n[2] = {0, 0};
    for (auto i : idx) ++n[data.y[i] ? 1 : 0];
    for (auto i : idx) {
        int c = data.y[i] ? 1 : 0;
        w[i] = balanced ? 0.5 / static_cast<double>(n[c]) : 1.0;
    }
    return w;
}

/// Best split over sorted index lists, one list per feature in `features`.
/// Ties: lowest feature index, then smallest threshold.
template <typename SortedRange>
std::optional<Split> scan_splits(const SampleView& data, std::span<const double> w, std::size_t n_node,
                                 double w0, double w1, std::span<const std::size_t> features,
                                 SortedRange&& sorted_of, int min_leaf) {
    const double total = w0 + w1;
    const double parent = total - (w0 * w0 + w1 * w1) / total;
    std::optional<Split> best;
    double best_score = parent; // a split must strictly beat the parent
    const double eps = 1e-12 * std::max(total, 1e-300);
    for (auto f : features) {
        std::span<const std::uint32_t> order = sorted_of(f);
        double l0 = 0.0, l1 = 0.0;
        for (std::size_t k = 0; k + 1 < n_node; ++k) {
            const auto i = order[k];
            (data.y[i] ? l1 : l0) += w[i];
            const double v = data.at(i, f), next = data.at(order[k + 1], f);
            if (!(next > v)) continue; // only between distinct values
            const std::size_t nl = k + 1, nr = n_node - nl;
            if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
            const double wl = l0 + l1, r0 = w0 - l0, r1 = w1 - l1, wr = r0 + r1;
            double score = 0.0;
            if (wl > 0.0) score += wl - (l0 * l0 + l1 * l1) / wl;
            if (wr > 0.0) score += wr - (r0 * r0 + r1 * r1) / wr;
            if (score < best_score - eps) {
                double t = 0.5 * (v + next);
                if (!(t < next)) t = v; // adjacent doubles: keep v on the left
                best_score = score;
                best = Split{f, t, score};
            }
        }
    }
    return best;
}

/// Best-first grower over contiguous per-feature segments: every node owns
/// the range [begin, end) of each feature's sorted index array.
class Grower {
public:
    struct Result {
        std::vector<TreeNode> nodes;
        std::vector<int> expansion_rank; // order in which a node was split, -1 if never
    };

    Grower(const SampleView& data, std::span<const std::size_t> idx, const HyperParams& hp)
        : data_(data), hp_(hp), w_(sample_weights(data, idx, hp.class_balanced)) {
        const std::size_t p = data.cols, n = idx.size();
        for (std::size_t f = 0; f < p; ++f) features_.push_back(f);
        sorted_.assign(p, std::vector<std::uint32_t>(n));
        for (std::size_t f = 0; f < p; ++f) {
            auto& s = sorted_[f];
            for (std::size_t k = 0; k < n; ++k) s[k] = static_cast<std::uint32_t>(idx[k]);
            std::stable_sort(s.begin(), s.end(),
                             [&](std::uint32_t a, std::uint32_t b) { return data.at(a, f) < data.at(b, f); });
        }
        goes_left_.assign(data.rows(), 0);
        buffer_.resize(n);
    }

    Result grow(int leaf_budget) {
        Result res;
        const std::size_t n = sorted_.empty() ? 0 : sorted_[0].size();
        if (n == 0) throw DataError("cannot grow a tree on an empty dataset");
        struct Pending {
            std::size_t node;
            std::size_t begin, end;
            Split split;
            double decrease;
        };
        std::vector<Pending> pending;
        auto cmp = [&](std::size_t a, std::size_t b) {
            if (pending[a].decrease != pending[b].decrease) return pending[a].decrease < pending[b].decrease;
            return pending[a].node > pending[b].node; // earlier node first on ties
        };
        std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cmp)> queue(cmp);

        auto make_node = [&](std::size_t begin, std::size_t end, int depth) {
            TreeNode nd;
            nd.depth = depth;
            for (std::size_t k = begin; k < end; ++k) {
                auto i = sorted_[0][k];
                int c = data_.y[i] ? 1 : 0;
                ++nd.count[c];
                nd.weight[c] += w_[i];
            }
            nd.cls = nd.weight[1] > nd.weight[0] ? 1 : 0;
            res.nodes.push_back(nd);
            res.expansion_rank.push_back(-1);
            const std::size_t id = res.nodes.size() - 1;
            if (depth >= hp_.max_depth) return;
            if (end - begin < 2 * static_cast<std::size_t>(hp_.min_samples_leaf)) return;
            const double total = nd.weight[0] + nd.weight[1];
            if (!(total > 0.0) || gini(nd.weight[0], nd.weight[1]) <= hp_.purity_threshold) return;
            auto split = scan_splits(
                data_, w_, end - begin, nd.weight[0], nd.weight[1], features_,
                [&](std::size_t f) { return std::span<const std::uint32_t>(sorted_[f].data() + begin, end - begin); },
                hp_.min_samples_leaf);
            if (!split) return;
            const double parent = total - (nd.weight[0] * nd.weight[0] + nd.weight[1] * nd.weight[1]) / total;
            pending.push_back({id, begin, end, *split, parent - split->child_impurity});
            queue.push(pending.size() - 1);
        };

        make_node(0, n, 0);
        int leaves = 1, rank = 0;
        while (!queue.empty() && leaves < leaf_budget) {
            const Pending job = pending[queue.top()];
            queue.pop();
            // Stable partition of every feature segment by the split.
            for (std::size_t k = job.begin; k < job.end; ++k) {
                auto i = sorted_[0][k];
                goes_left_[i] = data_.at(i, job.split.feature) <= job.split.threshold;
            }
            std::size_t n_left = 0;
            for (std::size_t f = 0; f < sorted_.size(); ++f) {
                auto& s = sorted_[f];
                std::size_t a = job.begin, b = 0;
                for (std::size_t k = job.begin; k < job.end; ++k) {
                    if (goes_left_[s[k]]) s[a++] = s[k];
                    else buffer_[b++] = s[k];
                }
                std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(b),
                          s.begin() + static_cast<std::ptrdiff_t>(a));
                n_left = a - job.begin;
            }
            const int depth = res.nodes[job.node].depth + 1;
            res.nodes[job.node].feature = job.split.feature;
            res.nodes[job.node].threshold = job.split.threshold;
            res.expansion_rank[job.node] = rank++;
            const int left = static_cast<int>(res.nodes.size());
            make_node(job.begin, job.begin + n_left, depth);
            const int right = static_cast<int>(res.nodes.size());
            make_node(job.begin + n_left, job.end, depth);
            res.nodes[job.node].left = left;
            res.nodes[job.node].right = right;
            ++leaves;
        }
        return res;
    }

private:
    SampleView data_;
    HyperParams hp_;
    std::vector<double> w_;
    std::vector<std::size_t> features_;
    std::vector<std::vector<std::uint32_t>> sorted_;
    std::vector<std::uint8_t> goes_left_;
    std::vector<std::uint32_t> buffer_;
};

/// Keep only the first `expansions` splits of a grown tree (its prefix under
/// a smaller leaf budget) and renumber nodes in creation order.
inline std::vector<TreeNode> truncate(const Grower::Result& full, int expansions) {
    const std::size_t n = full.nodes.size();
    std::vector<int> parent(n, -1), map(n, -1);
    for (std::size_t i = 0; i < n; ++i)
        if (!full.nodes[i].is_leaf()) {
            parent[static_cast<std::size_t>(full.nodes[i].left)] = static_cast<int>(i);
            parent[static_cast<std::size_t>(full.nodes[i].right)] = static_cast<int>(i);
        }
    auto kept_split = [&](std::size_t i) {
        return full.expansion_rank[i] >= 0 && full.expansion_rank[i] < expansions;
    };
    std::vector<TreeNode> out;
    // Creation order is parent-before-child, so one pass assigns new ids.
    for (std::size_t i = 0; i < n; ++i) {
        if (i != 0) {
            const int p = parent[i];
            if (p < 0 || map[static_cast<std::size_t>(p)] < 0 || !kept_split(static_cast<std::size_t>(p))) continue;
        }
        map[i] = static_cast<int>(out.size());
        out.push_back(full.nodes[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (map[i] < 0) continue;
        auto& nd = out[static_cast<std::size_t>(map[i])];
        if (kept_split(i)) {
            nd.left = map[static_cast<std::size_t>(full.nodes[i].left)];
            nd.right = map[static_cast<std::size_t>(full.nodes[i].right)];
        } else {
            nd.left = nd.right = -1;
            nd.feature = 0;
            nd.threshold = 0.0;
        }
    }
    return out;
}

/// Class of x under the prefix of `expansions` splits, without materializing it.
inline int predict_prefix(const Grower::Result& full, std::span<const double> x, int expansions) {
    std::size_t i = 0;
    for (;;) {
        const int r = full.expansion_rank[i];
        if (r < 0 || r >= expansions) return full.nodes[i].cls;
        const auto& nd = full.nodes[i];
        i = static_cast<std::size_t>(x[nd.feature] <= nd.threshold ? nd.left : nd.right);
    }
}

} // namespace detail

/// Exhaustive best split of the given samples over `features`.
inline std::optional<Split> best_split(const SampleView& data, std::span<const std::size_t> idx,
                                       std::span<const std::size_t> features, bool class_balanced = true,
                                       int min_samples_leaf = 1) {
    if (idx.size() < 2 * static_cast<std::size_t>(min_samples_leaf)) return std::nullopt;
    auto w = detail::sample_weights(data, idx, class_balanced);
    double w0 = 0.0, w1 = 0.0;
    for (auto i : idx) (data.y[i] ? w1 : w0) += w[i];
    std::vector<std::vector<std::uint32_t>> sorted(data.cols);
    for (auto f : features) {
        auto& s = sorted[f];
        for (auto i : idx) s.push_back(static_cast<std::uint32_t>(i));
        std::stable_sort(s.begin(), s.end(),
                         [&](std::uint32_t a, std::uint32_t b) { return data.at(a, f) < data.at(b, f); });
    }
    return detail::scan_splits(
        data, w, idx.size(), w0, w1, features,
        [&](std::size_t f) { return std::span<const std::uint32_t>(sorted[f]); }, min_samples_leaf);
}

/// Grow a tree on the rows `idx` (all rows when empty).
inline DecisionTree grow_tree(const SampleView& data, std::vector<std::string> names, const HyperParams& hp,
                              std::vector<std::size_t> idx = {}) {
    hp.validate();
    if (names.size() != data.cols) throw DataError("feature name count does not match the data");
    if (idx.empty())
        for (std::size_t i = 0; i < data.rows(); ++i) idx.push_back(i);
    detail::Grower grower(data, idx, hp);
    auto res = grower.grow(hp.max_leaf_nodes);
    DecisionTree t;
    t.nodes = std::move(res.nodes);
    t.feature_names = std::move(names);
    t.params = hp;
    return t;
}

// ---- Cross-validated grid search -------------------------------------------

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0; // positive = acceptable (1)

    void add(int truth, int pred) {
        if (truth == 1) (pred == 1 ? tp : fn)++;
        else (pred == 1 ? fp : tn)++;
    }
    std::size_t total() const { return tp + fp + tn + fn; }
    double f1() const {
        const auto d = 2 * tp + fp + fn;
        return d ? 2.0 * static_cast<double>(tp) / static_cast<double>(d) : 0.0;
    }
    double error() const {
        return total() ? static_cast<double>(fp + fn) / static_cast<double>(total()) : 0.0;
    }
};

struct GridSpec {
    std::vector<int> max_depth;
    std::vector<int> max_leaf_nodes;
    int min_samples_leaf = 1;
    bool class_balanced = true;
    double purity_threshold = 0.0;

    /// Depth 5..20 and leaf budgets 20, 40, .., 100, 200, .., 500.
    static GridSpec standard() {
        GridSpec g;
        for (int d = 5; d <= 20; ++d) g.max_depth.push_back(d);
        for (int l : {20, 40, 60, 80, 100, 200, 300, 400, 500}) g.max_leaf_nodes.push_back(l);
        return g;
    }
};

struct GridCell {
    HyperParams params;
    std::vector<double> fold_f1;    // NaN for a skipped fold
    std::vector<double> fold_error; // NaN for a skipped fold
    double mean_f1 = std::numeric_limits<double>::quiet_NaN();
    double mean_error = std::numeric_limits<double>::quiet_NaN();
};

struct TrainedModel {
    DecisionTree tree;
    GridCell selected;
    std::vector<GridCell> grid;      // every combination, depth-major
    std::size_t skipped_folds = 0;   // folds lacking a class
};

/// Stratified folds: within each class, samples are dealt round-robin in
/// input order.
inline std::vector<int> stratified_folds(std::span<const int> y, int k) {
    std::vector<int> fold(y.size());
    int next[2] = {0, 0};
    for (std::size_t i = 0; i < y.size(); ++i) {
        int c = y[i] ? 1 : 0;
        fold[i] = next[c];
        next[c] = (next[c] + 1) % k;
    }
    return fold;
}

/// Train every (depth, leaf budget) on k folds, pick the best mean f1 of the
/// acceptable class (ties: fewer leaves, then shallower), refit on all rows.
/// For each (depth, fold) one tree is grown at the largest budget; every
/// smaller budget is its best-first prefix, so it is evaluated by truncation.
inline TrainedModel grid_search_cv(const SampleView& data, const std::vector<std::string>& names,
                                   const GridSpec& grid, int k = 5, unsigned workers = 1,
                                   std::ostream* log = nullptr) {
    if (grid.max_depth.empty() || grid.max_leaf_nodes.empty()) throw ValidationError("empty hyper-parameter grid");
    if (k < 2) throw ValidationError("need at least 2 folds");
    std::size_t pos = 0;
    for (int v : data.y) pos += v == 1;
    if (pos == 0 || pos == data.rows()) throw DataError("grid search needs both classes in the dataset");

    const auto fold = stratified_folds(data.y, k);
    const int max_budget = *std::max_element(grid.max_leaf_nodes.begin(), grid.max_leaf_nodes.end());
    const std::size_t nd = grid.max_depth.size(), nl = grid.max_leaf_nodes.size();
    const auto K = static_cast<std::size_t>(k);

    // confusion[(d * K + f) * nl + l]
    std::vector<std::optional<Confusion>> conf(nd * K * nl);
    parallel_for(nd * K, workers, [&](std::size_t unit) {
        const std::size_t d = unit / K, f = unit % K;
        std::vector<std::size_t> train, test;
        std::size_t tr_pos = 0, te_pos = 0;
        for (std::size_t i = 0; i < data.rows(); ++i) {
            if (fold[i] == static_cast<int>(f)) {
                test.push_back(i);
                te_pos += data.y[i] == 1;
            } else {
                train.push_back(i);
                tr_pos += data.y[i] == 1;
            }
        }
        if (tr_pos == 0 || tr_pos == train.size() || te_pos == 0 || te_pos == test.size()) return;
        HyperParams hp;
        hp.max_depth = grid.max_depth[d];
        hp.max_leaf_nodes = max_budget;
        hp.min_samples_leaf = grid.min_samples_leaf;
        hp.class_balanced = grid.class_balanced;
        hp.purity_threshold = grid.purity_threshold;
        hp.validate();
        detail::Grower grower(data, train, hp);
        auto full = grower.grow(max_budget);
        for (std::size_t l = 0; l < nl; ++l) {
            Confusion c;
            const int expansions = grid.max_leaf_nodes[l] - 1;
            for (auto i : test)
                c.add(data.y[i], detail::predict_prefix(full, data.x.subspan(i * data.cols, data.cols), expansions));
            conf[unit * nl + l] = c;
        }
    });

    TrainedModel model;
    for (std::size_t f = 0; f < K; ++f)
        if (!conf[f * nl]) ++model.skipped_folds;
    if (model.skipped_folds && log)
        *log << "warning: " << model.skipped_folds << " fold(s) lack a class and were skipped\n";

    const GridCell* best = nullptr;
    for (std::size_t d = 0; d < nd; ++d) {
        for (std::size_t l = 0; l < nl; ++l) {
            GridCell cell;
            cell.params.max_depth = grid.max_depth[d];
            cell.params.max_leaf_nodes = grid.max_leaf_nodes[l];
            cell.params.min_samples_leaf = grid.min_samples_leaf;
            cell.params.class_balanced = grid.class_balanced;
            cell.params.purity_threshold = grid.purity_threshold;
            double sf = 0.0, se = 0.0;
            std::size_t used = 0;
            for (std::size_t f = 0; f < K; ++f) {
                const auto& c = conf[(d * K + f) * nl + l];
                if (!c) {
                    cell.fold_f1.push_back(std::numeric_limits<double>::quiet_NaN());
                    cell.fold_error.push_back(std::numeric_limits<double>::quiet_NaN());
                    continue;
                }
                cell.fold_f1.push_back(c->f1());
                cell.fold_error.push_back(c->error());
                sf += c->f1();
                se += c->error();
                ++used;
            }
            if (used) {
                cell.mean_f1 = sf / static_cast<double>(used);
                cell.mean_error = se / static_cast<double>(used);
            }
            model.grid.push_back(std::move(cell));
        }
    }
    for (const auto& cell : model.grid) {
        if (std::isnan(cell.mean_f1)) continue;
        if (!best || cell.mean_f1 > best->mean_f1 ||
            (cell.mean_f1 == best->mean_f1 &&
             (cell.params.max_leaf_nodes < best->params.max_leaf_nodes ||
              (cell.params.max_leaf_nodes == best->params.max_leaf_nodes &&
               cell.params.max_depth < best->params.max_depth))))
            best = &cell;
    }
    if (!best) throw DataError("every cross-validation fold was degenerate");
    model.selected = *best;
    model.tree = grow_tree(data, names, best->params);
    return model;
}

// ---- Leaf boxes ---------------------------------------------------------------

/// Axis-aligned region of a node: lower[f] < x[f] <= upper[f], except that a
/// lower bound inherited from the outer box (never tightened) is inclusive.
struct LeafBox {
    std::size_t node = 0;
    int cls = 0;
    std::vector<double> lower, upper;
    std::vector<bool> lower_open;

    bool contains(std::span<const double> x) const {
        for (std::size_t f = 0; f < x.size(); ++f) {
            if (lower_open[f] ? !(x[f] > lower[f]) : !(x[f] >= lower[f])) return false;
            if (!(x[f] <= upper[f])) return false;
        }
        return true;
    }
    bool empty() const {
        for (std::size_t f = 0; f < lower.size(); ++f)
            if (lower[f] > upper[f] || (lower_open[f] && lower[f] == upper[f])) return true;
        return false;
    }
};

/// Boxes of all leaves, intersected with [lo, hi].
inline std::vector<LeafBox> leaf_boxes(const DecisionTree& tree, std::span<const double> lo,
                                       std::span<const double> hi) {
    const std::size_t p = tree.feature_count();
    if (lo.size() != p || hi.size() != p) throw DataError("box dimension does not match the tree");
    std::vector<LeafBox> out;
    struct Item {
        std::size_t node;
        LeafBox box;
    };
    std::vector<Item> stack;
    LeafBox root;
    root.lower.assign(lo.begin(), lo.end());
    root.upper.assign(hi.begin(), hi.end());
    root.lower_open.assign(p, false);
    stack.push_back({0, root});
    while (!stack.empty()) {
        auto [i, box] = std::move(stack.back());
        stack.pop_back();
        const auto& nd = tree.nodes[i];
        if (nd.is_leaf()) {
            box.node = i;
            box.cls = nd.cls;
            out.push_back(std::move(box));
            continue;
        }
        LeafBox l = box, r = std::move(box);
        const auto f = nd.feature;
        l.upper[f] = std::min(l.upper[f], nd.threshold);
        if (nd.threshold >= r.lower[f]) {
            r.lower[f] = nd.threshold;
            r.lower_open[f] = true;
        }
        stack.push_back({static_cast<std::size_t>(nd.right), std::move(r)});
        stack.push_back({static_cast<std::size_t>(nd.left), std::move(l)});
    }
    std::sort(out.begin(), out.end(), [](const LeafBox& a, const LeafBox& b) { return a.node < b.node; });
    return out;
}

// ---- Text format ----------------------------------------------------------------

inline constexpr const char* kTreeMagic = "sdr-tree";
inline constexpr int kTreeVersion = 1;

/// Versioned text dump; every number round-trips exactly.
inline void save_tree(std::ostream& out, const DecisionTree& t, const GridCell* cv = nullptr) {
    using text::format_double;
    out << kTreeMagic << " " << kTreeVersion << "\n";
    out << "features " << t.feature_names.size() << "\n";
    for (const auto& n : t.feature_names) out << n << "\n";
    const auto& h = t.params;
    out << "params max_depth " << h.max_depth << " max_leaf_nodes " << h.max_leaf_nodes << " min_samples_leaf "
        << h.min_samples_leaf << " class_balanced " << (h.class_balanced ? 1 : 0) << " purity_threshold "
        << format_double(h.purity_threshold) << "\n";
    if (cv) {
        out << "cv folds " << cv->fold_f1.size() << " f1";
        for (double v : cv->fold_f1) out << " " << format_double(v);
        out << " error";
        for (double v : cv->fold_error) out << " " << format_double(v);
        out << "\n";
    }
    out << "nodes " << t.nodes.size() << "\n";
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& nd = t.nodes[i];
        out << i;
        if (nd.is_leaf()) out << " leaf " << nd.cls;
        else
            out << " branch " << t.feature_names[nd.feature] << " " << format_double(nd.threshold) << " " << nd.left
                << " " << nd.right << " " << nd.cls;
        out << " " << nd.count[0] << " " << nd.count[1] << " " << format_double(nd.weight[0]) << " "
            << format_double(nd.weight[1]) << "\n";
    }
    out << "end\n";
}

struct LoadedTree {
    DecisionTree tree;
    std::optional<GridCell> cv;
};

inline LoadedTree load_tree(std::istream& in, const std::string& source = "<tree>") {
    LoadedTree res;
    auto& t = res.tree;
    std::string raw;
    std::size_t lineno = 0;
    auto next = [&](const char* what) {
        if (!std::getline(in, raw)) throw ParseError(source, lineno + 1, what, "unexpected end of file");
        ++lineno;
        return text::split_ws(text::trim(raw));
    };
    auto num = [&](std::string_view s, const char* field) {
        auto v = text::parse_double(s);
        if (!v) throw ParseError(source, lineno, field, "expected a number, got '" + std::string(s) + "'");
        return *v;
    };
    auto integer = [&](std::string_view s, const char* field) {
        auto v = text::parse_int<long long>(s);
        if (!v) throw ParseError(source, lineno, field, "expected an integer, got '" + std::string(s) + "'");
        return *v;
    };

    auto tok = next("header");
    if (tok.size() != 2 || tok[0] != kTreeMagic) throw ParseError(source, lineno, "header", "not a tree file");
    if (integer(tok[1], "version") != kTreeVersion)
        throw ParseError(source, lineno, "version", "unsupported version " + std::string(tok[1]));
    tok = next("features");
    if (tok.size() != 2 || tok[0] != "features") throw ParseError(source, lineno, "features", "expected 'features N'");
    const auto nf = integer(tok[1], "features");
    for (long long f = 0; f < nf; ++f) {
        auto nm = next("feature name");
        if (nm.size() != 1) throw ParseError(source, lineno, "feature name", "expected one name per line");
        t.feature_names.emplace_back(nm[0]);
    }
    tok = next("params");
    if (tok.size() != 11 || tok[0] != "params") throw ParseError(source, lineno, "params", "malformed params line");
    for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
        if (tok[k] == "max_depth") t.params.max_depth = static_cast<int>(integer(tok[k + 1], "max_depth"));
        else if (tok[k] == "max_leaf_nodes")
            t.params.max_leaf_nodes = static_cast<int>(integer(tok[k + 1], "max_leaf_nodes"));
        else if (tok[k] == "min_samples_leaf")
            t.params.min_samples_leaf = static_cast<int>(integer(tok[k + 1], "min_samples_leaf"));
        else if (tok[k] == "class_balanced") t.params.class_balanced = integer(tok[k + 1], "class_balanced") != 0;
        else if (tok[k] == "purity_threshold") t.params.purity_threshold = num(tok[k + 1], "purity_threshold");
        else throw ParseError(source, lineno, "params", "unknown key '" + std::string(tok[k]) + "'");
    }
    tok = next("nodes");
    if (!tok.empty() && tok[0] == "cv") {
        if (tok.size() < 3) throw ParseError(source, lineno, "cv", "malformed cv line");
        const auto k = static_cast<std::size_t>(integer(tok[2], "folds"));
        if (tok.size() != 5 + 2 * k || tok[3] != "f1" || tok[4 + k] != "error")
            throw ParseError(source, lineno, "cv", "malformed cv line");
        GridCell cell;
        cell.params = t.params;
        double sf = 0.0, se = 0.0;
        std::size_t used = 0;
        for (std::size_t j = 0; j < k; ++j) {
            cell.fold_f1.push_back(num(tok[4 + j], "f1"));
            cell.fold_error.push_back(num(tok[5 + k + j], "error"));
            if (!std::isnan(cell.fold_f1.back())) {
                sf += cell.fold_f1.back();
                se += cell.fold_error.back();
                ++used;
            }
        }
        if (used) {
            cell.mean_f1 = sf / static_cast<double>(used);
            cell.mean_error = se / static_cast<double>(used);
        }
        res.cv = cell;
        tok = next("nodes");
    }
    if (tok.size() != 2 || tok[0] != "nodes") throw ParseError(source, lineno, "nodes", "expected 'nodes N'");
    const auto nn = integer(tok[1], "nodes");
    if (nn < 1) throw ParseError(source, lineno, "nodes", "a tree needs at least one node");
    t.nodes.resize(static_cast<std::size_t>(nn));
    for (long long i = 0; i < nn; ++i) {
        tok = next("node");
        if (tok.size() < 2 || integer(tok[0], "id") != i) throw ParseError(source, lineno, "id", "node ids must be 0..N-1 in order");
        auto& nd = t.nodes[static_cast<std::size_t>(i)];
        std::size_t k = 2;
        if (tok[1] == "leaf") {
            if (tok.size() != 7) throw ParseError(source, lineno, "node", "malformed leaf record");
            nd.cls = static_cast<int>(integer(tok[k++], "class"));
        } else if (tok[1] == "branch") {
            if (tok.size() != 11) throw ParseError(source, lineno, "node", "malformed branch record");
            auto it = std::find(t.feature_names.begin(), t.feature_names.end(), tok[k]);
            if (it == t.feature_names.end())
                throw ParseError(source, lineno, "feature", "unknown feature '" + std::string(tok[k]) + "'");
            nd.feature = static_cast<std::size_t>(it - t.feature_names.begin());
            ++k;
            nd.threshold = num(tok[k++], "threshold");
            nd.left = static_cast<int>(integer(tok[k++], "left"));
            nd.right = static_cast<int>(integer(tok[k++], "right"));
            nd.cls = static_cast<int>(integer(tok[k++], "class"));
            if (nd.left <= i || nd.right <= i || nd.left >= nn || nd.right >= nn)
                throw ParseError(source, lineno, "children", "child ids must follow their parent");
        } else {
            throw ParseError(source, lineno, "kind", "expected 'leaf' or 'branch'");
        }
        if (nd.cls != 0 && nd.cls != 1) throw ParseError(source, lineno, "class", "class must be 0 or 1");
        nd.count[0] = static_cast<std::size_t>(integer(tok[k++], "count0"));
        nd.count[1] = static_cast<std::size_t>(integer(tok[k++], "count1"));
        nd.weight[0] = num(tok[k++], "weight0");
        nd.weight[1] = num(tok[k++], "weight1");
    }
    tok = next("end");
    if (tok.size() != 1 || tok[0] != "end") throw ParseError(source, lineno, "end", "expected 'end'");
    // Depths and reachability.
    std::vector<int> parents(t.nodes.size(), 0);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& nd = t.nodes[i];
        if (nd.is_leaf()) continue;
        for (int c : {nd.left, nd.right}) {
            ++parents[static_cast<std::size_t>(c)];
            t.nodes[static_cast<std::size_t>(c)].depth = nd.depth + 1;
        }
    }
    for (std::size_t i = 1; i < parents.size(); ++i)
        if (parents[i] != 1) throw ParseError(source, lineno, "nodes", "node " + std::to_string(i) + " is not a tree child");
    return res;
}

} // namespace sdr

#endif
