#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "sdr/gdp.hpp"
#include "sdr/milp.hpp"
#include "test_support.hpp"

namespace {

using sdr::DecisionTree;
using sdr::LeafPath;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

sdr::TreeNode branch(std::size_t f, double b, int l, int r, int depth) {
    sdr::TreeNode n;
    n.feature = f;
    n.threshold = b;
    n.left = l;
    n.right = r;
    n.depth = depth;
    return n;
}

sdr::TreeNode leaf(int cls, int depth) {
    sdr::TreeNode n;
    n.cls = cls;
    n.depth = depth;
    return n;
}

// The example tree: n1 on x0 (left goes to n2, right is t1), n2 on x1 (left
// is t2, right is t3). t1 and t3 are acceptable.
DecisionTree example_tree() {
    DecisionTree t;
    t.feature_names = {"x0", "x1"};
    t.nodes = {branch(0, 4.0, 1, 2, 0), branch(1, 6.0, 3, 4, 1), leaf(1, 1), leaf(0, 2), leaf(1, 2)};
    return t;
}

std::vector<double> no_fixed(std::size_t p) { return std::vector<double>(p, kNaN); }

} // namespace

TEST(Paths, ExampleTreeAncestorSets) {
    auto paths = sdr::extract_leaf_paths(example_tree());
    ASSERT_EQ(paths.size(), 2u);
    // t1 (node 2): right of n1 only.
    EXPECT_EQ(paths[0].leaf, 2u);
    EXPECT_TRUE(paths[0].left.empty());
    ASSERT_EQ(paths[0].right.size(), 1u);
    EXPECT_EQ(paths[0].right[0].node, 0u);
    // t3 (node 4): left of n1, right of n2.
    EXPECT_EQ(paths[1].leaf, 4u);
    ASSERT_EQ(paths[1].left.size(), 1u);
    EXPECT_EQ(paths[1].left[0].node, 0u);
    ASSERT_EQ(paths[1].right.size(), 1u);
    EXPECT_EQ(paths[1].right[0].node, 1u);
    EXPECT_EQ(paths[1].depth(), 2u);
}

TEST(Paths, SingleAcceptableLeaf) {
    DecisionTree t;
    t.feature_names = {"x0"};
    t.nodes = {leaf(1, 0)};
    auto paths = sdr::extract_leaf_paths(t);
    ASSERT_EQ(paths.size(), 1u);
    EXPECT_EQ(paths[0].depth(), 0u);
    EXPECT_TRUE(paths[0].admits(std::vector<double>{123.0}));
}

TEST(Paths, NoAcceptableLeafIsAnError) {
    DecisionTree t;
    t.feature_names = {"x0"};
    t.nodes = {branch(0, 1.0, 1, 2, 0), leaf(0, 1), leaf(0, 1)};
    EXPECT_THROW(sdr::extract_leaf_paths(t), sdr::DataError);
}

TEST(Paths, RandomPointsSatisfyExactlyTheirLeafPath) {
    std::mt19937_64 rng(7);
    std::vector<double> lo{0, -5, 10}, hi{10, 5, 20};
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        auto tree = sdr::test::random_tree(rng, lo, hi, 5);
        auto acc = sdr::extract_paths(tree, 1), rej = sdr::extract_paths(tree, 0);
        EXPECT_EQ(acc.size() + rej.size(), tree.leaves().size());
        for (int k = 0; k < 500; ++k) {
            std::vector<double> x;
            for (std::size_t f = 0; f < 3; ++f) x.push_back(lo[f] + u(rng) * (hi[f] - lo[f]));
            const auto reached = tree.leaf_index(x);
            int hits = 0;
            for (const auto* set : {&acc, &rej})
                for (const auto& p : *set)
                    if (p.admits(x)) {
                        ++hits;
                        EXPECT_EQ(p.leaf, reached);
                    }
            EXPECT_EQ(hits, 1);
        }
    }
}

TEST(BigM, UnusedFeatureFallsBackToTheBox) {
    auto paths = sdr::extract_leaf_paths(example_tree());
    std::vector<double> lo{0, 0, -7}, hi{10, 10, 7};
    auto m = sdr::compute_big_m(paths, lo, hi, 0.001);
    EXPECT_EQ(m.m1[2], 7.0);
    EXPECT_DOUBLE_EQ(m.m2[2] + 0.001, -7.0);
}

TEST(BigM, SingleSplitDeactivatesOnTheWholeBox) {
    DecisionTree t;
    t.feature_names = {"x0"};
    t.nodes = {branch(0, 40.0, 1, 2, 0), leaf(1, 1), leaf(1, 1)};
    auto paths = sdr::extract_leaf_paths(t);
    std::vector<double> lo{0}, hi{100};
    const double gamma = 0.001;
    auto m = sdr::compute_big_m(paths, lo, hi, gamma);
    for (const auto& path : paths) {
        sdr::Disjunct d;
        ASSERT_FALSE(sdr::resolve_path(path, lo, hi, no_fixed(1), {0.0, gamma}, {}, d));
        for (const auto& row : sdr::big_m_rows(d, m, gamma)) {
            if (row.upper) EXPECT_GE(row.rhs - row.z_coef * 0.0, 100.0);
            else EXPECT_LE(row.rhs, 0.0);
            for (double x : sdr::test::grid_axis(0, 100, 10001)) EXPECT_TRUE(row.holds(std::vector<double>{x}, 0.0));
        }
    }
}

TEST(BigM, SharedFeatureTakesTheLargestThreshold) {
    // Left thresholds 30 and 40 on x0 inside [0, 100], and 150 outside it.
    DecisionTree t;
    t.feature_names = {"x0"};
    t.nodes = {branch(0, 40.0, 1, 4, 0), branch(0, 30.0, 2, 3, 1), leaf(1, 2), leaf(1, 2), leaf(0, 1)};
    auto paths = sdr::extract_leaf_paths(t);
    std::vector<double> lo{0}, hi{100};
    EXPECT_EQ(sdr::compute_big_m(paths, lo, hi).m1[0], std::max({100.0, 30.0, 40.0}));
    DecisionTree wide;
    wide.feature_names = {"x0"};
    wide.nodes = {branch(0, 150.0, 1, 2, 0), leaf(1, 1), leaf(0, 1)};
    EXPECT_EQ(sdr::compute_big_m(sdr::extract_leaf_paths(wide), lo, hi).m1[0], 150.0);
}

TEST(BigM, UnboundedFeatureIsAnError) {
    auto paths = sdr::extract_leaf_paths(example_tree());
    std::vector<double> lo{0, -std::numeric_limits<double>::infinity()}, hi{10, 10};
    EXPECT_THROW(sdr::compute_big_m(paths, lo, hi), sdr::DataError);
}

// Deactivation, activation and pruning soundness on 50 random trees, each
// checked on a 22^3 grid (10648 points).
TEST(BigM, PropertySuiteOnRandomTrees) {
    auto r = sdr::test::big_m_property_suite(50, 2024);
    EXPECT_EQ(r.trees, 50u);
    EXPECT_GE(r.min_grid, 10000u);
    EXPECT_EQ(r.violations, 0u);
    EXPECT_GT(r.checked_points, 50u * 10000u);
    EXPECT_GT(r.pruned, 0u);
}

TEST(Resolve, MarginShrinksEveryRange) {
    auto paths = sdr::extract_leaf_paths(example_tree());
    std::vector<double> lo{0, 0}, hi{10, 10};
    double prev_width = std::numeric_limits<double>::infinity();
    for (double alpha : {0.0, 0.5, 1.0, 1.5}) {
        sdr::Disjunct d;
        ASSERT_FALSE(sdr::resolve_path(paths[1], lo, hi, no_fixed(2), {alpha, 0.001}, {}, d));
        // t3: x0 <= 4 - alpha and x1 >= 6 + alpha + gamma.
        double w0 = d.rules[0].bound - lo[0], w1 = hi[1] - d.rules[1].bound;
        EXPECT_LT(w0 + w1, prev_width);
        prev_width = w0 + w1;
    }
}

TEST(Resolve, LargeMarginPrunesTheLeaf) {
    auto paths = sdr::extract_leaf_paths(example_tree());
    std::vector<double> lo{0, 0}, hi{10, 10};
    sdr::Disjunct d;
    // x0 <= 4 - 5 < 0 is empty on [0, 10].
    auto why = sdr::resolve_path(paths[1], lo, hi, no_fixed(2), {5.0, 0.001}, {}, d);
    ASSERT_TRUE(why);
    EXPECT_NE(why->find("empty range"), std::string::npos);
}

TEST(Resolve, DuplicateConditionsKeepTheTightest) {
    DecisionTree t;
    t.feature_names = {"x0"};
    t.nodes = {branch(0, 40.0, 1, 4, 0), branch(0, 30.0, 2, 3, 1), leaf(1, 2), leaf(0, 2), leaf(0, 1)};
    auto paths = sdr::extract_leaf_paths(t);
    sdr::Disjunct d;
    std::vector<double> lo{0}, hi{100};
    ASSERT_FALSE(sdr::resolve_path(paths[0], lo, hi, no_fixed(1), {0.0, 0.001}, {}, d));
    ASSERT_EQ(d.rules.size(), 1u);
    EXPECT_EQ(d.rules[0].bound, 30.0);
}

// ---- Models on the mesh toy ------------------------------------------------

namespace {

sdr::Network mesh() { return sdr::parse_network_string(sdr::test::kMeshToy); }

DecisionTree toy_tree(std::mt19937_64& rng, const sdr::Network& net) {
    sdr::FeatureLayout layout(net);
    auto t = sdr::test::random_tree(rng, layout.lower(), layout.upper(), 4, 0.8);
    t.feature_names = layout.names();
    return t;
}

} // namespace

TEST(Model, StructureAndDump) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    DecisionTree t;
    t.feature_names = layout.names();
    // g0 <= 200 acceptable, else unacceptable; f1-2 (feature 8) unused.
    t.nodes = {branch(0, 200.0, 1, 2, 0), leaf(1, 1), leaf(0, 1)};
    auto m = sdr::build_model(net, t, std::vector<double>{500.0}, {0.0, 0.001});
    EXPECT_EQ(m.leaf_count(), 1u);
    EXPECT_EQ(m.gen_vars.size(), 3u);
    EXPECT_EQ(m.flow_vars.size(), 5u);
    EXPECT_EQ(m.lp.var_count(), 3u + 5u + 1u);
    EXPECT_EQ(m.core_rows, 1u + 5u);
    EXPECT_EQ(m.lp.rows.size(), m.core_rows + 1u + 1u);
    std::ostringstream os;
    m.write(os);
    const auto s = os.str();
    EXPECT_NE(s.find("Minimize"), std::string::npos);
    EXPECT_NE(s.find("Binaries\n z1\n"), std::string::npos);
    EXPECT_NE(s.find("t1_g0_le: 1 p0 + 200 z1 <= 400"), std::string::npos);
    EXPECT_NE(s.find("select: 1 z1 = 1"), std::string::npos);
}

TEST(Model, LoadConditionsPruneLeaves) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    DecisionTree t;
    t.feature_names = layout.names();
    // l4 (feature 3) <= 450 acceptable, else split on g0.
    t.nodes = {branch(3, 450.0, 1, 2, 0), leaf(1, 1), branch(0, 100.0, 3, 4, 1), leaf(0, 2), leaf(1, 2)};
    auto low = sdr::build_model(net, t, std::vector<double>{400.0}, {0.0, 0.001});
    EXPECT_EQ(low.leaf_count(), 1u);
    EXPECT_EQ(low.disjuncts[0].leaf, 1u);
    ASSERT_EQ(low.pruned.size(), 1u);
    EXPECT_EQ(low.pruned[0].leaf, 4u);
    auto high = sdr::build_model(net, t, std::vector<double>{600.0}, {0.0, 0.001});
    EXPECT_EQ(high.leaf_count(), 1u);
    EXPECT_EQ(high.disjuncts[0].leaf, 4u);
    // A margin can remove the only admissible leaf.
    EXPECT_THROW(sdr::build_model(net, t, std::vector<double>{449.0}, {5.0, 0.001}), sdr::DataError);
}

TEST(Model, InputValidation) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    DecisionTree t;
    t.feature_names = layout.names();
    t.nodes = {leaf(1, 0)};
    std::vector<double> load{500.0};
    EXPECT_THROW(sdr::build_model(net, t, load, {-1.0, 0.001}), sdr::ValidationError);
    EXPECT_THROW(sdr::build_model(net, t, load, {0.0, 0.0}), sdr::ValidationError);
    EXPECT_THROW(sdr::build_model(net, t, std::vector<double>{900.0}, {0.0, 0.001}), sdr::DataError);
    t.feature_names[0] = "other";
    EXPECT_THROW(sdr::build_model(net, t, load, {0.0, 0.001}), sdr::DataError);
}

// Leaf LP solutions lie in their leaf's region; with alpha = 0 the tree
// routes them to that leaf unless they sit on a threshold.
TEST(Model, LeafLpSolutionsReachTheirLeaf) {
    auto net = mesh();
    auto ptdf = sdr::build_ptdf(net);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t solved = 0;
    for (int rep = 0; rep < 40; ++rep) {
        auto tree = toy_tree(rng, net);
        auto paths = sdr::extract_leaf_paths(tree);
        std::vector<double> load{375.0 + 250.0 * u(rng)};
        sdr::DisjunctiveModel m;
        try {
            m = sdr::build_model(net, ptdf, tree, paths, load, {0.0, 0.001});
        } catch (const sdr::DataError&) {
            continue;
        }
        for (std::size_t k = 0; k < m.leaf_count(); ++k) {
            auto lp = m.leaf_lp(k);
            // Random objective to land on different vertices.
            for (auto v : m.gen_vars) lp.cost[v] = u(rng) - 0.5;
            auto r = sdr::simplex_solve(lp);
            if (r.status != sdr::LpStatus::optimal) continue;
            ++solved;
            std::vector<double> flows;
            for (auto v : m.flow_vars) flows.push_back(r.x[v]);
            sdr::FeatureLayout layout(net);
            auto x = layout.assemble(m.dispatch(r.x), load, flows);
            EXPECT_TRUE(m.disjuncts[k].admits(x, 1e-6));
            // Feasible for the Big-M model with the matching z.
            EXPECT_LE(m.lp.max_violation(r.x), 1e-6);
            // Traversal reaches the leaf unless a left constraint binds and
            // round-off pushes the point a hair past its threshold.
            if (tree.leaf_index(x) != m.disjuncts[k].leaf) {
                bool on_threshold = false;
                for (const auto& path : paths)
                    if (path.leaf == m.disjuncts[k].leaf)
                        for (const auto& st : path.left)
                            on_threshold = on_threshold || std::abs(x[st.feature] - st.threshold) < 1e-6;
                EXPECT_TRUE(on_threshold);
            }
        }
    }
    EXPECT_GT(solved, 30u);
}

// Feasible points at a larger margin stay feasible at every smaller one.
TEST(Model, FeasibleSetsNestInAlpha) {
    auto net = mesh();
    auto ptdf = sdr::build_ptdf(net);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t checks = 0;
    for (int rep = 0; rep < 30; ++rep) {
        auto tree = toy_tree(rng, net);
        auto paths = sdr::extract_leaf_paths(tree);
        std::vector<double> load{375.0 + 250.0 * u(rng)};
        const std::vector<double> alphas{0.0, 2.0, 5.0, 10.0, 20.0};
        for (std::size_t hi = 1; hi < alphas.size(); ++hi) {
            sdr::DisjunctiveModel big;
            try {
                big = sdr::build_model(net, ptdf, tree, paths, load, {alphas[hi], 0.001});
            } catch (const sdr::DataError&) {
                continue;
            }
            auto r = sdr::branch_and_bound(big);
            if (!r.optimal()) continue;
            for (std::size_t lo = 0; lo < hi; ++lo) {
                auto small = sdr::build_model(net, ptdf, tree, paths, load, {alphas[lo], 0.001});
                // Map the solution onto the smaller-margin model by leaf id.
                std::vector<double> x(small.lp.var_count(), 0.0);
                for (std::size_t v = 0; v < small.gen_vars.size(); ++v) x[small.gen_vars[v]] = r.x[big.gen_vars[v]];
                for (std::size_t v = 0; v < small.flow_vars.size(); ++v) x[small.flow_vars[v]] = r.x[big.flow_vars[v]];
                bool mapped = false;
                for (std::size_t k = 0; k < small.leaf_count(); ++k)
                    if (small.disjuncts[k].leaf == *r.leaf) {
                        x[small.binaries[k]] = 1.0;
                        mapped = true;
                    }
                ASSERT_TRUE(mapped);
                EXPECT_LE(small.lp.max_violation(x), 1e-6);
                ++checks;
            }
        }
    }
    EXPECT_GT(checks, 20u);
}
