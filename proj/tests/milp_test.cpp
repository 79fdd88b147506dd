#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdr/mc.hpp"
#include "sdr/milp.hpp"
#include "test_support.hpp"

namespace {

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

sdr::Network mesh() { return sdr::parse_network_string(sdr::test::kMeshToy); }

bool close_rel(double a, double b, double rel = 1e-6) { return std::abs(a - b) <= rel * std::max(1.0, std::abs(b)); }

void expect_valid(const sdr::DisjunctiveModel& m, const sdr::MilpResult& r) {
    ASSERT_TRUE(r.optimal());
    EXPECT_LE(m.lp.max_violation(r.x), 1e-6);
    int ones = 0;
    for (auto z : m.binaries) {
        EXPECT_TRUE(std::abs(r.x[z]) < 1e-6 || std::abs(r.x[z] - 1.0) < 1e-6);
        ones += std::abs(r.x[z] - 1.0) < 1e-6;
    }
    EXPECT_EQ(ones, 1);
    ASSERT_TRUE(r.disjunct);
    EXPECT_EQ(r.x[m.binaries[*r.disjunct]], 1.0);
    EXPECT_EQ(*r.leaf, m.disjuncts[*r.disjunct].leaf);
}

} // namespace

TEST(Milp, SingleLeafEqualsItsLp) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    sdr::DecisionTree t;
    t.feature_names = layout.names();
    t.nodes = {branch(0, 150.0, 1, 2, 0), leaf(1, 1), leaf(0, 1)};
    auto m = sdr::build_model(net, t, std::vector<double>{500.0}, {0.0, 0.001});
    ASSERT_EQ(m.leaf_count(), 1u);
    auto lp = sdr::simplex_solve(m.leaf_lp(0));
    auto bb = sdr::branch_and_bound(m);
    auto en = sdr::enumerate_leaves(m);
    ASSERT_EQ(lp.status, sdr::LpStatus::optimal);
    expect_valid(m, bb);
    EXPECT_TRUE(close_rel(bb.objective, lp.objective));
    EXPECT_TRUE(close_rel(en.objective, lp.objective));
    EXPECT_EQ(en.nodes, 1u);
    // g0 is the cheapest unit at 20 $/MWh and is capped by the rule.
    EXPECT_NEAR(m.dispatch(bb.x)[0], 150.0, 1e-6);
}

TEST(Milp, InfeasibleLeafIsSkipped) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    sdr::DecisionTree t;
    t.feature_names = layout.names();
    // Leaf 1: g0 <= 10 and g1 <= 10 leaves g2 <= 300 short of a 500 MW load.
    // Leaf 4: g0 > 10 (feasible).
    t.nodes = {branch(0, 10.0, 1, 4, 0), branch(1, 10.0, 2, 3, 1), leaf(1, 2), leaf(0, 2), leaf(1, 1)};
    auto m = sdr::build_model(net, t, std::vector<double>{500.0}, {0.0, 0.001});
    ASSERT_EQ(m.leaf_count(), 2u);
    EXPECT_NE(sdr::simplex_solve(m.leaf_lp(0)).status, sdr::LpStatus::optimal);
    auto bb = sdr::branch_and_bound(m);
    auto en = sdr::enumerate_leaves(m);
    expect_valid(m, bb);
    ASSERT_TRUE(en.optimal());
    EXPECT_EQ(*bb.leaf, 4u);
    EXPECT_EQ(*en.leaf, 4u);
    EXPECT_TRUE(close_rel(bb.objective, en.objective));
}

TEST(Milp, AllLeavesInfeasible) {
    auto net = mesh();
    sdr::FeatureLayout layout(net);
    sdr::DecisionTree t;
    t.feature_names = layout.names();
    t.nodes = {branch(0, 10.0, 1, 2, 0), branch(1, 10.0, 3, 4, 1), leaf(0, 1), leaf(1, 2), leaf(0, 2)};
    auto m = sdr::build_model(net, t, std::vector<double>{500.0}, {0.0, 0.001});
    EXPECT_EQ(sdr::branch_and_bound(m).status, sdr::MilpStatus::infeasible);
    EXPECT_EQ(sdr::enumerate_leaves(m).status, sdr::MilpStatus::infeasible);
}

// Branch and bound against enumeration on random trees over the mesh toy.
TEST(Milp, MatchesEnumerationOnRandomToyInstances) {
    auto net = mesh();
    auto ptdf = sdr::build_ptdf(net);
    sdr::FeatureLayout layout(net);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t instances = 0, feasible = 0;
    while (instances < 150) {
        auto tree = sdr::test::random_tree(rng, layout.lower(), layout.upper(), 5, 0.85);
        tree.feature_names = layout.names();
        auto paths = sdr::extract_leaf_paths(tree);
        std::vector<double> load{375.0 + 250.0 * u(rng)};
        const double alpha = std::floor(20.0 * u(rng));
        sdr::DisjunctiveModel m;
        try {
            m = sdr::build_model(net, ptdf, tree, paths, load, {alpha, 0.001});
        } catch (const sdr::DataError&) {
            continue;
        }
        ++instances;
        auto bb = sdr::branch_and_bound(m);
        auto en = sdr::enumerate_leaves(m);
        ASSERT_EQ(bb.status, en.status);
        if (!bb.optimal()) continue;
        ++feasible;
        expect_valid(m, bb);
        EXPECT_TRUE(close_rel(bb.objective, en.objective)) << bb.objective << " vs " << en.objective;
        EXPECT_LE(bb.root_bound, bb.objective + 1e-6);
        // Determinism.
        auto again = sdr::branch_and_bound(m);
        EXPECT_EQ(again.objective, bb.objective);
        EXPECT_EQ(again.leaf, bb.leaf);
    }
    EXPECT_GT(feasible, 50u);
}

// The same cross-check on the 39-bus system with random trees over its
// 77 features and sampled loads.
TEST(Milp, MatchesEnumerationOnIeee39) {
    const auto& net = sdr::test::ieee39();
    auto ptdf = sdr::build_ptdf(net);
    sdr::FeatureLayout layout(net);
    std::mt19937_64 rng(3);
    sdr::SamplerConfig cfg;
    cfg.seed = 17;
    auto loads = sdr::sample_loads(net, cfg, 60);
    std::size_t feasible = 0, multi = 0;
    for (std::size_t i = 0; i < loads.size(); ++i) {
        // Random feature boxes narrowed toward typical flows keep leaves feasible.
        auto tree = sdr::test::random_tree(rng, layout.lower(), layout.upper(), 6, 0.9);
        tree.feature_names = layout.names();
        auto paths = sdr::extract_leaf_paths(tree);
        sdr::DisjunctiveModel m;
        try {
            m = sdr::build_model(net, ptdf, tree, paths, loads[i], {0.0, 0.001});
        } catch (const sdr::DataError&) {
            continue;
        }
        auto bb = sdr::branch_and_bound(m);
        auto en = sdr::enumerate_leaves(m);
        ASSERT_EQ(bb.status, en.status);
        if (!bb.optimal()) continue;
        ++feasible;
        multi += m.leaf_count() > 1;
        expect_valid(m, bb);
        EXPECT_TRUE(close_rel(bb.objective, en.objective));
    }
    EXPECT_GT(feasible, 10u);
    EXPECT_GT(multi, 5u);
}
