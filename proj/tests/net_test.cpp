#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sdr/net.hpp"
#include "test_support.hpp"

namespace {

using sdr::test::ieee39;
using sdr::test::solve_angles_oracle;

const char* kTriangle = R"(
[buses]
1
2
3 slack
[lines]
1 2 0.1 500
2 3 0.1 500
1 3 0.1 500
[generators]
1 300 20 50
[loads]
2 100
)";

TEST(LoadNetwork, BundledIeee39) {
    const auto& net = ieee39();
    EXPECT_EQ(net.buses.size(), 39u);
    EXPECT_EQ(net.generators.size(), 10u);
    EXPECT_EQ(net.lines.size(), 46u);
    EXPECT_EQ(net.slack_bus, net.generators[9].bus); // G9 hosts the slack
    EXPECT_DOUBLE_EQ(net.generators[9].p_max, 4000.0);
    double total = 0.0;
    for (const auto& l : net.loads) total += l.nominal;
    EXPECT_NEAR(total, 6254.23, 1e-9);
    for (const auto& ln : net.lines) EXPECT_DOUBLE_EQ(ln.flow_limit, 2000.0);
    for (const auto& g : net.generators) EXPECT_DOUBLE_EQ(g.corrective_range, 100.0);
}

TEST(LoadNetwork, TwoBusToy) {
    auto net = sdr::parse_network_string("[buses]\n1 slack\n2\n[lines]\n1 2 0.2 100\n");
    EXPECT_EQ(net.buses.size(), 2u);
    EXPECT_EQ(net.lines.size(), 1u);
}

TEST(LoadNetwork, RejectsZeroReactance) {
    EXPECT_THROW(sdr::parse_network_string("[buses]\n1 slack\n2\n[lines]\n1 2 0 100\n"), sdr::ValidationError);
}

TEST(LoadNetwork, RejectsDisconnectedGraph) {
    EXPECT_THROW(sdr::parse_network_string("[buses]\n1 slack\n2\n3\n[lines]\n1 2 0.1 100\n"),
                 sdr::ValidationError);
}

TEST(LoadNetwork, ParseErrorNamesLineAndField) {
    try {
        sdr::parse_network_string("[buses]\n1 slack\n2\n[lines]\n1 2 abc 100\n");
        FAIL() << "expected ParseError";
    } catch (const sdr::ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
        EXPECT_EQ(e.field(), "reactance_pu");
    }
    EXPECT_THROW(sdr::parse_network_string("[buses]\n1\n"), sdr::ValidationError); // no slack
    EXPECT_THROW(sdr::parse_network_string("[nodes]\n1\n"), sdr::ParseError);
}

TEST(Ptdf, SlackColumnIsZero) {
    const auto& net = ieee39();
    auto ptdf = sdr::build_ptdf(net);
    for (std::size_t l = 0; l < ptdf.lines(); ++l) EXPECT_EQ(ptdf(l, net.slack_index()), 0.0);
}

TEST(Ptdf, TriangleSplitsTwoThirdsOneThird) {
    auto net = sdr::parse_network_string(kTriangle);
    auto ptdf = sdr::build_ptdf(net);
    std::vector<double> inj{100.0, -100.0, 0.0};
    auto flows = sdr::dc_flows(ptdf, inj);
    // Oracle: direct solve of B theta = P and flows from angle differences.
    auto oracle = solve_angles_oracle(net, inj);
    for (std::size_t l = 0; l < 3; ++l) EXPECT_NEAR(flows[l], oracle[l], 1e-9);
    EXPECT_NEAR(flows[0], 200.0 / 3.0, 1e-9);        // 1-2
    EXPECT_NEAR(flows[1], -100.0 / 3.0, 1e-9);       // 2-3 carries 3->2
    EXPECT_NEAR(flows[2], 100.0 / 3.0, 1e-9);        // 1-3
}

TEST(Ptdf, SingleLineCarriesInjection) {
    auto net = sdr::parse_network_string("[buses]\n1\n2 slack\n[lines]\n1 2 0.2 100\n");
    auto flows = sdr::dc_flows(sdr::build_ptdf(net), std::vector<double>{42.0, -42.0});
    EXPECT_NEAR(flows[0], 42.0, 1e-12);
}

TEST(Ptdf, UnitTransfersMatchDirectSolveOnIeee39) {
    const auto& net = ieee39();
    auto ptdf = sdr::build_ptdf(net);
    for (std::size_t b = 0; b < net.bus_count(); ++b) {
        std::vector<double> inj(net.bus_count(), 0.0);
        inj[b] += 1.0;
        inj[net.slack_index()] -= 1.0;
        auto oracle = solve_angles_oracle(net, inj);
        for (std::size_t l = 0; l < net.lines.size(); ++l) EXPECT_NEAR(ptdf(l, b), oracle[l], 1e-8);
    }
}

TEST(DcFlows, RandomBalancedInjectionMatchesDirectSolve) {
    const auto& net = ieee39();
    auto ptdf = sdr::build_ptdf(net);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-500.0, 500.0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> inj(net.bus_count());
        double sum = 0.0;
        for (auto& p : inj) sum += (p = u(rng));
        inj[5] -= sum;
        double s2 = 0.0;
        for (double p : inj) s2 += p;
        inj[5] -= s2; // round-off
        auto flows = sdr::dc_flows(ptdf, inj);
        auto oracle = solve_angles_oracle(net, inj);
        for (std::size_t l = 0; l < flows.size(); ++l)
            EXPECT_LE(std::abs(flows[l] - oracle[l]), 1e-8 * std::max(1.0, std::abs(oracle[l])));
    }
}

TEST(DcFlows, LinearityAndSuperposition) {
    const auto& net = ieee39();
    auto ptdf = sdr::build_ptdf(net);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-300.0, 300.0);
    auto balanced = [&] {
        std::vector<double> v(net.bus_count());
        double s = 0.0;
        for (std::size_t i = 1; i < v.size(); ++i) s += (v[i] = u(rng));
        v[0] = -s;
        return v;
    };
    auto p1 = balanced(), p2 = balanced();
    std::vector<double> sum(p1.size()), scaled(p1.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
        sum[i] = p1[i] + p2[i];
        scaled[i] = 2.5 * p1[i];
    }
    auto f1 = sdr::dc_flows(ptdf, p1), f2 = sdr::dc_flows(ptdf, p2);
    auto fs = sdr::dc_flows(ptdf, sum), fk = sdr::dc_flows(ptdf, scaled);
    for (std::size_t l = 0; l < f1.size(); ++l) {
        EXPECT_NEAR(fs[l], f1[l] + f2[l], 1e-9 * (std::abs(f1[l]) + std::abs(f2[l]) + 1.0));
        EXPECT_NEAR(fk[l], 2.5 * f1[l], 1e-9 * (std::abs(f1[l]) + 1.0));
    }
    auto zero = sdr::dc_flows(ptdf, std::vector<double>(net.bus_count(), 0.0));
    for (double f : zero) EXPECT_EQ(f, 0.0);
}

TEST(DcFlows, RejectsUnbalancedInjection) {
    const auto& net = ieee39();
    auto ptdf = sdr::build_ptdf(net);
    std::vector<double> inj(net.bus_count(), 0.0);
    inj[3] = 1e-3;
    EXPECT_THROW(sdr::dc_flows(ptdf, inj), sdr::DataError);
    EXPECT_THROW(sdr::dc_flows(ptdf, std::vector<double>(3, 0.0)), sdr::DataError);
}

TEST(CheckLimits, Boundaries) {
    const auto& net = ieee39();
    std::vector<double> flows(net.lines.size(), 0.0);
    auto ok = sdr::check_limits(net, flows);
    EXPECT_TRUE(ok.ok);
    EXPECT_TRUE(ok.violations.empty());

    flows[7] = 2000.0;
    flows[8] = -2000.0;
    EXPECT_TRUE(sdr::check_limits(net, flows).ok);

    flows[12] = 2000.1;
    auto bad = sdr::check_limits(net, flows);
    EXPECT_FALSE(bad.ok);
    ASSERT_EQ(bad.violations.size(), 1u);
    EXPECT_EQ(bad.violations[0].line, 12u);
    EXPECT_NEAR(bad.violations[0].excess, 0.1, 1e-9);
}

TEST(Bridges, RemovingBridgeBreaksPtdfRemovingOtherLineDoesNot) {
    const auto& net = ieee39();
    auto bridges = sdr::find_bridges(net);
    ASSERT_FALSE(bridges.empty());
    std::vector<bool> is_bridge(net.lines.size(), false);
    for (auto b : bridges) is_bridge[b] = true;
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        auto reduced = net.without_line(l);
        if (is_bridge[l]) EXPECT_THROW(sdr::build_ptdf(reduced), sdr::ValidationError) << l;
        else EXPECT_NO_THROW(sdr::build_ptdf(reduced)) << l;
    }
}

} // namespace
