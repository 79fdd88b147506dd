#include <gtest/gtest.h>

#include <sstream>

#include "sdr/dataset.hpp"
#include "sdr/label.hpp"
#include "test_support.hpp"

namespace {

using sdr::test::ieee39;

const char* kTriangle = R"(
[buses]
1
2
3 slack
[lines]
1 2 0.1 250
2 3 0.1 250
1 3 0.1 250
[generators]
1 300 20 50
3 300 30 50
[loads]
2 100
)";

TEST(Contingencies, TriangleRadialAndIeee39) {
    auto tri = sdr::parse_network_string(kTriangle);
    EXPECT_EQ(sdr::build_contingency_set(tri).lines.size(), 3u);
    auto two = sdr::parse_network_string("[buses]\n1 slack\n2\n[lines]\n1 2 0.2 100\n");
    EXPECT_TRUE(sdr::build_contingency_set(two).lines.empty());

    // Oracle: remove each line and test connectivity directly.
    const auto& net = ieee39();
    auto set = sdr::build_contingency_set(net);
    std::vector<std::size_t> expected;
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        std::vector<bool> removed(net.lines.size(), false);
        removed[l] = true;
        if (net.connected(removed)) expected.push_back(l);
    }
    EXPECT_EQ(set.lines, expected);
    EXPECT_EQ(set.lines.size(), 35u); // 11 radial generator connections
}

TEST(ContingencyFeasible, LightlyLoadedTriangleNeedsNoRedispatch) {
    auto net = sdr::parse_network_string(kTriangle);
    sdr::SecurityAssessor sa(net);
    std::vector<double> gen{50, 50}, load{100};
    for (std::size_t c = 0; c < 3; ++c) EXPECT_TRUE(sa.contingency_feasible(c, gen, load));
    auto s = sa.label(gen, load);
    EXPECT_EQ(s.label, sdr::Label::acceptable);
    EXPECT_FALSE(s.failing_line);
    EXPECT_EQ(s.failing_contingency(net), "");
}

TEST(ContingencyFeasible, TwoPathToyRedispatchRangeDecides) {
    // A double circuit 1-3 carries most of the load. Losing one circuit puts
    // 240 MW on the survivor (limit 200); moving 100 MW to G1 at bus 2 only
    // brings it down to 206.7 MW, moving 250 MW brings it to 156.7 MW.
    const char* text = R"(
[buses]
1 slack
2
3
[lines]
1 3 0.1 200
1 3 0.1 200
2 3 0.1 400
1 2 0.1 400
[generators]
1 400 10 100
2 400 10 100
[loads]
3 360
)";
    auto net = sdr::parse_network_string(text);
    sdr::SecurityAssessor sa(net);
    std::vector<double> gen{360, 0}, load{360};
    auto pos = sa.position_of(0);
    EXPECT_EQ(sa.contingency_feasible(pos, gen, load), sdr::test::lattice_remedy_exists(net, 0, gen, load));
    EXPECT_FALSE(sa.contingency_feasible(pos, gen, load));
    // A wider corrective range lets G1 pick up the whole load over 2-3.
    auto wide = net;
    for (auto& g : wide.generators) g.corrective_range = 250;
    sdr::SecurityAssessor sw(wide);
    EXPECT_TRUE(sw.contingency_feasible(pos, gen, load));
    EXPECT_TRUE(sdr::test::lattice_remedy_exists(wide, 0, gen, load));
}

TEST(LabelPoint, BaseViolationIsUnacceptable) {
    auto net = sdr::parse_network_string(kTriangle);
    sdr::SecurityAssessor sa(net);
    auto s = sa.label(std::vector<double>{300, 300}, std::vector<double>{600});
    ASSERT_EQ(s.label, sdr::Label::unacceptable);
    EXPECT_TRUE(s.base_violation);
    EXPECT_EQ(s.failing_contingency(net), "base");
}

TEST(LabelPoint, MeshToyMatchesLatticeOracle) {
    auto net = sdr::parse_network_string(sdr::test::kMeshToy);
    sdr::SecurityAssessor sa(net);
    int ones = 0, outage_failures = 0;
    for (const auto& p : sdr::test::mesh_toy_points(200, 42)) {
        auto s = sa.label(p.gen, p.load);
        int expected = sdr::test::lattice_label(net, p.gen, p.load);
        ASSERT_EQ(static_cast<int>(s.label), expected) << p.gen[0] << " " << p.gen[1] << " " << p.gen[2];
        ones += expected;
        outage_failures += s.failing_line.has_value();
    }
    // The toy must exercise every branch of the labeler.
    EXPECT_GT(ones, 0);
    EXPECT_LT(ones, 200);
    EXPECT_GT(outage_failures, 0);
}

TEST(LabelPoint, ConjunctionOfPerContingencyAnswersOnIeee39) {
    const auto& net = ieee39();
    sdr::SecurityAssessor sa(net);
    auto pts = sdr::generate_dataset(net, sa.base_ptdf(), sdr::SamplerConfig{}, 100);
    for (const auto& p : pts) {
        bool expected = sdr::check_limits(net, sdr::test::solve_angles_oracle(
                                                   net, sdr::bus_injections(net, p.gen_mw, p.load_mw)))
                            .ok;
        for (std::size_t c = 0; expected && c < sa.contingencies().lines.size(); ++c)
            expected = sa.contingency_feasible(c, p.gen_mw, p.load_mw);
        EXPECT_EQ(sa.label(p).label == sdr::Label::acceptable, expected);
    }
}

TEST(LabelPoint, MonotoneInCorrectiveRangeAndLimits) {
    auto net = sdr::parse_network_string(sdr::test::kMeshToy);
    auto wider = net, looser = net;
    for (auto& g : wider.generators) g.corrective_range *= 2;
    for (auto& l : looser.lines) l.flow_limit *= 1.2;
    sdr::SecurityAssessor a(net), b(wider), c(looser);
    for (const auto& p : sdr::test::mesh_toy_points(300, 7)) {
        if (a.label(p.gen, p.load).label != sdr::Label::acceptable) continue;
        EXPECT_EQ(b.label(p.gen, p.load).label, sdr::Label::acceptable);
        EXPECT_EQ(c.label(p.gen, p.load).label, sdr::Label::acceptable);
    }
}

TEST(LabelDataset, EmptyOneAndWorkerIndependent) {
    const auto& net = ieee39();
    sdr::SecurityAssessor sa(net);
    EXPECT_TRUE(sdr::label_dataset(sa, std::span<const sdr::OperatingPoint>{}).empty());

    auto pts = sdr::generate_dataset(net, sa.base_ptdf(), sdr::SamplerConfig{}, 1000);
    auto serial = sdr::label_dataset(sa, pts, 1);
    auto pooled = sdr::label_dataset(sa, pts, 8);
    std::ostringstream s1, s8;
    sdr::write_dataset_csv(s1, net, pts, serial);
    sdr::write_dataset_csv(s8, net, pts, pooled);
    EXPECT_EQ(s1.str(), s8.str());

    auto it = std::find_if(serial.begin(), serial.end(),
                           [](const auto& s) { return s.label == sdr::Label::acceptable; });
    ASSERT_NE(it, serial.end());
    std::vector<sdr::OperatingPoint> one{pts[static_cast<std::size_t>(it - serial.begin())]};
    auto lab = sdr::label_dataset(sa, one);
    ASSERT_EQ(lab.size(), 1u);
    EXPECT_EQ(lab[0].label, sdr::Label::acceptable);
}

TEST(DatasetCsv, RoundTripIsExact) {
    const auto& net = ieee39();
    sdr::SecurityAssessor sa(net);
    auto pts = sdr::generate_dataset(net, sa.base_ptdf(), sdr::SamplerConfig{}, 50);
    auto lab = sdr::label_dataset(sa, pts);
    std::stringstream ss;
    sdr::write_dataset_csv(ss, net, pts, lab);
    auto ds = sdr::read_dataset_csv(ss);
    ASSERT_TRUE(ds.labeled());
    ASSERT_EQ(ds.rows(), 50u);
    EXPECT_EQ(ds.cols(), 77u);
    auto back = sdr::dataset_points(net, ds);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        EXPECT_EQ(back[i].features(), pts[i].features());
        EXPECT_EQ(ds.labels[i], static_cast<int>(lab[i].label));
        EXPECT_EQ(ds.failing[i], lab[i].failing_contingency(net));
    }
    std::istringstream bad("g0,g1\n1,oops\n");
    EXPECT_THROW(sdr::read_dataset_csv(bad), sdr::ParseError);
}

} // namespace
