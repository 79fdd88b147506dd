#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "sdr/mc.hpp"
#include "sdr/scopf.hpp"
#include "test_support.hpp"

namespace {

sdr::Network mesh() { return sdr::parse_network_string(sdr::test::kMeshToy); }

double cost(const sdr::Network& net, std::span<const double> p) {
    double c = 0.0;
    for (std::size_t g = 0; g < p.size(); ++g) c += net.generators[g].cost * p[g];
    return c;
}

// Post-outage states of a result, rebuilt from the dense angle oracle.
void expect_secure(const sdr::SecurityAssessor& sa, const sdr::ScopfResult& r, std::span<const double> load) {
    const auto& net = sa.network();
    ASSERT_TRUE(r.optimal());
    ASSERT_EQ(r.corrective.size(), sa.contingencies().lines.size());
    auto inj = [&](std::span<const double> p) {
        std::vector<double> v(net.bus_count(), 0.0);
        for (std::size_t g = 0; g < p.size(); ++g) v[net.bus_index(net.generators[g].bus)] += p[g];
        for (std::size_t d = 0; d < load.size(); ++d) v[net.bus_index(net.loads[d].bus)] -= load[d];
        return v;
    };
    auto base = sdr::test::solve_angles_oracle(net, inj(r.base));
    for (std::size_t l = 0; l < net.lines.size(); ++l) EXPECT_LE(std::abs(base[l]), net.lines[l].flow_limit + 1e-6);
    for (std::size_t c = 0; c < r.corrective.size(); ++c) {
        const auto& pc = r.corrective[c];
        double sum = 0.0;
        for (std::size_t g = 0; g < pc.size(); ++g) {
            const auto& u = net.generators[g];
            EXPECT_LE(std::abs(pc[g] - r.base[g]), u.corrective_range + 1e-6);
            EXPECT_GE(pc[g], u.p_min - 1e-6);
            EXPECT_LE(pc[g], u.p_max + 1e-6);
            sum += pc[g] - r.base[g];
        }
        EXPECT_NEAR(sum, 0.0, 1e-6);
        auto reduced = net.without_line(sa.contingencies().lines[c]);
        auto f = sdr::test::solve_angles_oracle(reduced, inj(pc));
        for (std::size_t l = 0; l < reduced.lines.size(); ++l)
            EXPECT_LE(std::abs(f[l]), reduced.lines[l].flow_limit + 1e-6);
    }
}

} // namespace

TEST(Scopf, SingleGeneratorDispatchesTheLoad) {
    auto net = sdr::parse_network_string(R"(
[buses]
1 slack
2
[lines]
1 2 0.1 500
[generators]
1 800 12.5 100
[loads]
2 300 0.25
)");
    sdr::SecurityAssessor sa(net, sdr::ContingencySet{});
    auto r = sdr::solve_scopf(sa, std::vector<double>{300.0});
    ASSERT_TRUE(r.optimal());
    EXPECT_NEAR(r.base[0], 300.0, 1e-9);
    EXPECT_NEAR(r.objective, 12.5 * 300.0, 1e-6);
    EXPECT_TRUE(r.corrective.empty());
}

TEST(Scopf, LazyMatchesTheFullModel) {
    auto net = mesh();
    sdr::SecurityAssessor sa(net);
    std::size_t feasible = 0, blocks = 0;
    for (double load = 375.0; load <= 625.0; load += 10.0) {
        std::vector<double> l{load};
        auto lazy = sdr::solve_scopf(sa, l);
        auto full = sdr::solve_scopf(sa, l, {.lazy = false});
        ASSERT_EQ(lazy.status, full.status) << load;
        if (!lazy.optimal()) continue;
        ++feasible;
        blocks += lazy.modeled.size();
        EXPECT_NEAR(lazy.objective, full.objective, 1e-6 * full.objective);
        expect_secure(sa, lazy, l);
        expect_secure(sa, full, l);
        EXPECT_EQ(sa.label(lazy.base, l).label, sdr::Label::acceptable);
    }
    EXPECT_GT(feasible, 10u);
    EXPECT_GT(blocks, 0u); // some outages bind
}

TEST(Scopf, InfeasibleWhenNoSecureDispatchExists) {
    // Losing 1-4 leaves 560 MW of import capacity into bus 4.
    auto net = mesh();
    sdr::SecurityAssessor sa(net);
    auto r = sdr::solve_scopf(sa, std::vector<double>{600.0});
    EXPECT_EQ(r.status, sdr::LpStatus::infeasible);
}

TEST(Scopf, RemovingContingenciesNeverRaisesCost) {
    auto net = mesh();
    auto all = sdr::build_contingency_set(net);
    for (double load : {420.0, 480.0, 520.0, 550.0}) {
        std::vector<double> l{load};
        double prev = -1.0;
        for (std::size_t k = 0; k <= all.lines.size(); ++k) {
            sdr::ContingencySet sub;
            sub.lines.assign(all.lines.begin(), all.lines.begin() + static_cast<std::ptrdiff_t>(k));
            sdr::SecurityAssessor sa(net, sub);
            auto r = sdr::solve_scopf(sa, l);
            // Infeasible counts as infinite cost.
            const double obj = r.optimal() ? r.objective : std::numeric_limits<double>::infinity();
            if (std::isfinite(prev)) EXPECT_GE(obj, prev - 1e-6 * std::abs(prev)) << load << " " << k;
            else EXPECT_TRUE(std::isinf(obj)) << load << " " << k;
            prev = obj;
        }
    }
}

TEST(Scopf, AcceptablePointsCostAtLeastTheOptimum) {
    auto net = mesh();
    sdr::SecurityAssessor sa(net);
    std::size_t acceptable = 0;
    for (const auto& pt : sdr::test::mesh_toy_points(300, 4)) {
        if (sdr::test::lattice_label(net, pt.gen, pt.load) != 1) continue;
        ++acceptable;
        auto r = sdr::solve_scopf(sa, pt.load);
        ASSERT_TRUE(r.optimal());
        EXPECT_LE(r.objective, cost(net, pt.gen) * (1 + 1e-6));
    }
    EXPECT_GT(acceptable, 10u);
}

TEST(Scopf, Ieee39NominalAndSampledLoads) {
    const auto& net = sdr::test::ieee39();
    sdr::SecurityAssessor sa(net);
    std::vector<double> nominal;
    for (const auto& ld : net.loads) nominal.push_back(ld.nominal);
    auto r = sdr::solve_scopf(sa, nominal);
    expect_secure(sa, r, nominal);
    EXPECT_EQ(sa.label(r.base, nominal).label, sdr::Label::acceptable);

    sdr::SamplerConfig cfg;
    cfg.seed = 8;
    for (const auto& l : sdr::sample_loads(net, cfg, 10)) {
        auto s = sdr::solve_scopf(sa, l);
        ASSERT_TRUE(s.optimal());
        EXPECT_EQ(sa.label(s.base, l).label, sdr::Label::acceptable);
        // The base-case-only OPF is a relaxation.
        sdr::SecurityAssessor none(net, sdr::ContingencySet{});
        EXPECT_LE(sdr::solve_scopf(none, l).objective, s.objective + 1e-6 * s.objective);
    }
}

TEST(Scopf, ResultsCsv) {
    auto net = mesh();
    sdr::SecurityAssessor sa(net);
    std::vector<sdr::ScopfResult> rs{sdr::solve_scopf(sa, std::vector<double>{400.0}),
                                     sdr::solve_scopf(sa, std::vector<double>{600.0})};
    std::ostringstream os;
    sdr::write_scopf_csv(os, rs, 3);
    auto s = os.str();
    EXPECT_EQ(s.substr(0, s.find('\n')), "realization,status,objective,p0,p1,p2");
    EXPECT_NE(s.find("\n1,infeasible,,,,\n"), std::string::npos);
    EXPECT_NE(s.find("\n0,optimal,"), std::string::npos);
}
