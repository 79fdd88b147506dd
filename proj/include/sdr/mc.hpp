#ifndef SDR_MC_HPP
#define SDR_MC_HPP

// Monte Carlo operating points: Gaussian-copula loads with Kumaraswamy
// marginals, uniform generation, capacity-weighted mismatch balancing.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/features.hpp"
#include "sdr/net.hpp"
#include "sdr/parallel.hpp"
#include "sdr/rng.hpp"

namespace sdr {

struct SamplerConfig {
    double kumaraswamy_a = 1.6;
    double kumaraswamy_b = 2.8;
    double pearson_rho = 0.75;
    double load_deviation = 0.25;
    std::uint64_t seed = 1;

    void validate() const {
        if (!(kumaraswamy_a > 0.0) || !(kumaraswamy_b > 0.0))
            throw ValidationError("Kumaraswamy shape parameters must be positive");
        if (!(std::abs(pearson_rho) < 1.0)) throw ValidationError("|rho| must be < 1");
        if (!(load_deviation > 0.0 && load_deviation < 1.0))
            throw ValidationError("load deviation must lie in (0, 1)");
    }
};

inline double kumaraswamy_cdf(double x, double a, double b) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    return 1.0 - std::pow(1.0 - std::pow(x, a), b);
}

/// Inverse of F(x) = 1 - (1 - x^a)^b.
inline double kumaraswamy_inverse_cdf(double u, double a, double b) {
    if (!(u >= 0.0 && u <= 1.0)) throw DataError("probability outside [0, 1]");
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    return std::pow(1.0 - std::pow(1.0 - u, 1.0 / b), 1.0 / a);
}

inline double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct OperatingPoint {
    std::vector<double> gen_mw;
    std::vector<double> load_mw;
    std::vector<double> flow_mw;

    std::vector<double> features() const {
        std::vector<double> x;
        x.reserve(gen_mw.size() + load_mw.size() + flow_mw.size());
        x.insert(x.end(), gen_mw.begin(), gen_mw.end());
        x.insert(x.end(), load_mw.begin(), load_mw.end());
        x.insert(x.end(), flow_mw.begin(), flow_mw.end());
        return x;
    }
};

/// One correlated load vector. The equicorrelated Gaussian vector is built
/// from a common factor: z_i = sqrt(rho) w + sqrt(1 - rho) e_i.
inline std::vector<double> draw_loads(const Network& net, const SamplerConfig& cfg, RandomStream& rng) {
    const double common = rng.normal();
    const double wc = std::sqrt(cfg.pearson_rho), wi = std::sqrt(1.0 - cfg.pearson_rho);
    std::vector<double> loads(net.loads.size());
    for (std::size_t d = 0; d < loads.size(); ++d) {
        double z = wc * common + wi * rng.normal();
        double x = kumaraswamy_inverse_cdf(standard_normal_cdf(z), cfg.kumaraswamy_a, cfg.kumaraswamy_b);
        loads[d] = net.loads[d].nominal * (1.0 - cfg.load_deviation + 2.0 * cfg.load_deviation * x);
    }
    return loads;
}

/// `n` load realizations; realization i depends only on (seed, i).
inline std::vector<std::vector<double>> sample_loads(const Network& net, const SamplerConfig& cfg,
                                                     std::size_t n) {
    cfg.validate();
    if (n < 1) throw DataError("sample_loads needs n >= 1");
    std::vector<std::vector<double>> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        RandomStream rng(cfg.seed, streams::kLoads, i);
        out[i] = draw_loads(net, cfg, rng);
    }
    return out;
}

/// Spread the mismatch sum(load) - sum(gen) over the generators in
/// proportion to capacity. Returns nullopt when a unit leaves [0, p_max].
inline std::optional<std::vector<double>> balance_generation(const Network& net, std::vector<double> gen,
                                                             std::span<const double> loads) {
    double total_load = 0.0, total_gen = 0.0;
    for (double l : loads) total_load += l;
    for (double g : gen) total_gen += g;
    const double mismatch = total_load - total_gen;
    const double capacity = net.total_capacity();
    for (std::size_t g = 0; g < gen.size(); ++g) {
        gen[g] += mismatch * net.generators[g].p_max / capacity;
        if (gen[g] < net.generators[g].p_min || gen[g] > net.generators[g].p_max) return std::nullopt;
    }
    return gen;
}

/// Uniform initial dispatch followed by balancing; nullopt is a rejection.
inline std::optional<std::vector<double>> sample_generation(const Network& net, std::span<const double> loads,
                                                            RandomStream& rng) {
    std::vector<double> gen(net.generators.size());
    for (std::size_t g = 0; g < gen.size(); ++g)
        gen[g] = rng.uniform(net.generators[g].p_min, net.generators[g].p_max);
    return balance_generation(net, std::move(gen), loads);
}

inline OperatingPoint make_point(const Network& net, const PtdfMatrix& ptdf, std::vector<double> gen,
                                 std::vector<double> loads) {
    OperatingPoint p;
    p.flow_mw = dc_flows(ptdf, bus_injections(net, gen, loads));
    p.gen_mw = std::move(gen);
    p.load_mw = std::move(loads);
    return p;
}

struct GenerationStats {
    std::size_t accepted = 0;
    std::size_t attempts = 0;
    double rejection_rate() const {
        return attempts ? 1.0 - static_cast<double>(accepted) / static_cast<double>(attempts) : 0.0;
    }
};

/// Exactly `n` accepted points. Point i retries within its own stream until
/// accepted. The run aborts after 1000 n attempts in total.
inline std::vector<OperatingPoint> generate_dataset(const Network& net, const PtdfMatrix& ptdf,
                                                    const SamplerConfig& cfg, std::size_t n,
                                                    GenerationStats* stats = nullptr, unsigned workers = 1) {
    cfg.validate();
    const std::size_t cap = 1000 * std::max<std::size_t>(n, 1);
    std::vector<OperatingPoint> out(n);
    std::vector<std::size_t> attempts(n, 0);
    parallel_for(n, workers, [&](std::size_t i) {
        RandomStream rng(cfg.seed, streams::kDataset, i);
        for (std::size_t k = 0; k < cap; ++k) {
            ++attempts[i];
            auto loads = draw_loads(net, cfg, rng);
            auto gen = sample_generation(net, loads, rng);
            if (gen) {
                out[i] = make_point(net, ptdf, std::move(*gen), std::move(loads));
                return;
            }
        }
    });
    GenerationStats st;
    st.accepted = n;
    for (auto a : attempts) st.attempts += a;
    for (std::size_t i = 0; i < n; ++i)
        if (out[i].gen_mw.empty() || st.attempts > cap)
            throw DataError("sampler exceeded " + std::to_string(cap) + " attempts");
    if (stats) *stats = st;
    return out;
}

} // namespace sdr

#endif
