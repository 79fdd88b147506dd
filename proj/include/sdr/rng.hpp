#ifndef SDR_RNG_HPP
#define SDR_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace sdr {

/// Keyed random stream: a std::mt19937_64 whose state is derived from
/// (seed, stream tag, index) through std::seed_seq. Each sample owns its own
/// stream, so results do not depend on scheduling or worker count. Uniform
/// and normal variates are produced by explicit formulas (not the
/// implementation-defined std distributions) to keep outputs portable.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
        engine_.seed(seq);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform on [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller (one variate per call).
    double normal() {
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

namespace streams {
inline constexpr std::uint64_t kDataset = 0x5344522d44415441ULL; // training points
inline constexpr std::uint64_t kLoads = 0x5344522d4c4f4144ULL;   // load-only draws
} // namespace streams

} // namespace sdr

#endif
