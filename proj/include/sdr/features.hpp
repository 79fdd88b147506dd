#ifndef SDR_FEATURES_HPP
#define SDR_FEATURES_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdr/net.hpp"

namespace sdr {

enum class FeatureKind { generator, load, flow };

struct FeatureRef {
    FeatureKind kind;
    std::size_t index; // generator, load or line index
};

/// Ordered feature vector layout: generators, then loads, then line flows.
/// Names follow the dataset CSV header (g0.., l<bus>.., f<from>-<to>..).
class FeatureLayout {
public:
    FeatureLayout() = default;

    explicit FeatureLayout(const Network& net) {
        for (std::size_t g = 0; g < net.generators.size(); ++g) {
            refs_.push_back({FeatureKind::generator, g});
            names_.push_back("g" + std::to_string(g));
        }
        for (std::size_t d = 0; d < net.loads.size(); ++d) {
            refs_.push_back({FeatureKind::load, d});
            names_.push_back("l" + std::to_string(net.loads[d].bus));
        }
        std::vector<std::string> seen;
        for (std::size_t l = 0; l < net.lines.size(); ++l) {
            refs_.push_back({FeatureKind::flow, l});
            std::string name = "f" + net.lines[l].name();
            // Parallel circuits get a suffix so names stay unique.
            int dup = 0;
            for (const auto& s : seen)
                if (s == name) ++dup;
            seen.push_back(name);
            names_.push_back(dup ? name + "#" + std::to_string(dup + 1) : name);
        }
        for (const auto& g : net.generators) {
            lower_.push_back(g.p_min);
            upper_.push_back(g.p_max);
        }
        for (const auto& ld : net.loads) {
            lower_.push_back(ld.lower());
            upper_.push_back(ld.upper());
        }
        for (const auto& ln : net.lines) {
            lower_.push_back(-ln.flow_limit);
            upper_.push_back(ln.flow_limit);
        }
    }

    std::size_t size() const { return refs_.size(); }
    const FeatureRef& ref(std::size_t f) const { return refs_[f]; }
    const std::vector<std::string>& names() const { return names_; }

    /// Physical box of each feature: generator capacity, load band, line limit.
    const std::vector<double>& lower() const { return lower_; }
    const std::vector<double>& upper() const { return upper_; }

    std::vector<double> assemble(std::span<const double> gen, std::span<const double> load,
                                 std::span<const double> flow) const {
        std::vector<double> x;
        x.reserve(size());
        x.insert(x.end(), gen.begin(), gen.end());
        x.insert(x.end(), load.begin(), load.end());
        x.insert(x.end(), flow.begin(), flow.end());
        return x;
    }

private:
    std::vector<FeatureRef> refs_;
    std::vector<std::string> names_;
    std::vector<double> lower_, upper_;
};

} // namespace sdr

#endif
