#ifndef SDR_NET_HPP
#define SDR_NET_HPP

// Grid data model and DC power-flow machinery.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sdr/error.hpp"
#include "sdr/text.hpp"

namespace sdr {

using BusId = int;

struct Line {
    BusId from_bus = 0;
    BusId to_bus = 0;
    double reactance = 0.0; // per unit on a 100 MVA base
    double flow_limit = 0.0; // MW

    std::string name() const { return std::to_string(from_bus) + "-" + std::to_string(to_bus); }
};

struct Generator {
    BusId bus = 0;
    double p_max = 0.0;
    double p_min = 0.0;
    double cost = 0.0;             // $/MWh
    double corrective_range = 0.0; // MW, symmetric
};

struct Load {
    BusId bus = 0;
    double nominal = 0.0;
    double deviation_fraction = 0.25;

    double lower() const { return nominal * (1.0 - deviation_fraction); }
    double upper() const { return nominal * (1.0 + deviation_fraction); }
};

/// Static grid description. Construct through `Network::create` or
/// `load_network`; both validate.
class Network {
public:
    std::vector<BusId> buses;
    std::vector<Line> lines;
    std::vector<Generator> generators;
    std::vector<Load> loads;
    BusId slack_bus = 0;

    static Network create(std::vector<BusId> buses, std::vector<Line> lines,
                          std::vector<Generator> generators, std::vector<Load> loads,
                          BusId slack_bus) {
        Network net;
        net.buses = std::move(buses);
        net.lines = std::move(lines);
        net.generators = std::move(generators);
        net.loads = std::move(loads);
        net.slack_bus = slack_bus;
        net.reindex();
        net.validate();
        return net;
    }

    std::size_t bus_count() const { return buses.size(); }

    std::size_t bus_index(BusId id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw ValidationError("unknown bus " + std::to_string(id));
        return it->second;
    }

    bool has_bus(BusId id) const { return index_.count(id) != 0; }

    std::size_t slack_index() const { return bus_index(slack_bus); }

    double total_capacity() const {
        double s = 0.0;
        for (const auto& g : generators) s += g.p_max;
        return s;
    }

    /// True if the buses stay connected when the lines flagged in `removed`
    /// are taken out. `removed` may be empty.
    bool connected(const std::vector<bool>& removed = {}) const {
        if (buses.empty()) return false;
        std::vector<std::vector<std::size_t>> adj(buses.size());
        for (std::size_t l = 0; l < lines.size(); ++l) {
            if (!removed.empty() && removed[l]) continue;
            auto i = bus_index(lines[l].from_bus), j = bus_index(lines[l].to_bus);
            adj[i].push_back(j);
            adj[j].push_back(i);
        }
        std::vector<bool> seen(buses.size(), false);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = true;
        std::size_t count = 1;
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            for (auto v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    ++count;
                    q.push(v);
                }
            }
        }
        return count == buses.size();
    }

    /// Copy of this network with line `l` removed. Connectivity is not
    /// re-validated so callers can probe bridge outages.
    Network without_line(std::size_t l) const {
        Network copy = *this;
        copy.lines.erase(copy.lines.begin() + static_cast<std::ptrdiff_t>(l));
        return copy;
    }

    void validate() const {
        if (buses.empty()) throw ValidationError("network has no buses");
        if (index_.size() != buses.size()) throw ValidationError("duplicate bus identifiers");
        if (!has_bus(slack_bus))
            throw ValidationError("slack bus " + std::to_string(slack_bus) + " is not a listed bus");
        for (const auto& ln : lines) {
            if (!has_bus(ln.from_bus) || !has_bus(ln.to_bus))
                throw ValidationError("line " + ln.name() + " references an unlisted bus");
            if (ln.from_bus == ln.to_bus)
                throw ValidationError("line " + ln.name() + " connects a bus to itself");
            if (!(ln.reactance > 0.0) || !std::isfinite(ln.reactance))
                throw ValidationError("line " + ln.name() + " has nonpositive reactance");
            if (!(ln.flow_limit > 0.0) || !std::isfinite(ln.flow_limit))
                throw ValidationError("line " + ln.name() + " has nonpositive flow limit");
        }
        for (std::size_t g = 0; g < generators.size(); ++g) {
            const auto& gen = generators[g];
            auto tag = "generator G" + std::to_string(g);
            if (!has_bus(gen.bus)) throw ValidationError(tag + " references an unlisted bus");
            if (gen.p_min != 0.0) throw ValidationError(tag + " must have p_min = 0");
            if (!(gen.p_max >= gen.p_min)) throw ValidationError(tag + " has p_max < p_min");
            if (!(gen.cost > 0.0)) throw ValidationError(tag + " has nonpositive cost");
            if (!(gen.corrective_range >= 0.0))
                throw ValidationError(tag + " has negative corrective range");
        }
        for (const auto& ld : loads) {
            if (!has_bus(ld.bus))
                throw ValidationError("load at unlisted bus " + std::to_string(ld.bus));
            if (!(ld.nominal >= 0.0))
                throw ValidationError("load at bus " + std::to_string(ld.bus) + " is negative");
            if (!(ld.deviation_fraction >= 0.0 && ld.deviation_fraction < 1.0))
                throw ValidationError("load deviation must be in [0,1)");
        }
        if (!connected()) throw ValidationError("network graph is not connected");
    }

    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < buses.size(); ++i) index_.emplace(buses[i], i);
    }

private:
    std::unordered_map<BusId, std::size_t> index_;
};

/// Parse the sectioned network text format (docs/network_format.md).
inline Network parse_network(std::istream& in, const std::string& source = "<network>") {
    std::vector<BusId> buses;
    std::vector<Line> lines;
    std::vector<Generator> gens;
    std::vector<Load> loads;
    std::optional<BusId> slack;
    std::string section;
    std::string raw;
    std::size_t lineno = 0;

    auto need_int = [&](std::string_view tok, const char* field) {
        auto v = text::parse_int<int>(tok);
        if (!v) throw ParseError(source, lineno, field, "expected an integer, got '" + std::string(tok) + "'");
        return *v;
    };
    auto need_num = [&](std::string_view tok, const char* field) {
        auto v = text::parse_double(tok);
        if (!v) throw ParseError(source, lineno, field, "expected a number, got '" + std::string(tok) + "'");
        return *v;
    };
    auto need_fields = [&](const std::vector<std::string_view>& t, std::size_t lo, std::size_t hi,
                           const char* what) {
        if (t.size() < lo || t.size() > hi)
            throw ParseError(source, lineno, what,
                             "expected " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) +
                                 " fields, got " + std::to_string(t.size()));
    };

    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view ln = raw;
        if (auto hash = ln.find('#'); hash != std::string_view::npos) ln = ln.substr(0, hash);
        ln = text::trim(ln);
        if (ln.empty()) continue;
        if (ln.front() == '[') {
            if (ln.back() != ']') throw ParseError(source, lineno, "section", "unterminated section header");
            section = std::string(text::trim(ln.substr(1, ln.size() - 2)));
            if (section != "buses" && section != "lines" && section != "generators" && section != "loads")
                throw ParseError(source, lineno, "section", "unknown section '" + section + "'");
            continue;
        }
        auto tok = text::split_ws(ln);
        if (section.empty()) throw ParseError(source, lineno, "section", "data before any section header");
        if (section == "buses") {
            need_fields(tok, 1, 2, "bus");
            auto id = need_int(tok[0], "bus");
            buses.push_back(id);
            if (tok.size() == 2) {
                if (tok[1] != "slack") throw ParseError(source, lineno, "flag", "only 'slack' is allowed");
                if (slack) throw ParseError(source, lineno, "flag", "more than one slack bus");
                slack = id;
            }
        } else if (section == "lines") {
            need_fields(tok, 4, 4, "line");
            lines.push_back({need_int(tok[0], "from"), need_int(tok[1], "to"),
                             need_num(tok[2], "reactance_pu"), need_num(tok[3], "limit_mw")});
        } else if (section == "generators") {
            need_fields(tok, 4, 4, "generator");
            Generator g;
            g.bus = need_int(tok[0], "bus");
            g.p_max = need_num(tok[1], "pmax_mw");
            g.cost = need_num(tok[2], "cost_per_mwh");
            g.corrective_range = need_num(tok[3], "corrective_mw");
            gens.push_back(g);
        } else {
            need_fields(tok, 2, 3, "load");
            Load l;
            l.bus = need_int(tok[0], "bus");
            l.nominal = need_num(tok[1], "nominal_mw");
            if (tok.size() == 3) l.deviation_fraction = need_num(tok[2], "deviation");
            loads.push_back(l);
        }
    }
    if (!slack) throw ValidationError(source + ": no slack bus declared");
    return Network::create(std::move(buses), std::move(lines), std::move(gens), std::move(loads), *slack);
}

inline Network load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open network file '" + path + "'");
    return parse_network(in, path);
}

inline Network parse_network_string(const std::string& s) {
    std::istringstream in(s);
    return parse_network(in, "<string>");
}

/// Line-flow sensitivities to bus injections, referenced to the slack bus.
/// Immutable after construction.
class PtdfMatrix {
public:
    PtdfMatrix() = default;
    explicit PtdfMatrix(Eigen::MatrixXd entries) : entries_(std::move(entries)) {}

    std::size_t lines() const { return static_cast<std::size_t>(entries_.rows()); }
    std::size_t buses() const { return static_cast<std::size_t>(entries_.cols()); }
    double operator()(std::size_t line, std::size_t bus) const {
        return entries_(static_cast<Eigen::Index>(line), static_cast<Eigen::Index>(bus));
    }
    const Eigen::MatrixXd& matrix() const { return entries_; }

private:
    Eigen::MatrixXd entries_;
};

/// Nodal susceptance matrix (per unit), full bus dimension.
inline Eigen::MatrixXd susceptance_matrix(const Network& net) {
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& ln : net.lines) {
        auto i = static_cast<Eigen::Index>(net.bus_index(ln.from_bus));
        auto j = static_cast<Eigen::Index>(net.bus_index(ln.to_bus));
        double y = 1.0 / ln.reactance;
        b(i, i) += y;
        b(j, j) += y;
        b(i, j) -= y;
        b(j, i) -= y;
    }
    return b;
}

inline PtdfMatrix build_ptdf(const Network& net) {
    if (!net.connected())
        throw ValidationError("susceptance matrix is singular: network is disconnected");
    const auto n = static_cast<Eigen::Index>(net.bus_count());
    const auto s = static_cast<Eigen::Index>(net.slack_index());
    Eigen::MatrixXd b = susceptance_matrix(net);

    // Drop the slack row/column and invert the reduced matrix.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != s) keep.push_back(i);
    const auto m = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd reduced(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) reduced(r, c) = b(keep[r], keep[c]);
    Eigen::LLT<Eigen::MatrixXd> llt(reduced);
    if (llt.info() != Eigen::Success)
        throw ValidationError("susceptance matrix is singular");
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m, m));

    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, n); // angle per unit injection
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < m; ++c) x(keep[r], keep[c]) = inv(r, c);

    Eigen::MatrixXd ptdf(static_cast<Eigen::Index>(net.lines.size()), n);
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        const auto& ln = net.lines[l];
        auto i = static_cast<Eigen::Index>(net.bus_index(ln.from_bus));
        auto j = static_cast<Eigen::Index>(net.bus_index(ln.to_bus));
        ptdf.row(static_cast<Eigen::Index>(l)) = (x.row(i) - x.row(j)) / ln.reactance;
    }
    return PtdfMatrix(std::move(ptdf));
}

/// Balance tolerance for injection vectors, MW.
inline constexpr double kBalanceTolerance = 1e-6;

inline std::vector<double> dc_flows(const PtdfMatrix& ptdf, std::span<const double> injections) {
    if (injections.size() != ptdf.buses())
        throw DataError("injection vector has " + std::to_string(injections.size()) +
                        " entries, network has " + std::to_string(ptdf.buses()) + " buses");
    double total = 0.0;
    for (double p : injections) total += p;
    if (std::abs(total) > kBalanceTolerance)
        throw DataError("unbalanced injections: sum = " + text::format_double(total) + " MW");
    std::vector<double> flows(ptdf.lines(), 0.0);
    for (std::size_t l = 0; l < ptdf.lines(); ++l) {
        double f = 0.0;
        for (std::size_t b = 0; b < injections.size(); ++b) f += ptdf(l, b) * injections[b];
        flows[l] = f;
    }
    return flows;
}

/// Net injection per bus (generation minus load), MW.
inline std::vector<double> bus_injections(const Network& net, std::span<const double> gen_mw,
                                          std::span<const double> load_mw) {
    if (gen_mw.size() != net.generators.size() || load_mw.size() != net.loads.size())
        throw DataError("dispatch/load vector does not match the network");
    std::vector<double> inj(net.bus_count(), 0.0);
    for (std::size_t g = 0; g < gen_mw.size(); ++g) inj[net.bus_index(net.generators[g].bus)] += gen_mw[g];
    for (std::size_t d = 0; d < load_mw.size(); ++d) inj[net.bus_index(net.loads[d].bus)] -= load_mw[d];
    return inj;
}

struct LimitViolation {
    std::size_t line = 0;
    double flow = 0.0;
    double limit = 0.0;
    double excess = 0.0; // |flow| - limit, MW
};

struct LimitCheck {
    bool ok = true;
    std::vector<LimitViolation> violations;
};

/// Closed-interval check |flow| <= limit + tolerance for every line.
inline LimitCheck check_limits(const Network& net, std::span<const double> flows, double tolerance = 0.0) {
    if (flows.size() != net.lines.size())
        throw DataError("flow vector length does not match the line count");
    LimitCheck out;
    for (std::size_t l = 0; l < flows.size(); ++l) {
        double excess = std::abs(flows[l]) - net.lines[l].flow_limit;
        if (excess > tolerance) {
            out.ok = false;
            out.violations.push_back({l, flows[l], net.lines[l].flow_limit, excess});
        }
    }
    return out;
}

/// Lines whose removal disconnects the network (Tarjan low-link).
inline std::vector<std::size_t> find_bridges(const Network& net) {
    const std::size_t n = net.bus_count();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n); // (neighbour, line)
    for (std::size_t l = 0; l < net.lines.size(); ++l) {
        auto i = net.bus_index(net.lines[l].from_bus), j = net.bus_index(net.lines[l].to_bus);
        adj[i].push_back({j, l});
        adj[j].push_back({i, l});
    }
    std::vector<int> disc(n, -1), low(n, 0);
    std::vector<bool> is_bridge(net.lines.size(), false);
    int timer = 0;
    // Iterative DFS: (vertex, parent line, next adjacency slot)
    struct Frame {
        std::size_t v;
        std::size_t parent_line;
        std::size_t next;
    };
    constexpr auto kNone = static_cast<std::size_t>(-1);
    for (std::size_t root = 0; root < n; ++root) {
        if (disc[root] >= 0) continue;
        std::vector<Frame> stack{{root, kNone, 0}};
        disc[root] = low[root] = timer++;
        while (!stack.empty()) {
            auto& f = stack.back();
            if (f.next < adj[f.v].size()) {
                auto [w, l] = adj[f.v][f.next++];
                if (l == f.parent_line) continue;
                if (disc[w] < 0) {
                    disc[w] = low[w] = timer++;
                    stack.push_back({w, l, 0});
                } else {
                    low[f.v] = std::min(low[f.v], disc[w]);
                }
            } else {
                auto done = f;
                stack.pop_back();
                if (!stack.empty()) {
                    auto& parent = stack.back();
                    low[parent.v] = std::min(low[parent.v], low[done.v]);
                    if (low[done.v] > disc[parent.v]) is_bridge[done.parent_line] = true;
                }
            }
        }
    }
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l < is_bridge.size(); ++l)
        if (is_bridge[l]) out.push_back(l);
    return out;
}

} // namespace sdr

#endif
