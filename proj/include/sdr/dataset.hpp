#ifndef SDR_DATASET_HPP
#define SDR_DATASET_HPP

// Dataset CSV: one header row with the feature names (g*, l*, f*), one row
// per operating point, optionally followed by `label` and
// `failing_contingency` columns. Numbers are written in shortest round-trip
// form so a reread dataset is bit-identical.

#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/features.hpp"
#include "sdr/label.hpp"
#include "sdr/mc.hpp"
#include "sdr/text.hpp"

namespace sdr {

struct Dataset {
    std::vector<std::string> names;       // feature columns
    std::vector<double> x;                // row-major, rows() x cols()
    std::vector<int> labels;              // empty for an unlabeled file
    std::vector<std::string> failing;     // parallel to labels
    bool has_label_column = false;

    std::size_t cols() const { return names.size(); }
    std::size_t rows() const { return cols() ? x.size() / cols() : 0; }
    bool labeled() const { return has_label_column; }
    double at(std::size_t i, std::size_t f) const { return x[i * cols() + f]; }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * cols(), cols()}; }
};

inline void write_dataset_csv(std::ostream& out, const Network& net, std::span<const OperatingPoint> points,
                              std::span<const LabeledSample> labels = {}) {
    if (!labels.empty() && labels.size() != points.size())
        throw DataError("label count does not match the point count");
    FeatureLayout layout(net);
    const auto& names = layout.names();
    for (std::size_t f = 0; f < names.size(); ++f) out << (f ? "," : "") << names[f];
    if (!labels.empty()) out << ",label,failing_contingency";
    out << "\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        auto x = points[i].features();
        if (x.size() != names.size()) throw DataError("point " + std::to_string(i) + " has the wrong dimension");
        for (std::size_t f = 0; f < x.size(); ++f) out << (f ? "," : "") << text::format_double(x[f]);
        if (!labels.empty())
            out << "," << static_cast<int>(labels[i].label) << "," << labels[i].failing_contingency(net);
        out << "\n";
    }
}

inline Dataset read_dataset_csv(std::istream& in, const std::string& source = "<dataset>") {
    Dataset ds;
    std::string raw;
    std::size_t lineno = 0;
    if (!std::getline(in, raw)) throw ParseError(source, 1, "header", "empty file");
    ++lineno;
    auto header = text::split(text::trim(raw), ',');
    std::size_t label_col = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        std::string h(text::trim(header[c]));
        if (h == "label") {
            label_col = c;
            break;
        }
        ds.names.push_back(h);
    }
    if (ds.names.empty()) throw ParseError(source, 1, "header", "no feature columns");
    ds.has_label_column = label_col < header.size();
    if (ds.has_label_column && (label_col + 2 != header.size() || text::trim(header[label_col + 1]) != "failing_contingency"))
        throw ParseError(source, 1, "header", "expected 'label,failing_contingency' as the last columns");

    while (std::getline(in, raw)) {
        ++lineno;
        auto ln = text::trim(raw);
        if (ln.empty()) continue;
        auto tok = text::split(ln, ',');
        if (tok.size() != header.size())
            throw ParseError(source, lineno, "row",
                             "expected " + std::to_string(header.size()) + " fields, got " + std::to_string(tok.size()));
        for (std::size_t f = 0; f < ds.names.size(); ++f) {
            auto v = text::parse_double(text::trim(tok[f]));
            if (!v) throw ParseError(source, lineno, ds.names[f], "expected a number");
            ds.x.push_back(*v);
        }
        if (ds.has_label_column) {
            auto y = text::parse_int<int>(text::trim(tok[label_col]));
            if (!y || (*y != 0 && *y != 1)) throw ParseError(source, lineno, "label", "expected 0 or 1");
            ds.labels.push_back(*y);
            ds.failing.emplace_back(text::trim(tok[label_col + 1]));
        }
    }
    return ds;
}

/// Split dataset rows back into operating points; the header must match the
/// network's feature layout.
inline std::vector<OperatingPoint> dataset_points(const Network& net, const Dataset& ds) {
    FeatureLayout layout(net);
    if (ds.names != layout.names())
        throw DataError("dataset columns do not match the network feature layout");
    const std::size_t ng = net.generators.size(), nd = net.loads.size();
    std::vector<OperatingPoint> pts(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) {
        auto r = ds.row(i);
        pts[i].gen_mw.assign(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(ng));
        pts[i].load_mw.assign(r.begin() + static_cast<std::ptrdiff_t>(ng),
                              r.begin() + static_cast<std::ptrdiff_t>(ng + nd));
        pts[i].flow_mw.assign(r.begin() + static_cast<std::ptrdiff_t>(ng + nd), r.end());
    }
    return pts;
}

} // namespace sdr

#endif
