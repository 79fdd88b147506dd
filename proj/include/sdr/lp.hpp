#ifndef SDR_LP_HPP
#define SDR_LP_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdr/error.hpp"
#include "sdr/text.hpp"

namespace sdr {

enum class RowSense { le, ge, eq };

struct LinearTerm {
    std::size_t var;
    double coef;
};

struct LinearRow {
    std::vector<LinearTerm> terms;
    RowSense sense = RowSense::le;
    double rhs = 0.0;
    std::string name;
};

/// min cost'x  s.t.  rows,  lower <= x <= upper  (all bounds finite).
struct LinearProgram {
    std::vector<double> cost;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<LinearRow> rows;
    std::vector<std::string> var_names; // optional, used for text export

    std::size_t var_count() const { return cost.size(); }

    std::size_t add_variable(double lo, double hi, double c, std::string name = {}) {
        cost.push_back(c);
        lower.push_back(lo);
        upper.push_back(hi);
        var_names.push_back(std::move(name));
        return cost.size() - 1;
    }

    void add_row(std::vector<LinearTerm> terms, RowSense sense, double rhs, std::string name = {}) {
        rows.push_back({std::move(terms), sense, rhs, std::move(name)});
    }

    void validate() const {
        const auto n = cost.size();
        if (lower.size() != n || upper.size() != n)
            throw DataError("LP bound vectors do not match the variable count");
        for (std::size_t j = 0; j < n; ++j) {
            if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]))
                throw DataError("LP variable " + std::to_string(j) + " has an infinite bound");
            if (!std::isfinite(cost[j])) throw DataError("LP cost is not finite");
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (!std::isfinite(rows[i].rhs)) throw DataError("LP row " + std::to_string(i) + " has an infinite rhs");
            for (const auto& t : rows[i].terms)
                if (t.var >= n || !std::isfinite(t.coef))
                    throw DataError("LP row " + std::to_string(i) + " has an invalid term");
        }
    }

    double row_activity(std::size_t i, std::span<const double> x) const {
        double a = 0.0;
        for (const auto& t : rows[i].terms) a += t.coef * x[t.var];
        return a;
    }

    /// Largest violation of any row or bound at x (absolute units).
    double max_violation(std::span<const double> x) const {
        double worst = 0.0;
        for (std::size_t j = 0; j < var_count(); ++j) {
            worst = std::max(worst, lower[j] - x[j]);
            worst = std::max(worst, x[j] - upper[j]);
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double r = row_activity(i, x) - rows[i].rhs;
            switch (rows[i].sense) {
            case RowSense::le: worst = std::max(worst, r); break;
            case RowSense::ge: worst = std::max(worst, -r); break;
            case RowSense::eq: worst = std::max(worst, std::abs(r)); break;
            }
        }
        return worst;
    }

    double objective(std::span<const double> x) const {
        double v = 0.0;
        for (std::size_t j = 0; j < var_count(); ++j) v += cost[j] * x[j];
        return v;
    }
};

/// Lagrangian lower bound from row multipliers y (one per row). Returns
/// -infinity when y has the wrong sign for some row (y <= 0 for <=, y >= 0
/// for >=).
inline double dual_bound(const LinearProgram& lp, std::span<const double> y, double sign_tol = 1e-9) {
    std::vector<double> reduced = lp.cost;
    double bound = 0.0;
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& row = lp.rows[i];
        if (row.sense == RowSense::le && y[i] > sign_tol) return -std::numeric_limits<double>::infinity();
        if (row.sense == RowSense::ge && y[i] < -sign_tol) return -std::numeric_limits<double>::infinity();
        bound += y[i] * row.rhs;
        for (const auto& t : row.terms) reduced[t.var] -= y[i] * t.coef;
    }
    for (std::size_t j = 0; j < lp.var_count(); ++j)
        bound += reduced[j] >= 0.0 ? reduced[j] * lp.lower[j] : reduced[j] * lp.upper[j];
    return bound;
}

/// CPLEX-LP style text dump. `binaries` lists variables to declare binary.
inline void write_lp(std::ostream& out, const LinearProgram& lp, std::span<const std::size_t> binaries = {},
                     const std::string& comment = {}) {
    auto name = [&](std::size_t j) {
        if (j < lp.var_names.size() && !lp.var_names[j].empty()) return lp.var_names[j];
        return "x" + std::to_string(j);
    };
    auto term = [&](double c, std::size_t j, bool first) {
        std::string s;
        if (c < 0) s = "- ";
        else s = first ? "" : "+ ";
        return s + text::format_double(std::abs(c)) + " " + name(j);
    };
    if (!comment.empty()) out << "\\ " << comment << "\n";
    out << "Minimize\n obj:";
    bool first = true;
    for (std::size_t j = 0; j < lp.var_count(); ++j) {
        if (lp.cost[j] == 0.0) continue;
        out << " " << term(lp.cost[j], j, first);
        first = false;
    }
    if (first) out << " 0 " << name(0);
    out << "\nSubject To\n";
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& row = lp.rows[i];
        out << " " << (row.name.empty() ? "c" + std::to_string(i) : row.name) << ":";
        bool f = true;
        for (const auto& t : row.terms) {
            out << " " << term(t.coef, t.var, f);
            f = false;
        }
        if (f) out << " 0 " << name(0);
        out << (row.sense == RowSense::le ? " <= " : row.sense == RowSense::ge ? " >= " : " = ")
            << text::format_double(row.rhs) << "\n";
    }
    out << "Bounds\n";
    for (std::size_t j = 0; j < lp.var_count(); ++j)
        out << " " << text::format_double(lp.lower[j]) << " <= " << name(j) << " <= "
            << text::format_double(lp.upper[j]) << "\n";
    if (!binaries.empty()) {
        out << "Binaries\n";
        for (auto j : binaries) out << " " << name(j) << "\n";
    }
    out << "End\n";
}

} // namespace sdr

#endif
