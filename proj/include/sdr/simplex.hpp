#ifndef SDR_SIMPLEX_HPP
#define SDR_SIMPLEX_HPP

// Dense bounded-variable primal simplex.
//
// Each row gets a slack (a'x + s = b) and, where the starting point violates
// the row, an artificial column. Phase 1 minimizes the artificial sum, phase
// 2 the real cost. Nonbasic variables sit at one of their bounds; bound flips
// are taken when cheaper than a pivot. Basic values are refreshed from the
// slack block of the tableau (which holds B^-1) at the end of every phase.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdr/error.hpp"
#include "sdr/lp.hpp"

namespace sdr {

enum class LpStatus { optimal, infeasible, unbounded };

inline const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    }
    return "?";
}

enum class PricingRule {
    dantzig, ///< most negative reduced cost, Harris ratio test
    bland    ///< lowest eligible index, lowest-index leaving row
};

struct SimplexOptions {
    PricingRule pricing = PricingRule::dantzig;
    std::size_t degenerate_streak = 50; ///< switch to Bland after this many degenerate pivots
    double feasibility_tol = 1e-7;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-9;
    std::size_t max_iterations = 200000;
    bool presolve = true;
};

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> x;     ///< primal point (optimal only)
    std::vector<double> duals; ///< row multipliers (optimal only); 0 for presolved rows
    std::size_t iterations = 0;
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseRow {
    std::vector<std::size_t> idx;
    std::vector<double> val;
    RowSense sense;
    double rhs;
};

class DenseSimplex {
public:
    DenseSimplex(std::size_t n, std::vector<SparseRow> rows, std::vector<double> cost, std::vector<double> lo,
                 std::vector<double> hi, const SimplexOptions& opt)
        : n_(n), m_(rows.size()), rows_(std::move(rows)), real_cost_(std::move(cost)), opt_(opt) {
        // Column layout: [structural | slack | artificial].
        lo_ = std::move(lo);
        hi_ = std::move(hi);
        lo_.resize(n_ + m_);
        hi_.resize(n_ + m_);
        for (std::size_t i = 0; i < m_; ++i) {
            switch (rows_[i].sense) {
            case RowSense::le: lo_[n_ + i] = 0.0; hi_[n_ + i] = kInf; break;
            case RowSense::ge: lo_[n_ + i] = -kInf; hi_[n_ + i] = 0.0; break;
            case RowSense::eq: lo_[n_ + i] = 0.0; hi_[n_ + i] = 0.0; break;
            }
        }
        at_upper_.assign(n_ + m_, 0);
        for (std::size_t j = 0; j < n_; ++j) at_upper_[j] = std::abs(hi_[j]) < std::abs(lo_[j]);
        for (std::size_t i = 0; i < m_; ++i) at_upper_[n_ + i] = rows_[i].sense == RowSense::ge;

        // Residual of every row at the starting nonbasic point.
        std::vector<double> resid(m_);
        for (std::size_t i = 0; i < m_; ++i) {
            double a = 0.0;
            for (std::size_t k = 0; k < rows_[i].idx.size(); ++k) a += rows_[i].val[k] * value_of(rows_[i].idx[k]);
            resid[i] = rows_[i].rhs - a;
        }
        std::vector<double> art_sign(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i) {
            double r = resid[i];
            bool slack_ok = r >= lo_[n_ + i] - opt_.feasibility_tol && r <= hi_[n_ + i] + opt_.feasibility_tol;
            if (!slack_ok) art_sign[i] = r > 0 ? 1.0 : -1.0;
        }
        for (std::size_t i = 0; i < m_; ++i)
            if (art_sign[i] != 0.0) art_rows_.push_back(i);
        ncols_ = n_ + m_ + art_rows_.size();
        lo_.resize(ncols_, 0.0);
        hi_.resize(ncols_, kInf);
        at_upper_.resize(ncols_, 0);
        art_sign_ = art_sign;

        tab_.assign(m_ * ncols_, 0.0);
        basis_.assign(m_, 0);
        pos_.assign(ncols_, -1);
        beta_.assign(m_, 0.0);
        std::size_t a = 0;
        for (std::size_t i = 0; i < m_; ++i) {
            double s = art_sign[i] != 0.0 ? art_sign[i] : 1.0; // row scaled by B^-1
            double* t = &tab_[i * ncols_];
            for (std::size_t k = 0; k < rows_[i].idx.size(); ++k) t[rows_[i].idx[k]] += s * rows_[i].val[k];
            t[n_ + i] = s;
            if (art_sign[i] != 0.0) {
                std::size_t col = n_ + m_ + a++;
                t[col] = 1.0;
                basis_[i] = col;
                beta_[i] = std::abs(resid[i]);
            } else {
                basis_[i] = n_ + i;
                beta_[i] = resid[i];
            }
            pos_[basis_[i]] = static_cast<long>(i);
        }
    }

    LpStatus solve() {
        if (!art_rows_.empty()) {
            std::vector<double> c(ncols_, 0.0);
            for (std::size_t j = n_ + m_; j < ncols_; ++j) c[j] = 1.0;
            set_cost(c);
            auto st = run();
            if (st == LpStatus::unbounded) throw SolverError("phase 1 reported unbounded");
            refresh_beta();
            double infeas = 0.0;
            for (std::size_t i = 0; i < m_; ++i)
                if (basis_[i] >= n_ + m_) infeas += std::max(0.0, beta_[i]);
            for (std::size_t j = n_ + m_; j < ncols_; ++j)
                if (pos_[j] < 0 && at_upper_[j]) infeas += hi_[j];
            if (infeas > infeasibility_threshold()) return LpStatus::infeasible;
            retire_artificials();
        }
        std::vector<double> c(ncols_, 0.0);
        std::copy(real_cost_.begin(), real_cost_.end(), c.begin());
        set_cost(c);
        auto st = run();
        refresh_beta();
        return st;
    }

    std::vector<double> primal() const {
        std::vector<double> x(n_);
        for (std::size_t j = 0; j < n_; ++j) x[j] = pos_[j] >= 0 ? beta_[static_cast<std::size_t>(pos_[j])] : value_of(j);
        return x;
    }

    /// Row multipliers y with c_j - y'A_j = reduced cost of column j.
    std::vector<double> duals() const {
        std::vector<double> y(m_);
        for (std::size_t i = 0; i < m_; ++i) y[i] = -d_[n_ + i];
        return y;
    }

    std::size_t iterations() const { return iterations_; }

    /// Rebuild the tableau from the original rows for the current basis.
    void refactor() {
        Eigen::MatrixXd full = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(ncols_));
        for (std::size_t i = 0; i < m_; ++i) {
            auto r = static_cast<Eigen::Index>(i);
            for (std::size_t k = 0; k < rows_[i].idx.size(); ++k)
                full(r, static_cast<Eigen::Index>(rows_[i].idx[k])) += rows_[i].val[k];
            full(r, static_cast<Eigen::Index>(n_ + i)) = 1.0;
        }
        for (std::size_t a = 0; a < art_rows_.size(); ++a)
            full(static_cast<Eigen::Index>(art_rows_[a]), static_cast<Eigen::Index>(n_ + m_ + a)) =
                art_sign_[art_rows_[a]];
        Eigen::MatrixXd b(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
        for (std::size_t i = 0; i < m_; ++i) b.col(static_cast<Eigen::Index>(i)) = full.col(static_cast<Eigen::Index>(basis_[i]));
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
        Eigen::MatrixXd t = lu.solve(full);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < ncols_; ++j) tab_[i * ncols_ + j] = t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        set_cost(cost_);
        refresh_beta();
    }

    LpStatus resolve_phase2() {
        auto st = run();
        refresh_beta();
        return st;
    }

private:
    double value_of(std::size_t j) const { return at_upper_[j] ? hi_[j] : lo_[j]; }

    // Phase-1 residual above which the LP is declared infeasible: the absolute
    // feasibility tolerance plus round-off at the scale of the data. A looser,
    // purely relative threshold accepts LPs that miss feasibility by ~1e-6,
    // whose final point then fails certification.
    double infeasibility_threshold() const {
        double scale = 1.0;
        for (const auto& r : rows_) scale = std::max(scale, std::abs(r.rhs));
        return opt_.feasibility_tol + 1e-12 * scale;
    }

    void set_cost(const std::vector<double>& c) {
        cost_ = c;
        d_ = c;
        for (std::size_t i = 0; i < m_; ++i) {
            double cb = c[basis_[i]];
            if (cb == 0.0) continue;
            const double* t = &tab_[i * ncols_];
            for (std::size_t j = 0; j < ncols_; ++j) d_[j] -= cb * t[j];
        }
        for (std::size_t i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
    }

    // beta = B^-1 b - sum_{nonbasic j} B^-1 A_j x_j, with B^-1 read off the slack block.
    void refresh_beta() {
        std::vector<double> xn(ncols_, 0.0);
        for (std::size_t j = 0; j < ncols_; ++j)
            if (pos_[j] < 0) xn[j] = value_of(j);
        for (std::size_t i = 0; i < m_; ++i) {
            const double* t = &tab_[i * ncols_];
            double v = 0.0;
            for (std::size_t k = 0; k < m_; ++k) v += t[n_ + k] * rows_[k].rhs;
            for (std::size_t j = 0; j < ncols_; ++j)
                if (xn[j] != 0.0) v -= t[j] * xn[j];
            beta_[i] = v;
        }
    }

    // Pivot basic artificials out where possible, then fix every artificial at 0.
    void retire_artificials() {
        for (std::size_t i = 0; i < m_; ++i) {
            if (basis_[i] < n_ + m_) continue;
            const double* t = &tab_[i * ncols_];
            std::size_t best = ncols_;
            double best_abs = 1e-7;
            for (std::size_t j = 0; j < n_ + m_; ++j) {
                if (pos_[j] >= 0 || lo_[j] == hi_[j]) continue;
                if (std::abs(t[j]) > best_abs) {
                    best_abs = std::abs(t[j]);
                    best = j;
                }
            }
            if (best == ncols_) continue; // redundant row; artificial stays basic at 0
            double entering_value = value_of(best);
            std::size_t leaving = basis_[i];
            pivot(i, best);
            at_upper_[leaving] = 0;
            beta_[i] = entering_value;
        }
        for (std::size_t j = n_ + m_; j < ncols_; ++j) {
            lo_[j] = 0.0;
            hi_[j] = 0.0;
            at_upper_[j] = 0;
        }
        refresh_beta();
    }

    bool eligible(std::size_t j, int& dir) const {
        if (pos_[j] >= 0 || lo_[j] == hi_[j]) return false;
        if (!at_upper_[j] && d_[j] < -opt_.optimality_tol) {
            dir = 1;
            return true;
        }
        if (at_upper_[j] && d_[j] > opt_.optimality_tol) {
            dir = -1;
            return true;
        }
        return false;
    }

    LpStatus run() {
        std::size_t degenerate = 0;
        for (;;) {
            if (iterations_ >= opt_.max_iterations)
                throw SolverError("simplex iteration limit (" + std::to_string(opt_.max_iterations) +
                                  ") reached: rows=" + std::to_string(m_) + " cols=" + std::to_string(ncols_) +
                                  " degenerate streak=" + std::to_string(degenerate));
            const bool bland = opt_.pricing == PricingRule::bland || degenerate >= opt_.degenerate_streak;

            std::size_t q = ncols_;
            int dir = 0;
            double best = 0.0;
            for (std::size_t j = 0; j < ncols_; ++j) {
                int dj = 0;
                if (!eligible(j, dj)) continue;
                if (bland) {
                    q = j;
                    dir = dj;
                    break;
                }
                if (std::abs(d_[j]) > best) {
                    best = std::abs(d_[j]);
                    q = j;
                    dir = dj;
                }
            }
            if (q == ncols_) return LpStatus::optimal;
            ++iterations_;

            // Ratio test along direction dir for column q.
            const double flip = hi_[q] - lo_[q];
            std::size_t r = m_;
            double step = kInf;
            if (bland) {
                for (std::size_t i = 0; i < m_; ++i) {
                    double rate = -dir * tab_[i * ncols_ + q];
                    if (std::abs(rate) <= opt_.pivot_tol) continue;
                    double lim = limit(i, rate, 0.0);
                    bool better = lim < step - 1e-12;
                    bool tie = !better && r < m_ && lim <= step + 1e-12 && basis_[i] < basis_[r];
                    if (better || tie) {
                        step = std::min(step, lim);
                        r = i;
                    }
                }
            } else {
                double relaxed = kInf;
                for (std::size_t i = 0; i < m_; ++i) {
                    double rate = -dir * tab_[i * ncols_ + q];
                    if (std::abs(rate) <= opt_.pivot_tol) continue;
                    relaxed = std::min(relaxed, limit(i, rate, opt_.feasibility_tol));
                }
                if (relaxed < kInf) {
                    double piv = 0.0;
                    for (std::size_t i = 0; i < m_; ++i) {
                        double rate = -dir * tab_[i * ncols_ + q];
                        if (std::abs(rate) <= opt_.pivot_tol) continue;
                        double lim = limit(i, rate, 0.0);
                        if (lim <= relaxed && std::abs(rate) > piv) {
                            piv = std::abs(rate);
                            r = i;
                            step = lim;
                        }
                    }
                }
            }
            if (flip <= step) {
                if (flip == kInf) return LpStatus::unbounded;
                for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * tab_[i * ncols_ + q] * flip;
                at_upper_[q] = !at_upper_[q];
                degenerate = 0;
                continue;
            }
            if (r == m_) return LpStatus::unbounded;
            step = std::max(step, 0.0);
            degenerate = step <= 1e-12 ? degenerate + 1 : 0;

            const double rate_r = -dir * tab_[r * ncols_ + q];
            for (std::size_t i = 0; i < m_; ++i) beta_[i] -= dir * tab_[i * ncols_ + q] * step;
            const double entering_value = value_of(q) + dir * step;
            const std::size_t leaving = basis_[r];
            at_upper_[leaving] = rate_r > 0 ? 1 : 0; // hit upper if it was rising
            pivot(r, q);
            beta_[r] = entering_value;
        }
    }

    // Largest step before basic variable in row i leaves its bounds (relaxed by tol).
    double limit(std::size_t i, double rate, double tol) const {
        const std::size_t b = basis_[i];
        double lim;
        if (rate < 0) {
            if (lo_[b] == -kInf) return kInf;
            lim = (beta_[i] - (lo_[b] - tol)) / -rate;
        } else {
            if (hi_[b] == kInf) return kInf;
            lim = ((hi_[b] + tol) - beta_[i]) / rate;
        }
        return std::max(lim, 0.0);
    }

    void pivot(std::size_t r, std::size_t q) {
        double* tr = &tab_[r * ncols_];
        const double inv = 1.0 / tr[q];
        nz_.clear();
        for (std::size_t j = 0; j < ncols_; ++j) {
            if (tr[j] != 0.0) {
                tr[j] *= inv;
                if (std::abs(tr[j]) < 1e-14) tr[j] = 0.0;
                else nz_.push_back(j);
            }
        }
        tr[q] = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r) continue;
            double* ti = &tab_[i * ncols_];
            const double f = ti[q];
            if (f == 0.0) continue;
            for (auto j : nz_) ti[j] -= f * tr[j];
            ti[q] = 0.0;
        }
        const double f = d_[q];
        if (f != 0.0) {
            for (auto j : nz_) d_[j] -= f * tr[j];
        }
        d_[q] = 0.0;
        const std::size_t leaving = basis_[r];
        pos_[leaving] = -1;
        basis_[r] = q;
        pos_[q] = static_cast<long>(r);
    }

    std::size_t n_, m_, ncols_ = 0;
    std::vector<SparseRow> rows_;
    std::vector<double> real_cost_;
    SimplexOptions opt_;
    std::vector<double> lo_, hi_, cost_, d_, beta_, art_sign_;
    std::vector<char> at_upper_;
    std::vector<std::size_t> art_rows_, basis_, nz_;
    std::vector<long> pos_;
    std::vector<double> tab_;
    std::size_t iterations_ = 0;
};

} // namespace detail

/// Solve a bounded-variable LP. Throws SolverError on the iteration limit or
/// when the returned point cannot be certified feasible within 1e-6.
inline LpResult simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    lp.validate();
    const std::size_t n = lp.var_count();
    LpResult result;

    // Presolve: substitute fixed variables, drop rows implied by bounds.
    std::vector<long> map(n, -1);
    std::vector<std::size_t> kept_vars;
    for (std::size_t j = 0; j < n; ++j) {
        if (lp.lower[j] > lp.upper[j] + opt.feasibility_tol) return result; // infeasible bounds
        if (!opt.presolve || lp.lower[j] < lp.upper[j]) {
            map[j] = static_cast<long>(kept_vars.size());
            kept_vars.push_back(j);
        }
    }
    auto fixed_value = [&](std::size_t j) { return std::min(lp.lower[j], lp.upper[j]); };

    std::vector<detail::SparseRow> rows;
    std::vector<std::size_t> kept_rows;
    std::vector<double> dense(n, 0.0);
    std::vector<std::size_t> touched;
    std::vector<char> mark(n, 0);
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& row = lp.rows[i];
        touched.clear();
        double constant = 0.0;
        for (const auto& t : row.terms) {
            if (map[t.var] < 0) {
                constant += t.coef * fixed_value(t.var);
                continue;
            }
            if (!mark[t.var]) {
                mark[t.var] = 1;
                touched.push_back(t.var);
            }
            dense[t.var] += t.coef;
        }
        detail::SparseRow sr;
        sr.sense = row.sense;
        sr.rhs = row.rhs - constant;
        double min_act = 0.0, max_act = 0.0;
        for (auto j : touched) {
            double c = dense[j];
            dense[j] = 0.0;
            mark[j] = 0;
            if (c == 0.0) continue;
            sr.idx.push_back(static_cast<std::size_t>(map[j]));
            sr.val.push_back(c);
            min_act += c > 0 ? c * lp.lower[j] : c * lp.upper[j];
            max_act += c > 0 ? c * lp.upper[j] : c * lp.lower[j];
        }
        if (opt.presolve) {
            const double tol = opt.feasibility_tol * std::max(1.0, std::abs(sr.rhs));
            bool redundant = false;
            switch (row.sense) {
            case RowSense::le:
                if (min_act > sr.rhs + tol) return result;
                redundant = max_act <= sr.rhs;
                break;
            case RowSense::ge:
                if (max_act < sr.rhs - tol) return result;
                redundant = min_act >= sr.rhs;
                break;
            case RowSense::eq:
                if (min_act > sr.rhs + tol || max_act < sr.rhs - tol) return result;
                redundant = sr.idx.empty();
                break;
            }
            if (redundant) continue;
        }
        kept_rows.push_back(i);
        rows.push_back(std::move(sr));
    }

    std::vector<double> cost, lo, hi;
    for (auto j : kept_vars) {
        cost.push_back(lp.cost[j]);
        lo.push_back(lp.lower[j]);
        hi.push_back(lp.upper[j]);
    }
    detail::DenseSimplex solver(kept_vars.size(), std::move(rows), cost, lo, hi, opt);
    LpStatus st = solver.solve();
    result.iterations = solver.iterations();
    result.status = st;
    if (st != LpStatus::optimal) return result;

    auto extract = [&] {
        auto xr = solver.primal();
        std::vector<double> x(n);
        for (std::size_t j = 0; j < n; ++j) x[j] = map[j] >= 0 ? xr[static_cast<std::size_t>(map[j])] : fixed_value(j);
        return x;
    };
    auto x = extract();
    if (lp.max_violation(x) > 1e-6) {
        solver.refactor();
        st = solver.resolve_phase2();
        result.iterations = solver.iterations();
        result.status = st;
        if (st != LpStatus::optimal) return result;
        x = extract();
        double viol = lp.max_violation(x);
        if (viol > 1e-6)
            throw SolverError("simplex returned a point violating constraints by " + text::format_double(viol));
    }
    // Snap to bounds to remove round-off outside the box.
    for (std::size_t j = 0; j < n; ++j) x[j] = std::clamp(x[j], lp.lower[j], lp.upper[j]);
    result.objective = lp.objective(x);
    result.duals.assign(lp.rows.size(), 0.0);
    auto yr = solver.duals();
    for (std::size_t k = 0; k < kept_rows.size(); ++k) result.duals[kept_rows[k]] = yr[k];
    result.x = std::move(x);
    return result;
}

} // namespace sdr

#endif
