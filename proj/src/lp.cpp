#include "ovd/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ovd {

std::size_t LinearProgram::add_variable(std::string name, double cost) {
    names_.push_back(std::move(name));
    costs_.push_back(cost);
    return names_.size() - 1;
}

void LinearProgram::add_row(std::string name, std::vector<std::pair<std::size_t, double>> coeffs, RowSense sense,
                            double rhs) {
    for (const auto& [v, a] : coeffs)
        if (v >= names_.size()) throw std::out_of_range("row " + name + " references an unknown variable");
    rows_.push_back({std::move(name), std::move(coeffs), sense, rhs});
}

double LinearProgram::max_violation(const std::vector<double>& x) const {
    double worst = 0;
    for (double v : x) worst = std::max(worst, -v);
    for (const Row& r : rows_) {
        double lhs = 0;
        for (const auto& [v, a] : r.coeffs) lhs += a * x[v];
        double viol = 0;
        switch (r.sense) {
            case RowSense::le: viol = lhs - r.rhs; break;
            case RowSense::ge: viol = r.rhs - lhs; break;
            case RowSense::eq: viol = std::abs(lhs - r.rhs); break;
        }
        worst = std::max(worst, viol);
    }
    return worst;
}

const char* to_string(LpStatus s) {
    switch (s) {
        case LpStatus::optimal: return "optimal";
        case LpStatus::infeasible: return "infeasible";
        case LpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

namespace {

class Tableau {
public:
    Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), a_((rows + 1) * (cols + 1), 0.0), basis_(rows) {}

    double& at(std::size_t r, std::size_t c) { return a_[r * (n_ + 1) + c]; }
    double at(std::size_t r, std::size_t c) const { return a_[r * (n_ + 1) + c]; }
    double& rhs(std::size_t r) { return at(r, n_); }
    double& cost(std::size_t c) { return at(m_, c); }
    std::size_t& basis(std::size_t r) { return basis_[r]; }
    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }

    void pivot(std::size_t r, std::size_t c) {
        const std::size_t w = n_ + 1;
        double p = at(r, c);
        double* pr = &a_[r * w];
        for (std::size_t j = 0; j < w; ++j) pr[j] /= p;
        pr[c] = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* row = &a_[i * w];
            double f = row[c];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < w; ++j) row[j] -= f * pr[j];
            row[c] = 0.0;
        }
        basis_[r] = c;
        ++pivots;
    }

    // Bland's rule: lowest-index improving column, lowest-index basic variable on ratio ties.
    LpStatus optimize(const std::vector<bool>& allowed, double tol) {
        constexpr std::size_t kMaxPivots = 5'000'000;
        for (;;) {
            if (pivots > kMaxPivots) throw std::runtime_error("simplex pivot limit reached");
            std::size_t enter = n_;
            for (std::size_t j = 0; j < n_; ++j) {
                if (allowed[j] && cost(j) < -tol) {
                    enter = j;
                    break;
                }
            }
            if (enter == n_) return LpStatus::optimal;
            std::size_t leave = m_;
            double best = 0;
            for (std::size_t i = 0; i < m_; ++i) {
                double aij = at(i, enter);
                if (aij <= 1e-12) continue;
                double ratio = rhs(i) / aij;
                if (leave == m_ || ratio < best - 1e-12 * std::max(1.0, std::abs(best)) ||
                    (ratio <= best + 1e-12 * std::max(1.0, std::abs(best)) && basis_[i] < basis_[leave])) {
                    leave = i;
                    best = ratio;
                }
            }
            if (leave == m_) return LpStatus::unbounded;
            pivot(leave, enter);
        }
    }

    std::size_t pivots = 0;

private:
    std::size_t m_, n_;
    std::vector<double> a_;
    std::vector<std::size_t> basis_;
};

}  // namespace

LpResult solve(const LinearProgram& lp, double tol) {
    const std::size_t n = lp.num_variables();
    const std::size_t m = lp.num_rows();
    const auto& rows = lp.rows();

    // normalize rows to nonnegative right-hand sides
    std::vector<RowSense> sense(m);
    std::vector<double> sign(m, 1.0);
    std::size_t slacks = 0, arts = 0;
    for (std::size_t i = 0; i < m; ++i) {
        sense[i] = rows[i].sense;
        if (rows[i].rhs < 0) {
            sign[i] = -1.0;
            if (sense[i] == RowSense::le) sense[i] = RowSense::ge;
            else if (sense[i] == RowSense::ge) sense[i] = RowSense::le;
        }
        if (sense[i] != RowSense::eq) ++slacks;
        if (sense[i] != RowSense::le) ++arts;
    }
    const std::size_t cols = n + slacks + arts;
    const std::size_t art0 = n + slacks;
    Tableau t(m, cols);
    std::vector<std::size_t> art_row_col(m, cols);
    std::size_t s = n, a = art0;
    for (std::size_t i = 0; i < m; ++i) {
        for (const auto& [v, c] : rows[i].coeffs) t.at(i, v) += sign[i] * c;
        t.rhs(i) = sign[i] * rows[i].rhs;
        if (sense[i] == RowSense::le) {
            t.at(i, s) = 1.0;
            t.basis(i) = s++;
        } else {
            if (sense[i] == RowSense::ge) t.at(i, s++) = -1.0;
            t.at(i, a) = 1.0;
            t.basis(i) = a;
            art_row_col[i] = a++;
        }
    }

    LpResult res;
    std::vector<bool> allowed(cols, true);
    double scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) scale = std::max(scale, std::abs(t.rhs(i)));

    if (arts > 0) {
        for (std::size_t j = art0; j < cols; ++j) t.cost(j) = 1.0;
        t.rhs(m) = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (art_row_col[i] == cols) continue;
            for (std::size_t j = 0; j <= cols; ++j) t.at(m, j) -= t.at(i, j);
        }
        t.optimize(allowed, tol);
        double infeas = -t.rhs(m);
        if (infeas > tol * scale) {
            res.status = LpStatus::infeasible;
            for (std::size_t i = 0; i < m; ++i)
                if (t.basis(i) >= art0 && t.rhs(i) > tol * scale) {
                    // report the original row that owns this artificial column
                    for (std::size_t r = 0; r < m; ++r)
                        if (art_row_col[r] == t.basis(i)) res.conflicting_rows.push_back(rows[r].name);
                }
            res.pivots = t.pivots;
            return res;
        }
        // drive zero-level artificials out of the basis where possible
        for (std::size_t i = 0; i < m; ++i) {
            if (t.basis(i) < art0) continue;
            for (std::size_t j = 0; j < art0; ++j) {
                if (std::abs(t.at(i, j)) > 1e-9) {
                    t.pivot(i, j);
                    break;
                }
            }
        }
        for (std::size_t j = art0; j < cols; ++j) allowed[j] = false;
    }

    // phase two objective
    const auto& c = lp.costs();
    for (std::size_t j = 0; j <= cols; ++j) t.at(m, j) = 0.0;
    for (std::size_t j = 0; j < n; ++j) t.cost(j) = c[j];
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t b = t.basis(i);
        double cb = b < n ? c[b] : 0.0;
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j <= cols; ++j) t.at(m, j) -= cb * t.at(i, j);
    }
    LpStatus st = t.optimize(allowed, tol);
    res.pivots = t.pivots;
    res.status = st;
    if (st != LpStatus::optimal) return res;
    res.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (t.basis(i) < n) res.x[t.basis(i)] = std::max(0.0, t.rhs(i));
    res.objective = 0;
    for (std::size_t j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    return res;
}

}  // namespace ovd
