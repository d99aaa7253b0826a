#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ovd {

enum class RowSense { le, ge, eq };

/// minimize c^T x subject to named linear rows, x >= 0.
class LinearProgram {
public:
    std::size_t add_variable(std::string name, double cost = 0.0);
    void add_row(std::string name, std::vector<std::pair<std::size_t, double>> coeffs, RowSense sense, double rhs);
    void set_cost(std::size_t var, double cost) { costs_[var] = cost; }

    std::size_t num_variables() const { return names_.size(); }
    std::size_t num_rows() const { return rows_.size(); }
    const std::string& variable_name(std::size_t v) const { return names_[v]; }

    struct Row {
        std::string name;
        std::vector<std::pair<std::size_t, double>> coeffs;
        RowSense sense;
        double rhs;
    };
    const std::vector<Row>& rows() const { return rows_; }
    const std::vector<double>& costs() const { return costs_; }

    /// Largest violation of any row or of x >= 0.
    double max_violation(const std::vector<double>& x) const;

private:
    std::vector<std::string> names_;
    std::vector<double> costs_;
    std::vector<Row> rows_;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpResult {
    LpStatus status = LpStatus::infeasible;
    std::vector<double> x;
    double objective = 0.0;
    /// When infeasible: rows still carrying artificial slack at the end of
    /// phase one, i.e. the constraints that could not be met together.
    std::vector<std::string> conflicting_rows;
    std::size_t pivots = 0;
};

/// Dense two-phase tableau simplex with Bland's rule.
LpResult solve(const LinearProgram& lp, double tol = 1e-9);

const char* to_string(LpStatus s);

}  // namespace ovd
