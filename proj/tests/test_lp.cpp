#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ovd/lp.hpp"

using namespace ovd;

TEST_CASE("textbook maximization") {
    // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
    LinearProgram lp;
    auto x = lp.add_variable("x", -3);
    auto y = lp.add_variable("y", -5);
    lp.add_row("a", {{x, 1}}, RowSense::le, 4);
    lp.add_row("b", {{y, 2}}, RowSense::le, 12);
    lp.add_row("c", {{x, 3}, {y, 2}}, RowSense::le, 18);
    LpResult r = solve(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.x[x] == doctest::Approx(2));
    CHECK(r.x[y] == doctest::Approx(6));
    CHECK(r.objective == doctest::Approx(-36));
}

TEST_CASE("equality and ge rows") {
    LinearProgram lp;
    auto a = lp.add_variable("a", 1);
    auto b = lp.add_variable("b", 2);
    lp.add_row("sum", {{a, 1}, {b, 1}}, RowSense::eq, 5);
    lp.add_row("b min", {{b, 1}}, RowSense::ge, 1);
    LpResult r = solve(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.x[a] == doctest::Approx(4));
    CHECK(r.x[b] == doctest::Approx(1));
    CHECK(lp.max_violation(r.x) < 1e-12);
}

TEST_CASE("negative right-hand side is normalized") {
    LinearProgram lp;
    auto a = lp.add_variable("a", 1);
    lp.add_row("neg", {{a, -1}}, RowSense::le, -3);  // a >= 3
    LpResult r = solve(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.x[a] == doctest::Approx(3));
}

TEST_CASE("infeasible system names its rows") {
    LinearProgram lp;
    auto a = lp.add_variable("a");
    lp.add_row("cap", {{a, 1}}, RowSense::le, 4);
    lp.add_row("demand", {{a, 1}}, RowSense::ge, 8);
    LpResult r = solve(lp);
    CHECK(r.status == LpStatus::infeasible);
    REQUIRE_FALSE(r.conflicting_rows.empty());
    CHECK(r.conflicting_rows[0] == "demand");
}

TEST_CASE("unbounded") {
    LinearProgram lp;
    auto a = lp.add_variable("a", -1);
    auto b = lp.add_variable("b");
    lp.add_row("r", {{a, 1}, {b, -1}}, RowSense::le, 1);
    CHECK(solve(lp).status == LpStatus::unbounded);
}

TEST_CASE("degenerate vertex terminates") {
    // classic cycling example under the textbook rule
    LinearProgram lp;
    auto x1 = lp.add_variable("x1", -0.75);
    auto x2 = lp.add_variable("x2", 150);
    auto x3 = lp.add_variable("x3", -0.02);
    auto x4 = lp.add_variable("x4", 6);
    lp.add_row("r1", {{x1, 0.25}, {x2, -60}, {x3, -0.04}, {x4, 9}}, RowSense::le, 0);
    lp.add_row("r2", {{x1, 0.5}, {x2, -90}, {x3, -0.02}, {x4, 3}}, RowSense::le, 0);
    lp.add_row("r3", {{x3, 1}}, RowSense::le, 1);
    LpResult r = solve(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(-0.05));
}

TEST_CASE("redundant equality rows") {
    LinearProgram lp;
    auto a = lp.add_variable("a", 1);
    auto b = lp.add_variable("b", 1);
    lp.add_row("e1", {{a, 1}, {b, 1}}, RowSense::eq, 2);
    lp.add_row("e2", {{a, 2}, {b, 2}}, RowSense::eq, 4);
    LpResult r = solve(lp);
    REQUIRE(r.status == LpStatus::optimal);
    CHECK(r.objective == doctest::Approx(2));
}

// Oracle: enumerate every vertex of a 2-variable polygon.
TEST_CASE("random two-variable programs match vertex enumeration") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coef(0.1, 3.0), cost(-2.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        struct Half { double a, b, r; };
        std::vector<Half> hs;
        LinearProgram lp;
        double c0 = cost(rng), c1 = cost(rng);
        lp.add_variable("x", c0);
        lp.add_variable("y", c1);
        for (int k = 0; k < 4; ++k) {
            Half h{coef(rng), coef(rng), coef(rng) * 5};
            hs.push_back(h);
            lp.add_row("h" + std::to_string(k), {{0, h.a}, {1, h.b}}, RowSense::le, h.r);
        }
        hs.push_back({-1, 0, 0});
        hs.push_back({0, -1, 0});
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < hs.size(); ++i)
            for (std::size_t j = i + 1; j < hs.size(); ++j) {
                double det = hs[i].a * hs[j].b - hs[i].b * hs[j].a;
                if (std::abs(det) < 1e-12) continue;
                double x = (hs[i].r * hs[j].b - hs[i].b * hs[j].r) / det;
                double y = (hs[i].a * hs[j].r - hs[i].r * hs[j].a) / det;
                bool ok = true;
                for (const Half& h : hs) ok = ok && h.a * x + h.b * y <= h.r + 1e-9;
                if (ok) best = std::min(best, c0 * x + c1 * y);
            }
        LpResult r = solve(lp);
        REQUIRE(r.status == LpStatus::optimal);
        CHECK(r.objective == doctest::Approx(best).epsilon(1e-9));
    }
}
