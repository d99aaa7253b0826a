#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ovd/delay.hpp"

using namespace ovd;

namespace {

Instance two_by_one() {
    return {n_by_1(2, std::vector<Capacity>{Capacity::finite(4), Capacity::finite(2)}), {{8, 3}}, {{2}}};
}

SimConfig cfg_of(double T, double dt = 1, bool integer = false) {
    SimConfig c;
    c.horizon = T;
    c.dt = dt;
    c.discretize = integer;
    return c;
}

RateFunction fixed(const RateAssignment& g) {
    return [g](const QueueState&) { return g; };
}

}  // namespace

TEST_CASE("piecewise-linear evaluation, integration and composition") {
    PiecewiseLinear f({0, 1, 3}, {0, 2, 2});
    CHECK(f(0.5) == 1);
    CHECK(f(2) == 2);
    CHECK(f(-1) == -2);
    CHECK(f(4) == 2);
    CHECK(f.integrate(0, 3) == doctest::Approx(5));
    CHECK(f.integrate(0.5, 2) == doctest::Approx(0.75 * 0.5 * 2 + 2));

    PiecewiseLinear g({0, 2}, {0, 3});  // 1.5 x
    PiecewiseLinear h = PiecewiseLinear::compose(f, g, 0, 2);
    for (double x : {0.0, 0.3, 2.0 / 3, 1.0, 1.7, 2.0}) CHECK(h(x) == doctest::Approx(f(g(x))));
    PiecewiseLinear s = f + 2.0 * PiecewiseLinear::identity();
    CHECK(s(2) == doctest::Approx(6));
}

TEST_CASE("two-node chain delay takes the larger of the two bottlenecks") {
    // q1 = 4 drained at 1, q2 = 2 served at 2 and fed at 1
    Instance inst{full_connection({1, 1}), {{1}}, {{2}}};
    StaticQueueSolution sol = solve_static_queues(inst, {{1}}, {4, 2}, 0);
    CHECK(packet_delay(sol, {0, 1}, 0) == doctest::Approx(4));
    CHECK(std::max((4.0 + 2) / 2, 4.0 / 1) == 4);
}

TEST_CASE("no backlog and no overload means no delay") {
    Instance inst{full_connection({2, 2}), {{1, 1}}, {{3, 3}}};
    StaticQueueSolution sol = solve_static_queues(inst, {{1, 1, 1, 1}}, std::vector<double>(4, 0.0), 0);
    CHECK(packet_delay(sol, {0, 2}, 5) == 0);
}

TEST_CASE("2x1 rate-proportional packet delay is 4.5 t") {
    Instance inst = two_by_one();
    StaticQueueSolution sol = solve_static_queues(inst, {{2, 0.75}}, {0, 0, 0}, 0);
    for (double t : {0.0, 1.0, 10.0, 123.0}) CHECK(packet_delay(sol, {0, 2}, t) == doctest::Approx(4.5 * t));
    for (double t : {1.0, 10.0}) CHECK(packet_delay(sol, {1, 2}, t) == doctest::Approx(4.5 * t));
}

TEST_CASE("infinite delay when a backlogged hop has no drain") {
    Instance inst{full_connection({1, 1}), {{1}}, {{2}}};
    StaticQueueSolution sol = solve_static_queues(inst, {{0}}, {1, 0}, 0);
    CHECK(std::isinf(packet_delay(sol, {0, 1}, 1)));
    DelayReport rep = metrics_analytic(inst, {{0}}, cfg_of(10));
    CHECK(std::isinf(rep.d_avg));
}

TEST_CASE("trajectory-based packet delay agrees with the exact solution") {
    Instance inst = two_by_one();
    // long enough that every probed packet leaves inside the trajectory
    SimConfig c = cfg_of(200, 0.01);
    c.q0 = std::vector<double>{30, 5, 10};
    RateAssignment g{{3, 1}};
    Trajectory tr = run_static(inst, g, c);
    StaticQueueSolution sol = solve_static_queues(inst, g, *c.q0, 0);
    for (double t : {0.0, 2.5, 7.0, 20.0})
        CHECK(packet_delay(inst, g, tr, {0, 2}, t) == doctest::Approx(packet_delay(sol, {0, 2}, t)).epsilon(1e-6));
}

TEST_CASE("analytic metrics on the motivating instance") {
    Instance inst = two_by_one();
    DelayReport rep = metrics_analytic(inst, {{2, 0.75}}, cfg_of(200));
    CHECK(std::abs(rep.d_avg - 450) < 1e-9);
    CHECK(std::abs(rep.d_max - 450) < 1e-9);
    CHECK(min_delay_value(inst.arrivals, inst.service, 200) == doctest::Approx(450));
}

TEST_CASE("underloaded network with g = lambda has zero delay") {
    Instance inst{full_connection({2, 1}), {{1, 2}}, {{5}}};
    DelayReport rep = metrics_analytic(inst, {{1, 2}}, cfg_of(100));
    CHECK(rep.d_avg == 0);
    CHECK(rep.d_max == 0);
}

TEST_CASE("multi-layer closed form with ratio 2.5") {
    // 1 x 1 x 1 chain, lambda = 5, mu = 2, links run at full arrival rate
    Instance inst{full_connection({1, 1, 1}), {{5}}, {{2}}};
    DelayReport rep = metrics_analytic(inst, {{5, 5}}, cfg_of(50));
    CHECK(rep.d_avg == doctest::Approx(37.5).epsilon(1e-12));
    CHECK(min_delay_value(inst.arrivals, inst.service, 50) == doctest::Approx(37.5));
}

TEST_CASE("nonzero initial queues are analytic on N x 1 only") {
    Instance inst{full_connection({2, 2}), {{1, 1}}, {{1, 1}}};
    SimConfig c = cfg_of(10);
    c.q0 = std::vector<double>{1, 0, 0, 0};
    CHECK_THROWS_AS(metrics_analytic(inst, {{1, 0, 0, 1}}, c), std::invalid_argument);
}

TEST_CASE("N x 1 analytic metrics with initial queues match a fine quadrature") {
    Instance inst = two_by_one();
    SimConfig c = cfg_of(40);
    c.q0 = std::vector<double>{30, 2, 5};
    RateAssignment g{{1.5, 1.5}};
    DelayReport rep = metrics_analytic(inst, g, c);
    StaticQueueSolution sol = solve_static_queues(inst, g, *c.q0, 0);
    for (std::size_t i = 0; i < 2; ++i) {
        const int n = 40000;
        double h = 40.0 / n, s = 0;
        for (int k = 0; k <= n; ++k) {
            double w = (k == 0 || k == n) ? 0.5 : 1.0;
            s += w * packet_delay(sol, {i, 2}, k * h);
        }
        CHECK(rep.d_bar[i] == doctest::Approx(s * h / 40).epsilon(1e-6));
    }
}

TEST_CASE("report is a lambda-weighted mean with max") {
    Instance inst{full_connection({2, 1}), {{8, 3}}, {{2}}};
    DelayReport rep = metrics_analytic(inst, {{4, 0.5}}, cfg_of(100));
    double expect = (8 * rep.d_bar[0] + 3 * rep.d_bar[1]) / 11;
    CHECK(rep.d_avg == doctest::Approx(expect).epsilon(1e-15));
    CHECK(rep.d_max == std::max(rep.d_bar[0], rep.d_bar[1]));
    CHECK(rep.d_max >= rep.d_avg);
}

TEST_CASE("path weights") {
    LayeredNetwork chain = full_connection({1, 1, 1});
    auto t1 = path_weights(chain, {{1}}, {{1, 1}});
    REQUIRE(t1.per_ingress[0].size() == 1);
    CHECK(t1.per_ingress[0][0].weight == 1);

    LayeredNetwork sym = full_connection({2, 2, 2});
    auto t2 = path_weights(sym, {{1, 1}}, {{1, 1, 1, 1, 1, 1, 1, 1}});
    for (const auto& paths : t2.per_ingress) {
        REQUIRE(paths.size() == 4);
        for (const auto& p : paths) CHECK(p.weight == doctest::Approx(0.25));
    }

    LayeredNetwork two = full_connection({2, 2});
    auto t3 = path_weights(two, {{4, 8}}, {{4, 4, 5, 15}});
    REQUIRE(t3.per_ingress[1].size() == 2);
    CHECK(t3.per_ingress[1][0].weight == doctest::Approx(0.25));
    CHECK(t3.per_ingress[1][1].weight == doctest::Approx(0.75));

    CHECK_THROWS_AS(path_weights(full_connection({1, 2, 1}), {{1}}, {{1, 0, 0, 1}}), std::domain_error);
}

TEST_CASE("path weights sum to one per ingress") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 5.0);
    for (int trial = 0; trial < 50; ++trial) {
        LayeredNetwork net = full_connection({3, 2, 3});
        RateAssignment g = RateAssignment::zeros(net);
        for (double& v : g.g) v = 0.1 + U(rng);
        auto tab = path_weights(net, {{1, 2, 3}}, g);
        for (const auto& paths : tab.per_ingress) {
            double s = 0;
            for (const auto& p : paths) s += p.weight;
            CHECK(s == doctest::Approx(1).epsilon(1e-12));
        }
    }
}

TEST_CASE("empirical delay of the motivating instance converges to the analytic value") {
    Instance inst = two_by_one();
    EmpiricalRun run = metrics_empirical(inst, fixed({{2, 0.75}}), cfg_of(200, 1, true));
    CHECK(run.report.d_avg == doctest::Approx(450).epsilon(0.05));
    CHECK(run.report.d_max == doctest::Approx(450).epsilon(0.05));
    CHECK(run.extension > 0);

    EmpiricalRun fine = metrics_empirical(inst, fixed({{2, 0.75}}), cfg_of(200, 0.05, false));
    CHECK(fine.report.d_avg == doctest::Approx(450).epsilon(0.002));
}

TEST_CASE("empirical delay is zero without overload") {
    Instance inst{full_connection({1, 1}), {{2}}, {{3}}};
    EmpiricalRun run = metrics_empirical(inst, fixed({{3}}), cfg_of(50, 1, true));
    CHECK(run.report.d_avg == 0);
    CHECK(run.extension == 0);
}

TEST_CASE("sufficient rates and proportional rates give equal empirical delay") {
    Instance inst{n_by_1(3), {{4, 8, 6}}, {{9}}};
    EmpiricalRun prop = metrics_empirical(inst, fixed({{2, 4, 3}}), cfg_of(100, 1, true));
    EmpiricalRun full = metrics_empirical(inst, fixed({{4, 8, 6}}), cfg_of(100, 1, true));
    CHECK(prop.report.d_avg == doctest::Approx(full.report.d_avg).epsilon(0.03));
    CHECK(full.report.d_avg == doctest::Approx(metrics_analytic(inst, {{4, 8, 6}}, cfg_of(100)).d_avg).epsilon(0.03));
}

TEST_CASE("delay csv") {
    std::ostringstream os;
    write_delay_csv_header(os, 2);
    DelayReport rep{{1, 2}, 1.5, 2, DelayMode::analytic};
    write_delay_csv_row(os, "7", "opt-static", rep);
    CHECK(os.str() == "instance_id,policy,d_avg,d_max,d_bar_1,d_bar_2\n7,opt-static,1.5,2,1,2\n");
}
