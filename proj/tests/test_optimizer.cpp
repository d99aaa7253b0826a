#include <doctest.h>

#include <algorithm>
#include <random>

#include "ovd/fluid.hpp"
#include "ovd/optimizer.hpp"

using namespace ovd;

TEST_CASE("overload verdicts") {
    Instance capped{n_by_1(2, std::vector<Capacity>{Capacity::finite(4), Capacity::finite(2)}), {{8, 3}}, {{2}}};
    OverloadVerdict v = overload_check(capped);
    CHECK(v.overloaded);
    CHECK_FALSE(v.witness);
    CHECK_FALSE(v.certificate.empty());

    Instance easy{n_by_1(2), {{1, 1}}, {{3}}};
    OverloadVerdict w = overload_check(easy);
    REQUIRE_FALSE(w.overloaded);
    REQUIRE(w.witness);
    CHECK(w.witness->g[0] == doctest::Approx(1));
    CHECK(w.witness->g[1] == doctest::Approx(1));
    CHECK(w.witness_violation <= 1e-9);

    // boundary-feasible counts as not overloaded
    CHECK_FALSE(overload_check(Instance{n_by_1(2), {{1, 2}}, {{3}}}).overloaded);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> lam(12, 20);
    ArrivalProfile arr;
    for (int i = 0; i < 32; ++i) arr.lambda.push_back(lam(rng));
    Instance big{n_by_1(32), arr, {{0.4 * arr.total()}}};
    CHECK(overload_check(big).overloaded);
}

TEST_CASE("witness keeps queues bounded") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.5, 3.0);
    for (int trial = 0; trial < 5; ++trial) {
        Instance inst{full_connection({2, 3, 2}), {{u(rng), u(rng)}}, {{0, 0}}};
        inst.service.mu = {inst.arrivals.total() * 0.6 + u(rng), inst.arrivals.total() * 0.6};
        OverloadVerdict v = overload_check(inst);
        REQUIRE_FALSE(v.overloaded);
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.horizon = 1e4 * cfg.dt;
        std::vector<double> q0(inst.net.num_nodes());
        for (double& x : q0) x = 10 * u(rng);
        cfg.q0 = q0;
        Trajectory tr = run_static(inst, *v.witness, cfg);
        const double bound = *std::max_element(q0.begin(), q0.end()) +
                             (inst.arrivals.total() + inst.service.total()) * cfg.dt;
        for (const auto& q : tr.q)
            for (double x : q) CHECK(x <= bound);
    }
}

TEST_CASE("balanced gamma") {
    GammaVector g = gamma_balanced({{6, 4}}, {{1, 3}}, 2);
    REQUIRE(g.size() == 2);
    CHECK(g[0] == doctest::Approx(10.0 / 7));
    CHECK(g[1] == doctest::Approx(7.0 / 4));

    for (double x : gamma_balanced({{2, 2}}, {{4}}, 3)) CHECK(x == doctest::Approx(1));

    GammaVector h = gamma_balanced({{12}}, {{4}}, 4);
    std::vector<double> want{12.0 / 10, 10.0 / 8, 8.0 / 6, 6.0 / 4};
    for (std::size_t i = 0; i < 4; ++i) CHECK(h[i] == doctest::Approx(want[i]));

    // lambda so far above mu that the last denominator vanishes
    CHECK_THROWS_AS(gamma_balanced({{10}}, {{-10}}, 2), std::domain_error);
}

TEST_CASE("balanced gamma spreads growth evenly") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(1.0, 5.0);
    for (int trial = 0; trial < 10; ++trial) {
        Instance inst{full_connection({3, 2, 3}), {{u(rng), u(rng), u(rng)}}, {{u(rng) / 2, u(rng) / 2, u(rng) / 2}}};
        GammaVector g = gamma_balanced(inst.arrivals, inst.service, 3);
        RateAssignment r = construct_static_rates(inst, g);
        const double want = (inst.arrivals.total() - inst.service.total()) / 3;
        for (double x : layer_growth(inst, r)) CHECK(x == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("N x 1 total bandwidth optimum") {
    Instance inst{n_by_1(2), {{8, 3}}, {{2}}};
    CoOptimizeResult r = co_optimize(inst, gamma_throughput_tight(inst.arrivals, inst.service, 2), {});
    REQUIRE(r.feasible);
    CHECK(r.rates.g[0] == doctest::Approx(16.0 / 11));
    CHECK(r.rates.g[1] == doctest::Approx(6.0 / 11));
    CHECK(r.objective == doctest::Approx(2));
    CHECK(r.check.in);
}

TEST_CASE("forced-zero link reroutes") {
    Instance inst{full_connection({2, 2}), {{4, 8}}, {{2, 4}}};
    GammaVector g = gamma_throughput_tight(inst.arrivals, inst.service, 2);
    ObjectiveSpec spec;
    spec.routing.forced_zero = {*inst.net.find_link(0, 0, 0)};
    CoOptimizeResult r = co_optimize(inst, g, spec);
    REQUIRE(r.feasible);
    CHECK(r.rates.g[*inst.net.find_link(0, 0, 0)] == doctest::Approx(0));
    CHECK(r.rates.g[*inst.net.find_link(0, 0, 1)] == doctest::Approx(4.0 / g[0]));
    CHECK(r.check.in);

    // forcing both links of one source leaves it no route
    spec.routing.forced_zero.push_back(*inst.net.find_link(0, 0, 1));
    CoOptimizeResult bad = co_optimize(inst, g, spec);
    CHECK_FALSE(bad.feasible);
    CHECK_FALSE(bad.conflicting.empty());
}

TEST_CASE("routing caps") {
    Instance inst{full_connection({2, 2}, Capacity::finite(10)), {{4, 8}}, {{2, 4}}};
    GammaVector g = gamma_throughput_tight(inst.arrivals, inst.service, 2);
    ObjectiveSpec spec;
    spec.kind = ObjectiveKind::max_utilization;
    spec.routing.split_cap = 0.7;
    spec.routing.utilization_cap = 0.9;
    CoOptimizeResult r = co_optimize(inst, g, spec);
    REQUIRE(r.feasible);
    for (std::size_t e = 0; e < inst.net.num_links(); ++e) {
        CHECK(r.rates.g[e] <= 9 + 1e-9);
        std::size_t src = inst.net.src_node(e);
        CHECK(r.rates.g[e] <= 0.7 * inst.arrivals.lambda[src] + 1e-9);
    }
    CHECK(r.check.in);

    spec.routing.split_cap = 0.0;
    CHECK_THROWS_AS(co_optimize(inst, g, spec), std::invalid_argument);
    spec.routing.split_cap.reset();
    spec.routing.utilization_cap = 1.5;
    CHECK_THROWS_AS(co_optimize(inst, g, spec), std::invalid_argument);
}

TEST_CASE("every objective passes the checker") {
    Instance inst{full_connection({2, 2, 2}, Capacity::finite(20)), {{5, 7}}, {{3, 2}}};
    GammaVector g = gamma_balanced(inst.arrivals, inst.service, 3);
    for (auto kind : {ObjectiveKind::total_bandwidth, ObjectiveKind::max_utilization, ObjectiveKind::avg_utilization,
                      ObjectiveKind::max_overload_rate, ObjectiveKind::max_layer_growth}) {
        CAPTURE(std::string(to_string(kind)));
        ObjectiveSpec spec;
        spec.kind = kind;
        CoOptimizeResult r = co_optimize(inst, g, spec);
        REQUIRE(r.feasible);
        CHECK_MESSAGE(r.check.in, r.check.violated);
        CHECK(parse_objective(to_string(kind)) == kind);
    }
    // fixed gamma pins the layer growth, so the epigraph value is the balanced share
    ObjectiveSpec spec;
    spec.kind = ObjectiveKind::max_layer_growth;
    CHECK(co_optimize(inst, g, spec).objective == doctest::Approx(7.0 / 3));
    CHECK_THROWS_AS(parse_objective("fastest"), std::invalid_argument);
}

TEST_CASE("total bandwidth equals service on random instances") {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(1.0, 9.0);
    for (int trial = 0; trial < 10; ++trial) {
        Instance nx1{n_by_1(4), {{u(rng), u(rng), u(rng), u(rng)}}, {{0}}};
        nx1.service.mu[0] = 0.5 * nx1.arrivals.total();
        CoOptimizeResult a = co_optimize(nx1, gamma_throughput_tight(nx1.arrivals, nx1.service, 2), {});
        REQUIRE(a.feasible);
        CHECK(a.objective == doctest::Approx(nx1.service.total()).epsilon(1e-10));

        Instance deep{full_connection({2, 2, 2}), {{u(rng), u(rng)}}, {{u(rng) / 3, u(rng) / 3}}};
        CoOptimizeResult b = co_optimize(deep, gamma_throughput_tight(deep.arrivals, deep.service, 3), {});
        REQUIRE(b.feasible);
        // the last hop carries exactly sum mu; earlier hops carry the same flow
        CHECK(b.objective == doctest::Approx(2 * deep.service.total()).epsilon(1e-10));
    }
}

TEST_CASE("joint scaling scales the optimum") {
    Instance inst{full_connection({2, 3}), {{4, 9}}, {{1, 2, 3}}};
    GammaVector g = gamma_throughput_tight(inst.arrivals, inst.service, 2);
    CoOptimizeResult base = co_optimize(inst, g, {});
    Instance scaled = inst;
    for (double& x : scaled.arrivals.lambda) x *= 3.5;
    for (double& x : scaled.service.mu) x *= 3.5;
    CoOptimizeResult big = co_optimize(scaled, g, {});
    REQUIRE(base.feasible);
    REQUIRE(big.feasible);
    CHECK(big.objective == doctest::Approx(3.5 * base.objective));
}
