#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ovd/fluid.hpp"

using namespace ovd;

namespace {

Instance two_by_one() {
    return {n_by_1(2, std::vector<Capacity>{Capacity::finite(4), Capacity::finite(2)}), {{8, 3}}, {{2}}};
}

SimConfig cfg_of(double T, double dt, bool integer = false) {
    SimConfig c;
    c.horizon = T;
    c.dt = dt;
    c.discretize = integer;
    return c;
}

}  // namespace

TEST_CASE("ingress node with arrivals above its link rate grows at the difference") {
    Instance inst = two_by_one();
    QueueState s = initial_state(inst, cfg_of(1, 0.1));
    QueueState n = step(s, {{4, 2}}, inst, 0.1);
    CHECK(n.q[0] == doctest::Approx(0.4));  // (8 - 4) * 0.1
    CHECK(n.q[1] == doctest::Approx(0.1));  // (3 - 2) * 0.1
}

TEST_CASE("isolated empty node stays empty") {
    Instance inst{full_connection({1, 1}), {{1}}, {{1}}};
    QueueState s = initial_state(inst, cfg_of(1, 0.1));
    s = step(s, {{1}}, inst, 0.1);
    CHECK(s.q[0] == 0);
    CHECK(s.q[1] == 0);
}

TEST_CASE("egress node with inflow 3 and service 2 grows at 1") {
    Instance inst{full_connection({1, 1}), {{3}}, {{2}}};
    SimConfig c = cfg_of(1, 0.01);
    c.q0 = std::vector<double>{5, 5};
    Trajectory tr = run_static(inst, {{3}}, c);
    CHECK(tr.q.back()[1] == doctest::Approx(6.0));
    CHECK(tr.q.back()[0] == doctest::Approx(5.0));
}

TEST_CASE("rate-proportional 2x1 queues grow linearly") {
    Instance inst = two_by_one();
    Trajectory tr = run_static(inst, {{2, 0.75}}, cfg_of(10, 0.01));
    REQUIRE(tr.num_samples() == 1001);
    CHECK(tr.q.back()[0] == doctest::Approx(60).epsilon(1e-9));
    CHECK(tr.q.back()[1] == doctest::Approx(22.5).epsilon(1e-9));
    CHECK(tr.q.back()[2] == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("halving each link against its arrivals halves growth") {
    Instance inst{n_by_1(3), {{4, 8, 6}}, {{9}}};
    Trajectory tr = run_static(inst, {{2, 4, 3}}, cfg_of(4, 0.5));
    for (std::size_t i = 0; i < 3; ++i) CHECK(tr.q.back()[i] == doctest::Approx(inst.arrivals.lambda[i] / 2 * 4));
}

TEST_CASE("underloaded network with g = lambda keeps queues empty") {
    Instance inst{full_connection({2, 1}), {{1, 2}}, {{5}}};
    Trajectory tr = run_static(inst, {{1, 2}}, cfg_of(5, 0.1));
    for (const auto& q : tr.q)
        for (double v : q) CHECK(v == doctest::Approx(0).scale(1));
}

TEST_CASE("policy rates over capacity are rejected with the link") {
    Instance inst = two_by_one();
    CHECK_THROWS_WITH(run_static(inst, {{5, 1}}, cfg_of(1, 0.1)), doctest::Contains("1:1:1"));
}

TEST_CASE("integer mode keeps whole packets and long-run fluid rates") {
    Instance inst = two_by_one();
    Trajectory tr = run_static(inst, {{2, 0.75}}, cfg_of(200, 1, true));
    for (const auto& q : tr.q)
        for (double v : q) CHECK(v == std::floor(v));
    CHECK(tr.q.back()[0] == doctest::Approx(1200).epsilon(0.01));
    CHECK(tr.q.back()[1] == doctest::Approx(450).epsilon(0.01));
    CHECK(tr.q.back()[2] == doctest::Approx(150).epsilon(0.01));
}

TEST_CASE("trajectory csv layout") {
    Instance inst = two_by_one();
    Trajectory tr = run_static(inst, {{2, 0.75}}, cfg_of(1, 1));
    std::ostringstream os;
    write_trajectory_csv(os, inst.net, tr);
    std::string s = os.str();
    CHECK(s.rfind("t,node_id,q\n", 0) == 0);
    CHECK(s.find("1,1:1,6\n") != std::string::npos);
    CHECK(s.find("1,2:1,0.75\n") != std::string::npos);
}

TEST_CASE("effective rates golden cases") {
    LayeredNetwork net = full_connection({2, 2});
    RateAssignment a = effective_rates(net, {{4, 8}}, {{4, 4, 5, 5}});
    CHECK(a.g == std::vector<double>{2, 2, 4, 4});
    RateAssignment b = effective_rates(net, {{4, 8}}, {{4, 4, 5, 15}});
    CHECK(b.g == std::vector<double>{2, 2, 2, 6});

    // middle node fed 1 + 2 with egress set to 3 + 3
    LayeredNetwork mid = full_connection({2, 1, 2});
    RateAssignment c = effective_rates(mid, {{1, 2}}, {{1, 2, 3, 3}});
    CHECK(c.g == std::vector<double>{1, 2, 1.5, 1.5});
}

TEST_CASE("effective rates are bounded, conserving and idempotent") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.1, 10);
    for (int trial = 0; trial < 200; ++trial) {
        LayeredNetwork net = full_connection({2, 3, 2});
        ArrivalProfile arr{{U(rng), U(rng)}};
        RateAssignment g = RateAssignment::zeros(net);
        for (double& v : g.g) v = U(rng);
        RateAssignment e = effective_rates(net, arr, g);
        std::vector<double> in = node_inflow_rates(net, arr, e);
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(e[k] <= g[k]);
        for (std::size_t n = 0; n < net.num_nodes(); ++n)
            if (!net.out_links(n).empty()) CHECK(egress_sum(net, e, n) <= in[n] * (1 + 1e-12));
        RateAssignment again = effective_rates(net, arr, e);
        for (std::size_t k = 0; k < g.size(); ++k) CHECK(again[k] == doctest::Approx(e[k]).epsilon(1e-12));
    }
}

TEST_CASE("effective rates reject a sink without egress") {
    LayeredNetwork net = full_connection({1, 2, 1});
    CHECK_THROWS_AS(effective_rates(net, {{1}}, {{1, 0, 0, 1}}), std::domain_error);
}

TEST_CASE("long-run link throughputs match effective rates") {
    LayeredNetwork net = full_connection({2, 2, 2});
    Instance inst{net, {{4, 8}}, {{3, 4}}};
    RateAssignment g{{1, 5, 6, 6, 3, 2, 1, 7}};
    RateAssignment e = effective_rates(net, inst.arrivals, g);
    Trajectory tr = run_static(inst, g, cfg_of(400, 0.05));
    std::size_t steps = tr.transfer.size();
    std::size_t from = steps / 2;
    for (std::size_t k = 0; k < net.num_links(); ++k) {
        double sum = 0;
        for (std::size_t s = from; s < steps; ++s) sum += tr.transfer[s][k];
        double rate = sum / (static_cast<double>(steps - from) * tr.dt);
        CHECK(rate == doctest::Approx(e[k]).epsilon(0.01));
    }
}
