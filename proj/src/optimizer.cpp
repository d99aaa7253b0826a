#include "ovd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ovd {

namespace {

using Terms = std::vector<std::pair<std::size_t, double>>;

std::string node_label(const LayeredNetwork& net, std::size_t n) { return "node " + node_key(net, n); }

void add_capacity_rows(LinearProgram& lp, const LayeredNetwork& net) {
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        const Capacity& c = net.link(e).capacity;
        if (c.is_finite()) lp.add_row("capacity " + link_key(net, e), {{e, 1.0}}, RowSense::le, c.value());
    }
}

}  // namespace

OverloadVerdict overload_check(const Instance& inst) {
    require_valid(inst);
    const LayeredNetwork& net = inst.net;
    const std::size_t L = net.num_layers();
    LinearProgram lp;
    for (std::size_t e = 0; e < net.num_links(); ++e) lp.add_variable("g " + link_key(net, e), 1.0);
    add_capacity_rows(lp, net);
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        NodeRef r = net.node_ref(n);
        Terms t;
        if (r.layer == 0) {
            for (std::size_t e : net.out_links(n)) t.emplace_back(e, 1.0);
            lp.add_row(node_label(net, n) + " egress >= lambda", std::move(t), RowSense::ge,
                       inst.arrivals.lambda[r.index]);
        } else if (r.layer + 1 == L) {
            for (std::size_t e : net.in_links(n)) t.emplace_back(e, 1.0);
            lp.add_row(node_label(net, n) + " ingress <= mu", std::move(t), RowSense::le, inst.service.mu[r.index]);
        } else {
            for (std::size_t e : net.in_links(n)) t.emplace_back(e, 1.0);
            for (std::size_t e : net.out_links(n)) t.emplace_back(e, -1.0);
            lp.add_row(node_label(net, n) + " ingress <= egress", std::move(t), RowSense::le, 0.0);
        }
    }
    LpResult res = solve(lp);
    OverloadVerdict v;
    if (res.status != LpStatus::optimal) {
        v.overloaded = true;
        v.certificate = res.conflicting_rows;
        return v;
    }
    v.overloaded = false;
    v.witness = RateAssignment{res.x};
    v.witness_violation = lp.max_violation(res.x);
    return v;
}

GammaVector gamma_balanced(const ArrivalProfile& arr, const ServiceProfile& svc, std::size_t layers) {
    if (layers < 2) throw std::invalid_argument("need at least 2 layers");
    const double S = arr.total(), M = svc.total(), D = S - M;
    const double L = static_cast<double>(layers);
    GammaVector g;
    for (std::size_t l = 1; l <= layers; ++l) {
        double num = S - static_cast<double>(l - 1) / L * D;
        double den = S - static_cast<double>(l) / L * D;
        if (!(den > 0) || !(num > 0)) {
            std::ostringstream os;
            os << "balanced gamma undefined: layer " << l << " has denominator " << den;
            throw std::domain_error(os.str());
        }
        g.push_back(num / den);
    }
    return g;
}

std::vector<double> node_growth(const Instance& inst, const RateAssignment& rates) {
    const LayeredNetwork& net = inst.net;
    std::vector<double> out(net.num_nodes());
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        NodeRef r = net.node_ref(n);
        double in = r.layer == 0 ? inst.arrivals.lambda[r.index] : ingress_sum(net, rates, n);
        double eg = r.layer + 1 == net.num_layers() ? inst.service.mu[r.index] : egress_sum(net, rates, n);
        out[n] = in - eg;
    }
    return out;
}

std::vector<double> layer_growth(const Instance& inst, const RateAssignment& rates) {
    std::vector<double> per_node = node_growth(inst, rates);
    std::vector<double> out(inst.net.num_layers(), 0.0);
    for (std::size_t n = 0; n < per_node.size(); ++n) out[inst.net.node_ref(n).layer] += per_node[n];
    return out;
}

ObjectiveKind parse_objective(const std::string& name) {
    if (name == "total_bandwidth") return ObjectiveKind::total_bandwidth;
    if (name == "max_utilization") return ObjectiveKind::max_utilization;
    if (name == "avg_utilization") return ObjectiveKind::avg_utilization;
    if (name == "max_overload_rate") return ObjectiveKind::max_overload_rate;
    if (name == "max_layer_growth") return ObjectiveKind::max_layer_growth;
    throw std::invalid_argument("unknown objective '" + name + "'");
}

const char* to_string(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::total_bandwidth: return "total_bandwidth";
        case ObjectiveKind::max_utilization: return "max_utilization";
        case ObjectiveKind::avg_utilization: return "avg_utilization";
        case ObjectiveKind::max_overload_rate: return "max_overload_rate";
        case ObjectiveKind::max_layer_growth: return "max_layer_growth";
    }
    return "unknown";
}

CoOptimizeResult co_optimize(const Instance& inst, const GammaVector& gamma, const ObjectiveSpec& spec) {
    require_valid(inst);
    const LayeredNetwork& net = inst.net;
    const std::size_t L = net.num_layers();
    const std::size_t E = net.num_links();
    if (gamma.size() != L) throw std::invalid_argument("gamma needs " + std::to_string(L) + " entries");
    for (double g : gamma)
        if (!(g > 0)) throw std::invalid_argument("gamma entries must be positive");
    const RoutingConstraints& rc = spec.routing;
    if (rc.split_cap && !(*rc.split_cap > 0 && *rc.split_cap <= 1))
        throw std::invalid_argument("split cap must lie in (0, 1]");
    if (rc.utilization_cap && !(*rc.utilization_cap > 0 && *rc.utilization_cap <= 1))
        throw std::invalid_argument("utilization cap must lie in (0, 1]");

    LinearProgram lp;
    for (std::size_t e = 0; e < E; ++e) lp.add_variable("g " + link_key(net, e));
    add_capacity_rows(lp, net);

    for (std::size_t e : rc.forced_zero) {
        if (e >= E) throw std::out_of_range("forced-zero link id out of range");
        lp.add_row("forced zero " + link_key(net, e), {{e, 1.0}}, RowSense::eq, 0.0);
    }
    if (rc.utilization_cap) {
        for (std::size_t e = 0; e < E; ++e) {
            const Capacity& c = net.link(e).capacity;
            if (c.is_finite())
                lp.add_row("utilization cap " + link_key(net, e), {{e, 1.0}}, RowSense::le,
                           *rc.utilization_cap * c.value());
        }
    }
    if (rc.split_cap) {
        const double beta = *rc.split_cap;
        for (std::size_t e = 0; e < E; ++e) {
            std::size_t src = net.src_node(e);
            NodeRef r = net.node_ref(src);
            if (r.layer == 0) {
                lp.add_row("split cap " + link_key(net, e), {{e, 1.0}}, RowSense::le,
                           beta * inst.arrivals.lambda[r.index]);
            } else {
                Terms t{{e, 1.0}};
                for (std::size_t k : net.in_links(src)) t.emplace_back(k, -beta);
                lp.add_row("split cap " + link_key(net, e), std::move(t), RowSense::le, 0.0);
            }
        }
    }

    // min-delay equalities for the fixed gamma
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        NodeRef r = net.node_ref(n);
        Terms t;
        if (r.layer == 0) {
            for (std::size_t e : net.out_links(n)) t.emplace_back(e, 1.0);
            lp.add_row(node_label(net, n) + " egress = lambda / gamma_1", std::move(t), RowSense::eq,
                       inst.arrivals.lambda[r.index] / gamma[0]);
        } else if (r.layer + 1 == L) {
            for (std::size_t e : net.in_links(n)) t.emplace_back(e, 1.0);
            lp.add_row(node_label(net, n) + " ingress = gamma_L mu", std::move(t), RowSense::eq,
                       gamma[L - 1] * inst.service.mu[r.index]);
        } else {
            for (std::size_t e : net.in_links(n)) t.emplace_back(e, 1.0);
            for (std::size_t e : net.out_links(n)) t.emplace_back(e, -gamma[r.layer]);
            lp.add_row(node_label(net, n) + " ingress = gamma_" + std::to_string(r.layer + 1) + " egress",
                       std::move(t), RowSense::eq, 0.0);
        }
    }

    std::size_t finite_links = 0;
    for (const Link& k : net.links()) finite_links += k.capacity.is_finite();
    auto need_finite = [&] {
        if (finite_links == 0) throw std::invalid_argument("utilization objectives need finite capacities");
    };

    switch (spec.kind) {
        case ObjectiveKind::total_bandwidth:
            for (std::size_t e = 0; e < E; ++e) lp.set_cost(e, 1.0);
            break;
        case ObjectiveKind::avg_utilization:
            need_finite();
            for (std::size_t e = 0; e < E; ++e) {
                const Capacity& c = net.link(e).capacity;
                if (c.is_finite()) lp.set_cost(e, 1.0 / (c.value() * static_cast<double>(finite_links)));
            }
            break;
        case ObjectiveKind::max_utilization: {
            need_finite();
            std::size_t t = lp.add_variable("max utilization", 1.0);
            for (std::size_t e = 0; e < E; ++e) {
                const Capacity& c = net.link(e).capacity;
                if (c.is_finite())
                    lp.add_row("utilization epigraph " + link_key(net, e), {{e, 1.0 / c.value()}, {t, -1.0}},
                               RowSense::le, 0.0);
            }
            break;
        }
        case ObjectiveKind::max_overload_rate:
        case ObjectiveKind::max_layer_growth: {
            // free epigraph variable as a difference of two nonnegative ones
            std::size_t tp = lp.add_variable("bound+", 1.0);
            std::size_t tm = lp.add_variable("bound-", -1.0);
            const bool per_layer = spec.kind == ObjectiveKind::max_layer_growth;
            std::vector<Terms> terms(per_layer ? L : net.num_nodes());
            std::vector<double> constant(terms.size(), 0.0);
            for (std::size_t n = 0; n < net.num_nodes(); ++n) {
                NodeRef r = net.node_ref(n);
                std::size_t slot = per_layer ? r.layer : n;
                if (r.layer == 0) constant[slot] += inst.arrivals.lambda[r.index];
                else
                    for (std::size_t e : net.in_links(n)) terms[slot].emplace_back(e, 1.0);
                if (r.layer + 1 == L) constant[slot] -= inst.service.mu[r.index];
                else
                    for (std::size_t e : net.out_links(n)) terms[slot].emplace_back(e, -1.0);
            }
            for (std::size_t s = 0; s < terms.size(); ++s) {
                Terms t = terms[s];
                t.emplace_back(tp, -1.0);
                t.emplace_back(tm, 1.0);
                std::string name = per_layer ? "growth epigraph layer " + std::to_string(s + 1)
                                             : "growth epigraph " + node_label(net, s);
                lp.add_row(std::move(name), std::move(t), RowSense::le, -constant[s]);
            }
            break;
        }
    }

    LpResult res = solve(lp);
    CoOptimizeResult out;
    if (res.status == LpStatus::infeasible) {
        out.conflicting = res.conflicting_rows;
        return out;
    }
    if (res.status == LpStatus::unbounded) throw std::logic_error("co-optimization LP is unbounded");
    out.feasible = true;
    out.rates = RateAssignment{std::vector<double>(res.x.begin(), res.x.begin() + static_cast<std::ptrdiff_t>(E))};
    out.objective = res.objective;
    try {
        out.check = min_delay_check_multistage(inst, out.rates, gamma);
    } catch (const std::domain_error& e) {
        out.check.in = false;
        out.check.violated = e.what();
    }
    return out;
}

}  // namespace ovd
