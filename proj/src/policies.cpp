#include "ovd/policies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ovd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Relative spread of a set of values that should all be equal.
double spread(const std::vector<double>& v) {
    if (v.empty()) return 0;
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (std::isinf(*hi)) return *lo == *hi ? 0 : kInf;
    double scale = std::max(std::abs(*hi), 1e-300);
    return (*hi - *lo) / scale;
}

ClauseResidual clause(std::string name, double residual) {
    return {std::move(name), residual, residual <= kCheckTol};
}

double link_cap(const Link& k) { return k.capacity.is_finite() ? k.capacity.value() : kInf; }

bool is_full_connection(const LayeredNetwork& net) {
    std::size_t expected = 0;
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) expected += net.layer_size(l) * net.layer_size(l + 1);
    return expected == net.num_links();
}

void finish(RegionCheck& rc) {
    rc.in = true;
    for (const auto& c : rc.clauses) {
        if (!c.ok) {
            rc.in = false;
            if (rc.violated.empty()) rc.violated = c.clause;
        }
    }
}

double throughput_residual(const Instance& inst, const RateAssignment& rates, double target) {
    RateAssignment eff = effective_rates(inst.net, inst.arrivals, rates);
    std::vector<double> in = node_inflow_rates(inst.net, inst.arrivals, eff);
    const LayeredNetwork& net = inst.net;
    double thr = 0;
    for (std::size_t j = 0; j < net.num_egress(); ++j)
        thr += std::min(inst.service.mu[j], in[net.node_id(net.num_layers() - 1, j)]);
    return std::abs(thr - target) / std::max(target, 1e-300);
}

}  // namespace

std::string RegionCheck::summary() const {
    std::ostringstream os;
    os << (in ? "in" : "out");
    if (!in) os << " (violated: " << violated << ")";
    if (!gamma.empty()) {
        os << " gamma=(";
        for (std::size_t l = 0; l < gamma.size(); ++l) os << (l ? ", " : "") << gamma[l];
        os << ")";
    }
    return os.str();
}

RegionCheck min_delay_region_check_Nx1(const Instance& inst, const RateAssignment& rates) {
    const LayeredNetwork& net = inst.net;
    if (!net.is_n_by_1()) throw std::invalid_argument("region check needs an N x 1 network");
    if (rates.size() != net.num_links()) throw std::invalid_argument("rate vector size does not match links");
    const auto& lam = inst.arrivals.lambda;
    const double mu = inst.service.mu[0];

    double cap_excess = 0, cover = 0, sum = 0;
    std::vector<double> ratio;
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        std::size_t i = net.link(e).src;
        double g = rates[e];
        const Capacity& c = net.link(e).capacity;
        if (c.is_finite()) cap_excess = std::max(cap_excess, (g - c.value()) / c.value());
        ratio.push_back(g / lam[i]);
        cover = std::max(cover, (lam[i] - g) / lam[i]);
        sum += g;
    }
    ClauseResidual cap = clause("capacity: g_i <= c_i", cap_excess);
    ClauseResidual prop = clause("proportional: g_i / lambda_i equal", spread(ratio));
    ClauseResidual budget = clause("budget: sum g >= mu", std::max(0.0, (mu - sum) / mu));
    ClauseResidual cov = clause("cover: g_i >= lambda_i", std::max(0.0, cover));

    RegionCheck rc;
    rc.clauses = {cap, prop, budget, cov};
    bool first_branch = prop.ok && budget.ok;
    rc.in = cap.ok && (first_branch || cov.ok);
    if (!cap.ok) {
        rc.violated = cap.clause;
    } else if (!rc.in) {
        rc.violated = (prop.ok ? budget.clause : prop.clause) + " and " + cov.clause;
    }
    return rc;
}

RegionCheck min_delay_check_single_hop(const Instance& inst, const RateAssignment& rates) {
    const LayeredNetwork& net = inst.net;
    if (net.num_layers() != 2) throw std::invalid_argument("single-hop check needs exactly 2 layers");
    if (rates.size() != net.num_links()) throw std::invalid_argument("rate vector size does not match links");
    std::vector<double> row, col;
    double short_fall = 0;
    for (std::size_t i = 0; i < net.num_ingress(); ++i)
        row.push_back(egress_sum(net, rates, net.node_id(0, i)) / inst.arrivals.lambda[i]);
    for (std::size_t j = 0; j < net.num_egress(); ++j) {
        double in = ingress_sum(net, rates, net.node_id(1, j));
        double mu = inst.service.mu[j];
        col.push_back(in / mu);
        short_fall = std::max(short_fall, (mu - in) / mu);
    }
    RegionCheck rc;
    rc.clauses = {clause("ingress sums proportional to lambda", spread(row)),
                  clause("egress inflows proportional to mu", spread(col)),
                  clause("egress inflows >= mu", std::max(0.0, short_fall))};
    finish(rc);
    return rc;
}

RegionCheck min_delay_check_multistage(const Instance& inst, const RateAssignment& rates,
                                       const std::optional<GammaVector>& gamma) {
    const LayeredNetwork& net = inst.net;
    check_rates(net, rates);
    const std::size_t L = net.num_layers();
    if (gamma && gamma->size() != L)
        throw std::invalid_argument("gamma needs " + std::to_string(L) + " entries");
    RegionCheck rc;
    for (std::size_t l = 0; l < L; ++l) {
        std::vector<double> ratio;
        for (std::size_t i = 0; i < net.layer_size(l); ++i) {
            std::size_t n = net.node_id(l, i);
            double in = l == 0 ? inst.arrivals.lambda[i] : ingress_sum(net, rates, n);
            double out = l + 1 == L ? inst.service.mu[i] : egress_sum(net, rates, n);
            // an idle middle node carries nothing and never queues
            if (in == 0 && out == 0 && l > 0 && l + 1 < L) continue;
            if (out <= 0) throw std::domain_error("node " + node_key(net, n) + " has zero egress rate");
            ratio.push_back(in / out);
        }
        double g = gamma ? (*gamma)[l] : ratio.empty() ? 0.0 : ratio.front();
        double res = 0;
        for (double r : ratio) res = std::max(res, std::abs(r - g) / std::max(std::abs(g), 1e-300));
        if (!(g > 0)) res = kInf;
        rc.gamma.push_back(g);
        rc.clauses.push_back(clause("layer " + std::to_string(l + 1) + " ingress/egress ratio", res));
    }
    double target = std::min(inst.arrivals.total(), inst.service.total());
    rc.clauses.push_back(clause("maximum throughput", throughput_residual(inst, rates, target)));
    finish(rc);
    return rc;
}

GammaVector gamma_throughput_tight(const ArrivalProfile& arr, const ServiceProfile& svc, std::size_t layers) {
    GammaVector g(layers, 1.0);
    g[0] = arr.total() / svc.total();
    return g;
}

RateAssignment construct_static_rates(const Instance& inst, const GammaVector& gamma) {
    const LayeredNetwork& net = inst.net;
    const std::size_t L = net.num_layers();
    if (gamma.size() != L) throw std::invalid_argument("gamma needs " + std::to_string(L) + " entries");
    for (double g : gamma)
        if (!(g > 0)) throw std::invalid_argument("gamma entries must be positive");
    if (!is_full_connection(net))
        throw std::invalid_argument("construction needs full connection between adjacent layers");
    double prod = std::accumulate(gamma.begin(), gamma.end(), 1.0, std::multiplies<>());
    double need = inst.arrivals.total() / inst.service.total();
    if (std::abs(prod - need) > 1e-9 * need) {
        std::ostringstream os;
        os << "gamma infeasible: product " << prod << " must equal sum lambda / sum mu = " << need;
        throw std::invalid_argument(os.str());
    }

    RateAssignment g = RateAssignment::zeros(net);
    std::vector<double> out(net.num_ingress());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = inst.arrivals.lambda[i] / gamma[0];
    const double mu_total = inst.service.total();
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const bool last = l + 2 == L;
        const std::size_t next = net.layer_size(l + 1);
        std::vector<double> share(next);
        for (std::size_t j = 0; j < next; ++j)
            share[j] = last ? inst.service.mu[j] / mu_total : 1.0 / static_cast<double>(next);
        std::vector<double> in(next, 0.0);
        for (std::size_t i = 0; i < net.layer_size(l); ++i) {
            for (std::size_t e : net.out_links(net.node_id(l, i))) {
                std::size_t j = net.link(e).dst;
                g[e] = out[i] * share[j];
                in[j] += g[e];
            }
        }
        if (!last) {
            out.assign(next, 0.0);
            for (std::size_t j = 0; j < next; ++j) out[j] = in[j] / gamma[l + 1];
        }
    }
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        if (!net.link(e).capacity.admits(g[e])) {
            std::ostringstream os;
            os << "gamma infeasible against capacities: link " << link_key(net, e) << " needs " << g[e]
               << " > " << net.link(e).capacity.value();
            throw std::invalid_argument(os.str());
        }
    }
    RegionCheck rc = min_delay_check_multistage(inst, g, gamma);
    if (!rc.in) throw std::invalid_argument("constructed rates fail the min-delay check: " + rc.violated);
    return g;
}

std::vector<double> water_fill(double budget, const std::vector<double>& weights, const std::vector<double>& caps) {
    const std::size_t n = weights.size();
    std::vector<double> alloc(n, 0.0);
    std::vector<std::size_t> order;
    double wsum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (weights[k] > 0) {
            order.push_back(k);
            wsum += weights[k];
        }
    }
    if (order.empty() || budget <= 0) return alloc;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return caps[a] / weights[a] < caps[b] / weights[b]; });
    double left = budget;
    std::size_t k = 0;
    for (; k < order.size(); ++k) {
        std::size_t x = order[k];
        if (caps[x] / weights[x] * wsum <= left) {
            alloc[x] = caps[x];
            left -= caps[x];
            wsum -= weights[x];
        } else {
            break;
        }
    }
    for (; k < order.size(); ++k) alloc[order[k]] = weights[order[k]] * left / wsum;
    return alloc;
}

QueueProportionalResult queue_proportional_rates(const QueueState& state, const Instance& inst,
                                                 const QueueProportionalOptions& opt) {
    const LayeredNetwork& net = inst.net;
    const std::size_t L = net.num_layers();
    if (state.q.size() != net.num_nodes()) throw std::invalid_argument("state size does not match node count");
    if (opt.gamma) {
        if (opt.gamma->size() != L) throw std::invalid_argument("gamma needs " + std::to_string(L) + " entries");
        for (double g : *opt.gamma)
            if (!(g > 0)) throw std::invalid_argument("gamma entries must be positive");
    }
    QueueProportionalResult res;
    res.rates = RateAssignment::zeros(net);
    const double budget = inst.service.total();
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const bool to_egress = l + 2 == L;
        const std::size_t size = net.layer_size(l);
        std::vector<double> w(size), cap(size, 0.0);
        for (std::size_t i = 0; i < size; ++i) {
            std::size_t n = net.node_id(l, i);
            w[i] = state.q[n] + (state.inflow.empty() ? 0.0 : state.inflow[n]);
            for (std::size_t e : net.out_links(n)) cap[i] += link_cap(net.link(e));
        }
        std::vector<double> egress(size);
        if (opt.gamma) {
            for (std::size_t i = 0; i < size; ++i) {
                egress[i] = w[i] / (*opt.gamma)[l];
                if (egress[i] > cap[i]) {
                    egress[i] = cap[i];
                    res.capacity_limited = true;
                }
            }
        } else {
            egress = water_fill(budget, w, cap);
            double wsum = std::accumulate(w.begin(), w.end(), 0.0);
            double placed = std::accumulate(egress.begin(), egress.end(), 0.0);
            if (wsum > 0 && placed < budget * (1 - 1e-12)) res.capacity_limited = true;
        }
        for (std::size_t i = 0; i < size; ++i) {
            const auto& links = net.out_links(net.node_id(l, i));
            std::vector<double> split, lc;
            for (std::size_t e : links) {
                split.push_back(to_egress ? inst.service.mu[net.link(e).dst] : 1.0);
                lc.push_back(link_cap(net.link(e)));
            }
            std::vector<double> a = water_fill(egress[i], split, lc);
            for (std::size_t k = 0; k < links.size(); ++k) res.rates[links[k]] = a[k];
        }
    }
    return res;
}

RateAssignment backpressure_rates(const QueueState& state, const LayeredNetwork& net) {
    RateAssignment g = RateAssignment::zeros(net);
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        const Link& k = net.link(e);
        if (k.capacity.is_unbounded())
            throw std::invalid_argument("backpressure needs finite capacity on link " + link_key(net, e));
        if (state.q[net.src_node(e)] > state.q[net.dst_node(e)]) g[e] = k.capacity.value();
    }
    return g;
}

RateAssignment max_link_rate_rates(const LayeredNetwork& net) {
    RateAssignment g = RateAssignment::zeros(net);
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        const Link& k = net.link(e);
        if (k.capacity.is_unbounded())
            throw std::invalid_argument("max-link-rate needs finite capacity on link " + link_key(net, e));
        g[e] = k.capacity.value();
    }
    return g;
}

std::vector<double> parent_source_rates(const LayeredNetwork& net, const ArrivalProfile& arr) {
    std::vector<double> pss(net.num_nodes(), 0.0);
    for (std::size_t i = 0; i < net.num_ingress(); ++i) pss[net.node_id(0, i)] = arr.lambda[i];
    for (std::size_t e = 0; e < net.num_links(); ++e) pss[net.dst_node(e)] += pss[net.src_node(e)];
    return pss;
}

namespace {

void require_fan_in_tree(const LayeredNetwork& net) {
    if (!net.is_fan_in_tree()) throw std::invalid_argument("tree condition needs a fan-in tree topology");
}

}  // namespace

RegionCheck tree_rates_check(const Instance& inst, const RateAssignment& rates) {
    const LayeredNetwork& net = inst.net;
    require_fan_in_tree(net);
    check_rates(net, rates);
    std::vector<double> pss = parent_source_rates(net, inst.arrivals);
    RegionCheck rc;
    for (std::size_t n = net.num_ingress(); n < net.num_nodes(); ++n) {
        std::vector<double> ratio;
        for (std::size_t e : net.in_links(n)) ratio.push_back(rates[e] > 0 ? pss[net.src_node(e)] / rates[e] : kInf);
        rc.gamma.push_back(ratio.front());
        rc.clauses.push_back(clause("node " + node_key(net, n) + " parent-source ratio", spread(ratio)));
    }
    double target = 0;
    for (std::size_t j = 0; j < net.num_egress(); ++j)
        target += std::min(inst.service.mu[j], pss[net.node_id(net.num_layers() - 1, j)]);
    rc.clauses.push_back(clause("maximum throughput", throughput_residual(inst, rates, target)));
    finish(rc);
    return rc;
}

RateAssignment tree_construct(const Instance& inst) {
    const LayeredNetwork& net = inst.net;
    require_fan_in_tree(net);
    std::vector<double> pss = parent_source_rates(net, inst.arrivals);
    const std::size_t L = net.num_layers();
    // root egress node of every node, found walking up from layer L
    std::vector<std::size_t> root(net.num_nodes());
    for (std::size_t j = 0; j < net.num_egress(); ++j) root[net.node_id(L - 1, j)] = j;
    for (std::size_t n = net.node_id(L - 1, 0); n-- > 0;) root[n] = root[net.dst_node(net.out_links(n).front())];
    RateAssignment g = RateAssignment::zeros(net);
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        std::size_t src = net.src_node(e);
        std::size_t r = root[src];
        double scale = std::min(1.0, inst.service.mu[r] / pss[net.node_id(L - 1, r)]);
        g[e] = pss[src] * scale;
        if (!net.link(e).capacity.admits(g[e])) {
            std::ostringstream os;
            os << "tree rates exceed capacity on link " << link_key(net, e) << ": " << g[e];
            throw std::invalid_argument(os.str());
        }
    }
    return g;
}

std::vector<double> initial_queue_ratio_Nx1(const ArrivalProfile& arr, const std::vector<double>& q0_ingress,
                                            double horizon) {
    if (!(horizon > 0)) throw std::invalid_argument("horizon must be positive");
    if (q0_ingress.size() != arr.lambda.size()) throw std::invalid_argument("q0 size does not match lambda");
    std::vector<double> w;
    for (std::size_t i = 0; i < arr.lambda.size(); ++i) {
        if (q0_ingress[i] < 0) throw std::invalid_argument("q0 must be nonnegative");
        double l = arr.lambda[i];
        w.push_back(std::sqrt(l * (l + q0_ingress[i] / horizon)));
    }
    return w;
}

PolicySpec PolicySpec::fixed(RateAssignment g) {
    PolicySpec p;
    p.kind = Kind::static_rates;
    p.rates = std::move(g);
    return p;
}

PolicySpec PolicySpec::queue_proportional(std::optional<GammaVector> gamma) {
    PolicySpec p;
    p.kind = Kind::queue_proportional;
    p.queue_options.gamma = std::move(gamma);
    return p;
}

PolicySpec PolicySpec::backpressure() {
    PolicySpec p;
    p.kind = Kind::backpressure;
    return p;
}

PolicySpec PolicySpec::max_link_rate() {
    PolicySpec p;
    p.kind = Kind::max_link_rate;
    return p;
}

PolicySpec PolicySpec::tree() {
    PolicySpec p;
    p.kind = Kind::tree_static;
    return p;
}

PolicySpec PolicySpec::custom(std::function<RateAssignment(const QueueState&)> fn) {
    PolicySpec p;
    p.kind = Kind::custom;
    p.callback = std::move(fn);
    return p;
}

std::string to_string(PolicySpec::Kind kind) {
    switch (kind) {
        case PolicySpec::Kind::static_rates: return "static";
        case PolicySpec::Kind::queue_proportional: return "queue-proportional";
        case PolicySpec::Kind::backpressure: return "backpressure";
        case PolicySpec::Kind::max_link_rate: return "max-link-rate";
        case PolicySpec::Kind::tree_static: return "tree";
        case PolicySpec::Kind::custom: return "custom";
    }
    return "unknown";
}

RateFunction make_rate_function(const Instance& inst, const PolicySpec& spec) {
    switch (spec.kind) {
        case PolicySpec::Kind::static_rates: {
            check_rates(inst.net, spec.rates);
            return [g = spec.rates](const QueueState&) { return g; };
        }
        case PolicySpec::Kind::queue_proportional:
            return [&inst, opt = spec.queue_options](const QueueState& s) {
                return queue_proportional_rates(s, inst, opt).rates;
            };
        case PolicySpec::Kind::backpressure:
            max_link_rate_rates(inst.net);  // fails early on unbounded links
            return [&inst](const QueueState& s) { return backpressure_rates(s, inst.net); };
        case PolicySpec::Kind::max_link_rate:
            return [g = max_link_rate_rates(inst.net)](const QueueState&) { return g; };
        case PolicySpec::Kind::tree_static:
            return [g = tree_construct(inst)](const QueueState&) { return g; };
        case PolicySpec::Kind::custom:
            if (!spec.callback) throw std::invalid_argument("custom policy without a callback");
            return spec.callback;
    }
    throw std::invalid_argument("unknown policy kind");
}

Trajectory run(const Instance& inst, const PolicySpec& spec, const SimConfig& cfg) {
    return run(inst, make_rate_function(inst, spec), cfg);
}

RateAssignment opt_static_rates(const Instance& inst, const SimConfig& cfg) {
    const LayeredNetwork& net = inst.net;
    if (net.is_n_by_1()) {
        std::vector<double> q0(net.num_ingress(), 0.0);
        if (cfg.q0) std::copy_n(cfg.q0->begin(), q0.size(), q0.begin());
        std::vector<double> w = initial_queue_ratio_Nx1(inst.arrivals, q0, cfg.horizon);
        std::vector<double> caps;
        for (const Link& k : net.links()) caps.push_back(link_cap(k));
        // links of an N x 1 network are ordered by source
        return {water_fill(inst.service.mu[0], w, caps)};
    }
    return construct_static_rates(inst, gamma_throughput_tight(inst.arrivals, inst.service, net.num_layers()));
}

}  // namespace ovd
