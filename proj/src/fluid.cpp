#include "ovd/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ovd {

namespace {

constexpr double kBankEps = 1e-9;

double release(double& bank, double amount) {
    bank += amount;
    double whole = std::floor(bank + kBankEps);
    bank -= whole;
    if (bank < 0) bank = 0;
    return whole;
}

}  // namespace

FluidEngine::FluidEngine(const Instance& inst, double dt, bool discretize)
    : inst_(inst), dt_(dt), discretize_(discretize) {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    arrival_bank_.assign(inst.net.num_ingress(), 0.0);
    link_bank_.assign(inst.net.num_links(), 0.0);
    service_bank_.assign(inst.net.num_egress(), 0.0);
}

void FluidEngine::allocate(double avail, const std::vector<std::size_t>& links, const RateAssignment& rates,
                           std::vector<double>& transfer) {
    if (links.empty()) return;
    if (!discretize_) {
        double want = 0;
        for (std::size_t e : links) want += rates[e] * dt_;
        double scale = (want <= avail || want <= 0) ? 1.0 : avail / want;
        for (std::size_t e : links) transfer[e] = rates[e] * dt_ * scale;
        return;
    }
    // integer mode: whole-packet credits, shared by largest remainder when short
    double want = 0;
    std::vector<double> desired(links.size());
    for (std::size_t k = 0; k < links.size(); ++k) {
        double& bank = link_bank_[links[k]];
        bank += rates[links[k]] * dt_;
        desired[k] = std::floor(bank + kBankEps);
        bank = std::max(0.0, bank - desired[k]);
        want += desired[k];
    }
    if (want <= avail) {
        for (std::size_t k = 0; k < links.size(); ++k) transfer[links[k]] = desired[k];
        return;
    }
    std::vector<double> frac(links.size());
    double given = 0;
    for (std::size_t k = 0; k < links.size(); ++k) {
        double share = avail * desired[k] / want;
        double base = std::floor(share + kBankEps);
        transfer[links[k]] = base;
        frac[k] = share - base;
        given += base;
    }
    std::vector<std::size_t> order(links.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    double left = avail - given;
    for (std::size_t k : order) {
        if (left < 0.5) break;
        if (transfer[links[k]] + 1 <= desired[k]) {
            transfer[links[k]] += 1;
            left -= 1;
        }
    }
}

StepFlows FluidEngine::advance(const QueueState& state, const RateAssignment& rates) {
    const LayeredNetwork& net = inst_.net;
    const std::size_t L = net.num_layers();
    StepFlows f;
    f.arrivals.assign(net.num_ingress(), 0.0);
    f.transfer.assign(net.num_links(), 0.0);
    f.served.assign(net.num_egress(), 0.0);
    f.next.q = state.q;
    f.next.t = state.t + dt_;
    f.next.inflow.assign(net.num_nodes(), 0.0);

    std::vector<double>& q = f.next.q;
    std::vector<double>& inflow = f.next.inflow;
    for (std::size_t i = 0; i < net.num_ingress(); ++i) {
        double a = inst_.arrivals.lambda[i] * dt_;
        if (discretize_) a = release(arrival_bank_[i], a);
        f.arrivals[i] = a;
        inflow[net.node_id(0, i)] = a;
    }
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t i = 0; i < net.layer_size(l); ++i) {
            std::size_t n = net.node_id(l, i);
            double avail = q[n] + inflow[n];
            double sent = 0;
            if (l + 1 < L) {
                allocate(avail, net.out_links(n), rates, f.transfer);
                for (std::size_t e : net.out_links(n)) {
                    sent += f.transfer[e];
                    inflow[net.dst_node(e)] += f.transfer[e];
                }
            } else {
                double cap = inst_.service.mu[i] * dt_;
                if (discretize_) cap = release(service_bank_[i], cap);
                sent = std::min(avail, cap);
                f.served[i] = sent;
            }
            double rest = avail - sent;
            // roundoff from proportional scaling
            if (rest < 0 && rest > -1e-9 * std::max(1.0, avail)) rest = 0;
            if (rest < 0) throw std::logic_error("negative backlog at node " + node_key(net, n));
            q[n] = discretize_ ? std::round(rest) : rest;
        }
    }
    return f;
}

QueueState step(const QueueState& state, const RateAssignment& rates, const Instance& inst, double dt) {
    check_rates(inst.net, rates);
    FluidEngine eng(inst, dt, false);
    return eng.advance(state, rates).next;
}

QueueState initial_state(const Instance& inst, const SimConfig& cfg) {
    QueueState s;
    s.t = cfg.t0;
    s.q.assign(inst.net.num_nodes(), 0.0);
    s.inflow.assign(inst.net.num_nodes(), 0.0);
    if (cfg.q0) {
        if (cfg.q0->size() != inst.net.num_nodes())
            throw std::invalid_argument("q0 has " + std::to_string(cfg.q0->size()) + " entries, network has " +
                                        std::to_string(inst.net.num_nodes()) + " nodes");
        for (std::size_t n = 0; n < s.q.size(); ++n) {
            double v = (*cfg.q0)[n];
            if (!(v >= 0) || !std::isfinite(v))
                throw std::invalid_argument("q0 of node " + node_key(inst.net, n) + " must be nonnegative");
            if (cfg.discretize && v != std::floor(v))
                throw std::invalid_argument("integer mode needs integral q0 at node " + node_key(inst.net, n));
            s.q[n] = v;
        }
    }
    return s;
}

double Trajectory::queue_at(std::size_t node, double t) const {
    if (times.empty()) throw std::logic_error("empty trajectory");
    if (t <= times.front()) return q.front()[node];
    if (t >= times.back()) return q.back()[node];
    double pos = (t - t0) / dt;
    auto k = static_cast<std::size_t>(std::floor(pos));
    if (k + 1 >= times.size()) return q.back()[node];
    double w = pos - static_cast<double>(k);
    return q[k][node] * (1 - w) + q[k + 1][node] * w;
}

Trajectory run(const Instance& inst, const RateFunction& policy, const SimConfig& cfg) {
    require_valid(inst);
    const std::size_t steps = cfg.num_steps();
    FluidEngine eng(inst, cfg.dt, cfg.discretize);
    Trajectory tr;
    tr.t0 = cfg.t0;
    tr.dt = cfg.dt;
    tr.times.reserve(steps + 1);
    tr.q.reserve(steps + 1);
    QueueState s = initial_state(inst, cfg);
    tr.times.push_back(s.t);
    tr.q.push_back(s.q);
    for (std::size_t k = 0; k < steps; ++k) {
        RateAssignment g = policy(s);
        check_rates(inst.net, g);
        StepFlows f = eng.advance(s, g);
        tr.rates.push_back(std::move(g));
        tr.transfer.push_back(std::move(f.transfer));
        s = std::move(f.next);
        // keep timestamps on the grid rather than accumulating roundoff
        s.t = cfg.t0 + static_cast<double>(k + 1) * cfg.dt;
        tr.times.push_back(s.t);
        tr.q.push_back(s.q);
    }
    return tr;
}

Trajectory run_static(const Instance& inst, const RateAssignment& rates, const SimConfig& cfg) {
    return run(inst, [&rates](const QueueState&) { return rates; }, cfg);
}

void write_trajectory_csv(std::ostream& os, const LayeredNetwork& net, const Trajectory& traj) {
    os << "t,node_id,q\n";
    auto old = os.precision(12);
    for (std::size_t k = 0; k < traj.num_samples(); ++k)
        for (std::size_t n = 0; n < net.num_nodes(); ++n)
            os << traj.times[k] << ',' << node_key(net, n) << ',' << traj.q[k][n] << '\n';
    os.precision(old);
}

RateAssignment effective_rates(const LayeredNetwork& net, const ArrivalProfile& arr, const RateAssignment& rates) {
    check_rates(net, rates);
    if (arr.lambda.size() != net.num_ingress()) throw std::invalid_argument("lambda size does not match layer 1");
    RateAssignment out = rates;
    std::vector<double> in(net.num_nodes(), 0.0);
    for (std::size_t i = 0; i < net.num_ingress(); ++i) in[net.node_id(0, i)] = arr.lambda[i];
    for (std::size_t l = 0; l + 1 < net.num_layers(); ++l) {
        for (std::size_t i = 0; i < net.layer_size(l); ++i) {
            std::size_t n = net.node_id(l, i);
            double set = egress_sum(net, rates, n);
            double factor = 1.0;
            if (set > 0) {
                factor = std::min(1.0, in[n] / set);
            } else if (in[n] > 0) {
                throw std::domain_error("node " + node_key(net, n) + " has positive ingress but zero egress rate");
            }
            for (std::size_t e : net.out_links(n)) {
                out[e] = rates[e] * factor;
                in[net.dst_node(e)] += out[e];
            }
        }
    }
    return out;
}

std::vector<double> node_inflow_rates(const LayeredNetwork& net, const ArrivalProfile& arr,
                                      const RateAssignment& effective) {
    std::vector<double> in(net.num_nodes(), 0.0);
    for (std::size_t i = 0; i < net.num_ingress(); ++i) in[net.node_id(0, i)] = arr.lambda[i];
    for (std::size_t e = 0; e < net.num_links(); ++e) in[net.dst_node(e)] += effective[e];
    return in;
}

}  // namespace ovd
