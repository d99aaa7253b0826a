#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "ovd/network.hpp"

namespace ovd {

struct QueueState {
    std::vector<double> q;       // backlog per node (global node id)
    double t = 0.0;
    std::vector<double> inflow;  // amount that entered each node during the previous step
};

/// What happened during one step, plus the state it led to.
struct StepFlows {
    std::vector<double> arrivals;  // per ingress node
    std::vector<double> transfer;  // per link
    std::vector<double> served;    // per egress node
    QueueState next;
};

/// Decides the rate vector to apply for the step starting at `state`.
using RateFunction = std::function<RateAssignment(const QueueState&)>;

/// Stepper for the layered fluid dynamics. Layers are processed top-down
/// inside a step, so traffic that enters a node during a step can leave it
/// in the same step. A node never sends more than its backlog plus that
/// step's inflow; when short, its links share what is available in
/// proportion to their set rates. Egress nodes serve work-conservingly.
///
/// In integer mode every transfer is a whole number of packets. Each
/// arrival, link and server keeps a credit bank; a step releases floor(bank)
/// and keeps the fraction, so long-run rates equal the fluid rates.
class FluidEngine {
public:
    FluidEngine(const Instance& inst, double dt, bool discretize);

    StepFlows advance(const QueueState& state, const RateAssignment& rates);

    double dt() const { return dt_; }
    bool discretize() const { return discretize_; }
    const Instance& instance() const { return inst_; }

private:
    void allocate(double avail, const std::vector<std::size_t>& links, const RateAssignment& rates,
                  std::vector<double>& transfer);

    const Instance& inst_;
    double dt_;
    bool discretize_;
    std::vector<double> arrival_bank_;
    std::vector<double> link_bank_;
    std::vector<double> service_bank_;
};

/// One fluid-mode step.
QueueState step(const QueueState& state, const RateAssignment& rates, const Instance& inst, double dt);

/// Initial state from the config; integer mode requires integral q0.
QueueState initial_state(const Instance& inst, const SimConfig& cfg);

struct Trajectory {
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<double> times;                 // steps + 1 samples
    std::vector<std::vector<double>> q;        // per sample, per node
    std::vector<RateAssignment> rates;         // per step (one fewer than samples)
    std::vector<std::vector<double>> transfer; // per step, per link

    std::size_t num_samples() const { return times.size(); }
    /// Backlog of a node at time t, linear between samples, clamped to the ends.
    double queue_at(std::size_t node, double t) const;
};

/// Integrates the dynamics over [t0, t0 + T]. Rates returned by the policy
/// are checked against capacities every step.
Trajectory run(const Instance& inst, const RateFunction& policy, const SimConfig& cfg);
Trajectory run_static(const Instance& inst, const RateAssignment& rates, const SimConfig& cfg);

/// CSV with header `t,node_id,q`; node ids are "layer:index", 1-based.
void write_trajectory_csv(std::ostream& os, const LayeredNetwork& net, const Trajectory& traj);

/// Realized link rates once upstream starvation is accounted for: each node
/// scales its set egress rates by min(1, effective ingress / set egress),
/// with lambda as the ingress of layer 1. Throws std::domain_error when a
/// non-egress node has positive ingress but zero set egress.
RateAssignment effective_rates(const LayeredNetwork& net, const ArrivalProfile& arr, const RateAssignment& rates);

/// Per-node total effective ingress under `effective` (lambda for layer 1).
std::vector<double> node_inflow_rates(const LayeredNetwork& net, const ArrivalProfile& arr,
                                      const RateAssignment& effective);

}  // namespace ovd
