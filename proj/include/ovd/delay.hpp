#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "ovd/fluid.hpp"
#include "ovd/network.hpp"

namespace ovd {

inline constexpr double kInfiniteDelay = std::numeric_limits<double>::infinity();

/// Continuous piecewise-linear function given by breakpoints; extrapolated
/// linearly from the first and last segments.
class PiecewiseLinear {
public:
    PiecewiseLinear() = default;
    PiecewiseLinear(std::vector<double> xs, std::vector<double> ys);

    double operator()(double x) const;
    /// Exact integral over [a, b].
    double integrate(double a, double b) const;
    const std::vector<double>& xs() const { return xs_; }
    const std::vector<double>& ys() const { return ys_; }

    /// outer(inner(x)) restricted to [a, b]; `inner` must be nondecreasing there.
    static PiecewiseLinear compose(const PiecewiseLinear& outer, const PiecewiseLinear& inner, double a, double b);
    static PiecewiseLinear identity();

    friend PiecewiseLinear operator+(const PiecewiseLinear& f, const PiecewiseLinear& h);
    friend PiecewiseLinear operator*(double k, const PiecewiseLinear& f);

private:
    std::vector<double> xs_, ys_;
};

/// Exact queue functions of a static-rate network. A backlogged node drains
/// at its set egress rate (mu at egress nodes); an empty node forwards what
/// it receives up to that rate. Upstream nodes emptying only lowers inflows
/// further down, so each node empties at most once and the solution has at
/// most one breakpoint per node.
struct StaticQueueSolution {
    std::vector<PiecewiseLinear> q;  // per node, valid for t >= t0
    std::vector<double> drain_rate;  // per node: set egress rate, or mu
    std::vector<double> empty_time;  // per node: when it last empties (inf if never, t0 if never queued)
};

StaticQueueSolution solve_static_queues(const Instance& inst, const RateAssignment& rates,
                                        const std::vector<double>& q0, double t0);

/// Queueing delay of a packet entering `path` (global node ids, layer 1 to
/// layer L) at time t: each hop adds q_k(tau_k) / drain_k evaluated when the
/// packet reaches that hop. Returns kInfiniteDelay if a hop has backlog but
/// no drain.
double packet_delay(const StaticQueueSolution& sol, const std::vector<std::size_t>& path, double t);
/// Same recursion on a sampled trajectory, with drains taken from static rates.
double packet_delay(const Instance& inst, const RateAssignment& rates, const Trajectory& traj,
                    const std::vector<std::size_t>& path, double t);

struct WeightedPath {
    std::vector<std::size_t> nodes;  // global node ids
    double weight = 0;
};

/// Per ingress node, every path with positive weight. Weights are products of
/// per-hop splitting fractions of the effective rates and sum to 1 per
/// ingress.
struct PathWeightTable {
    std::vector<std::vector<WeightedPath>> per_ingress;
};

PathWeightTable path_weights(const LayeredNetwork& net, const ArrivalProfile& arr, const RateAssignment& rates);

enum class DelayMode { analytic, empirical };

struct DelayReport {
    std::vector<double> d_bar;  // per ingress node
    double d_avg = 0;
    double d_max = 0;
    DelayMode mode = DelayMode::analytic;
};

/// Fills d_avg and d_max from d_bar (lambda-weighted mean and max).
void finish_report(DelayReport& rep, const ArrivalProfile& arr);

/// Exact per-ingress time averages of the path-weighted packet delay over
/// [t0, t0 + T] for static rates. Nonzero q0 is supported on N x 1 networks
/// only.
DelayReport metrics_analytic(const Instance& inst, const RateAssignment& rates, const SimConfig& cfg);

/// The smallest achievable D_avg and D_max on a q0 = 0 instance:
/// (T / 2) * max(sum lambda / sum mu - 1, 0).
double min_delay_value(const ArrivalProfile& arr, const ServiceProfile& svc, double horizon);

struct EmpiricalRun {
    DelayReport report;
    double extension = 0;          // time simulated past t0 + T to drain tagged packets
    std::size_t steps = 0;         // steps inside the horizon
    // Per arrival step inside the horizon: tagged amount and amount * sojourn
    // summed over ingress nodes.
    std::vector<double> born_mass;
    std::vector<double> born_delay;

    /// Arrival-weighted mean sojourn over packets born in [a, b).
    double window_average(double t0, double dt, double a, double b) const;
};

/// Tagged simulation: per-node FIFO queues of (ingress, birth step, amount)
/// batches driven by the engine's flows. Packets arriving in [t0, t0 + T]
/// are tagged; the run continues past the horizon until they all leave, up
/// to `max_extension_factor * T` extra time.
EmpiricalRun metrics_empirical(const Instance& inst, const RateFunction& policy, const SimConfig& cfg,
                               double max_extension_factor = 100.0);

/// `instance_id,policy,d_avg,d_max,d_bar_1,...`
void write_delay_csv_header(std::ostream& os, std::size_t num_ingress);
void write_delay_csv_row(std::ostream& os, const std::string& instance_id, const std::string& policy,
                         const DelayReport& rep);

}  // namespace ovd
