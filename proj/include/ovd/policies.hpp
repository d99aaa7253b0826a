#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ovd/fluid.hpp"
#include "ovd/network.hpp"

namespace ovd {

/// Per-layer ratio between a node's ingress and egress rate, gamma_1..gamma_L.
using GammaVector = std::vector<double>;

struct ClauseResidual {
    std::string clause;
    double residual = 0;  // 0 when satisfied exactly
    bool ok = true;
};

struct RegionCheck {
    bool in = false;
    std::string violated;  // first violated clause; empty when in
    std::vector<ClauseResidual> clauses;
    GammaVector gamma;     // multistage and tree checks: the ratios used
    std::string summary() const;
};

/// Relative tolerance used by every membership check.
inline constexpr double kCheckTol = 1e-9;

/// N x 1 min-delay region: (sum g >= mu and g_i / lambda_i all equal) or
/// (g_i >= lambda_i for all i), intersected with g <= c.
RegionCheck min_delay_region_check_Nx1(const Instance& inst, const RateAssignment& rates);

/// Single-hop sufficient condition: ingress sums proportional to lambda,
/// egress-node inflows proportional to mu, and each inflow at least mu_j.
RegionCheck min_delay_check_single_hop(const Instance& inst, const RateAssignment& rates);

/// Multi-stage sufficient condition: every node of layer l has
/// ingress / egress = gamma_l (lambda as layer-1 ingress, mu as layer-L
/// egress), and the effective throughput equals min(sum lambda, sum mu).
/// gamma is inferred when not supplied. Idle middle nodes (no ingress, no
/// egress) are skipped. Throws std::domain_error when any other node has
/// zero egress rate.
RegionCheck min_delay_check_multistage(const Instance& inst, const RateAssignment& rates,
                                       const std::optional<GammaVector>& gamma = std::nullopt);

/// Static rates meeting the multi-stage condition for a given gamma on a
/// network with full connection between adjacent layers. Each node sends
/// ingress / gamma_l; middle layers receive equal shares, egress nodes
/// shares proportional to mu. Requires prod(gamma) = sum lambda / sum mu
/// and rates within capacity, otherwise std::invalid_argument.
RateAssignment construct_static_rates(const Instance& inst, const GammaVector& gamma);

/// (sum lambda / sum mu, 1, ..., 1): all backlog builds at the ingress layer.
GammaVector gamma_throughput_tight(const ArrivalProfile& arr, const ServiceProfile& svc, std::size_t layers);

struct QueueProportionalOptions {
    /// When set, node egress is weight / gamma_l; otherwise every layer sends
    /// sum mu in total, shared in proportion to the weights.
    std::optional<GammaVector> gamma;
};

struct QueueProportionalResult {
    RateAssignment rates;
    bool capacity_limited = false;  // some budget could not be placed under capacities
};

/// Rates proportional to q + (inflow seen over the last step). Splits go to
/// egress nodes in proportion to mu and evenly to middle nodes. Budgets that
/// hit capacities are water-filled over the remaining links.
QueueProportionalResult queue_proportional_rates(const QueueState& state, const Instance& inst,
                                                 const QueueProportionalOptions& opt = {});

/// g_ij = c_ij when q_i > q_j, else 0. Throws on unbounded capacities.
RateAssignment backpressure_rates(const QueueState& state, const LayeredNetwork& net);

/// g = c on every link. Throws on unbounded capacities.
RateAssignment max_link_rate_rates(const LayeredNetwork& net);

/// Sum of lambda over the ingress ancestors of every node.
std::vector<double> parent_source_rates(const LayeredNetwork& net, const ArrivalProfile& arr);

/// Tree condition: for every node, PSS-rate(parent) / g(parent, node) is the
/// same over its parents, with maximum tree throughput
/// sum_j min(mu_j, PSS-rate(j)). gamma holds the per-node ratios.
RegionCheck tree_rates_check(const Instance& inst, const RateAssignment& rates);

/// g(i, j) = PSS-rate(i) * min(1, mu_r / PSS-rate(r)), r the egress root of i.
RateAssignment tree_construct(const Instance& inst);

/// Weights sqrt(lambda_i (lambda_i + q0_i / T)); their pairwise ratios are
/// the rate ratios for N x 1 with initial backlog.
std::vector<double> initial_queue_ratio_Nx1(const ArrivalProfile& arr, const std::vector<double>& q0_ingress,
                                            double horizon);

/// Water-fills `budget` over items with weights and caps (caps may be
/// infinite). Returns the allocation; its sum is min(budget, sum caps over
/// positive-weight items).
std::vector<double> water_fill(double budget, const std::vector<double>& weights, const std::vector<double>& caps);

struct PolicySpec {
    enum class Kind { static_rates, queue_proportional, backpressure, max_link_rate, tree_static, custom };

    Kind kind = Kind::static_rates;
    RateAssignment rates;                      // static_rates
    QueueProportionalOptions queue_options;    // queue_proportional
    std::function<RateAssignment(const QueueState&)> callback;  // custom

    static PolicySpec fixed(RateAssignment g);
    static PolicySpec queue_proportional(std::optional<GammaVector> gamma = std::nullopt);
    static PolicySpec backpressure();
    static PolicySpec max_link_rate();
    static PolicySpec tree();
    static PolicySpec custom(std::function<RateAssignment(const QueueState&)> fn);
};

std::string to_string(PolicySpec::Kind kind);

/// Rate function for a policy on an instance. Static kinds are resolved once.
RateFunction make_rate_function(const Instance& inst, const PolicySpec& spec);

Trajectory run(const Instance& inst, const PolicySpec& spec, const SimConfig& cfg);

/// The static min-delay reference: initial-queue weighting on N x 1,
/// throughput-tight construction elsewhere.
RateAssignment opt_static_rates(const Instance& inst, const SimConfig& cfg);

}  // namespace ovd
