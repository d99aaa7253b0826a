#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ovd/lp.hpp"
#include "ovd/network.hpp"
#include "ovd/policies.hpp"

namespace ovd {

struct OverloadVerdict {
    bool overloaded = false;
    std::optional<RateAssignment> witness;   // feasible rates when not overloaded
    std::vector<std::string> certificate;    // conflicting constraints when overloaded
    double witness_violation = 0;            // largest residual of the witness
};

/// Static-policy overload test: is there g in [0, c] with layer-1 egress
/// >= lambda, middle-node ingress <= egress and egress-node ingress <= mu?
/// Boundary-feasible systems count as not overloaded. The witness
/// minimizes total link rate.
OverloadVerdict overload_check(const Instance& inst);

/// gamma_l = (S - (l-1)/L (S - M)) / (S - l/L (S - M)) with S = sum lambda,
/// M = sum mu: every layer then accumulates (S - M) / L of the backlog growth.
GammaVector gamma_balanced(const ArrivalProfile& arr, const ServiceProfile& svc, std::size_t layers);

/// Total backlog growth rate per layer under static rates, counting lambda
/// as external ingress and mu as external egress.
std::vector<double> layer_growth(const Instance& inst, const RateAssignment& rates);
/// Backlog growth rate of every node under static rates (same convention).
std::vector<double> node_growth(const Instance& inst, const RateAssignment& rates);

enum class ObjectiveKind { total_bandwidth, max_utilization, avg_utilization, max_overload_rate, max_layer_growth };

ObjectiveKind parse_objective(const std::string& name);
const char* to_string(ObjectiveKind kind);

struct RoutingConstraints {
    std::vector<std::size_t> forced_zero;   // link ids carrying nothing
    std::optional<double> split_cap;        // beta: g_ij <= beta * ingress of i
    std::optional<double> utilization_cap;  // theta: g_ij <= theta * c_ij
};

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::total_bandwidth;
    RoutingConstraints routing;
};

struct CoOptimizeResult {
    bool feasible = false;
    RateAssignment rates;
    double objective = 0;
    RegionCheck check;                       // min-delay check of the optimum with the given gamma
    std::vector<std::string> conflicting;    // when infeasible
};

/// Minimizes the objective over rates meeting the min-delay equalities for a
/// fixed gamma, capacities and routing constraints.
CoOptimizeResult co_optimize(const Instance& inst, const GammaVector& gamma, const ObjectiveSpec& spec);

}  // namespace ovd
