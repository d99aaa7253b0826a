#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ovd {

/// Link capacity: a finite positive rate or the unbounded sentinel.
class Capacity {
public:
    static Capacity unbounded() { return Capacity{}; }
    static Capacity finite(double value) { return Capacity{value}; }

    bool is_unbounded() const { return !value_.has_value(); }
    bool is_finite() const { return value_.has_value(); }
    /// Only meaningful for finite capacities.
    double value() const { return *value_; }
    /// True when `rate` fits under this capacity (with a small absolute slack).
    bool admits(double rate, double slack = 1e-9) const {
        return is_unbounded() || rate <= *value_ + slack;
    }

    friend bool operator==(const Capacity&, const Capacity&) = default;

private:
    Capacity() = default;
    explicit Capacity(double v) : value_(v) {}
    std::optional<double> value_;
};

/// A directed link between node `src` of layer `layer` and node `dst` of
/// layer `layer + 1`. All indices are 0-based.
struct Link {
    std::size_t layer = 0;
    std::size_t src = 0;
    std::size_t dst = 0;
    Capacity capacity = Capacity::unbounded();
};

struct NodeRef {
    std::size_t layer = 0;
    std::size_t index = 0;
    friend bool operator==(const NodeRef&, const NodeRef&) = default;
};

/// Immutable layered DAG. Links only join adjacent layers; every link gets a
/// dense id in (layer, src, dst) order, and every node a dense global id in
/// layer-major order.
class LayeredNetwork {
public:
    LayeredNetwork(std::vector<std::size_t> layer_sizes, std::vector<Link> links);

    std::size_t num_layers() const { return layer_sizes_.size(); }
    std::size_t layer_size(std::size_t layer) const { return layer_sizes_[layer]; }
    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    std::size_t num_nodes() const { return offsets_.back(); }
    std::size_t num_links() const { return links_.size(); }
    std::size_t num_ingress() const { return layer_sizes_.front(); }
    std::size_t num_egress() const { return layer_sizes_.back(); }

    const std::vector<Link>& links() const { return links_; }
    const Link& link(std::size_t id) const { return links_[id]; }

    std::size_t node_id(std::size_t layer, std::size_t index) const { return offsets_[layer] + index; }
    std::size_t node_id(NodeRef n) const { return node_id(n.layer, n.index); }
    NodeRef node_ref(std::size_t id) const;
    std::size_t src_node(std::size_t link_id) const;
    std::size_t dst_node(std::size_t link_id) const;

    /// Link ids leaving / entering a node (by global node id).
    const std::vector<std::size_t>& out_links(std::size_t node) const { return out_[node]; }
    const std::vector<std::size_t>& in_links(std::size_t node) const { return in_[node]; }

    std::optional<std::size_t> find_link(std::size_t layer, std::size_t src, std::size_t dst) const;

    bool all_capacities_finite() const;
    bool is_single_hop() const { return num_layers() == 2; }
    bool is_n_by_1() const { return num_layers() == 2 && num_egress() == 1; }
    /// Undirected topology is a tree (connected, |E| = |V| - 1).
    bool is_tree() const;
    /// Every non-egress node has exactly one outgoing link.
    bool is_fan_in_tree() const;

private:
    std::vector<std::size_t> layer_sizes_;
    std::vector<std::size_t> offsets_;
    std::vector<Link> links_;
    std::vector<std::vector<std::size_t>> out_;
    std::vector<std::vector<std::size_t>> in_;
};

struct ArrivalProfile {
    std::vector<double> lambda;
    double total() const;
};

struct ServiceProfile {
    std::vector<double> mu;
    double total() const;
};

/// Static transmission-rate vector indexed by link id.
struct RateAssignment {
    std::vector<double> g;

    static RateAssignment zeros(const LayeredNetwork& net) { return {std::vector<double>(net.num_links(), 0.0)}; }
    double operator[](std::size_t link) const { return g[link]; }
    double& operator[](std::size_t link) { return g[link]; }
    std::size_t size() const { return g.size(); }
};

/// Total set egress rate of a node (sum over its outgoing links).
double egress_sum(const LayeredNetwork& net, const RateAssignment& rates, std::size_t node);
/// Total set ingress rate of a node (sum over its incoming links).
double ingress_sum(const LayeredNetwork& net, const RateAssignment& rates, std::size_t node);

struct SimConfig {
    double t0 = 0.0;
    double horizon = 1.0;  // T
    double dt = 0.01;
    std::optional<std::vector<double>> q0;
    bool discretize = false;

    std::size_t num_steps() const;
};

/// A network together with its demand and service profiles.
struct Instance {
    LayeredNetwork net;
    ArrivalProfile arrivals;
    ServiceProfile service;
};

enum class ValidationKind {
    dimension_mismatch,
    dangling_node,
    nonpositive_value,
    bad_link,
};

struct ValidationError {
    ValidationKind kind;
    std::string message;
};

const char* to_string(ValidationKind kind);

/// Checks every structural and numeric invariant. An empty result means ok.
std::vector<ValidationError> validate(const LayeredNetwork& net, const ArrivalProfile& arr,
                                      const ServiceProfile& svc);

/// Throws std::invalid_argument on a rate vector of the wrong size, a negative
/// rate or a capacity violation; the message names the offending link.
void check_rates(const LayeredNetwork& net, const RateAssignment& rates);

/// Throws std::invalid_argument listing every validation error.
void require_valid(const Instance& inst);

/// "l:i:j" with 1-based indices, the key format of rate files.
std::string link_key(const LayeredNetwork& net, std::size_t link_id);
/// "l:i" with 1-based indices.
std::string node_key(const LayeredNetwork& net, std::size_t node_id);

// Topology helpers. Every adjacent layer pair is fully connected with one
// capacity for the whole pair.
LayeredNetwork full_connection(const std::vector<std::size_t>& layer_sizes,
                               const std::vector<Capacity>& per_layer_capacity);
LayeredNetwork full_connection(const std::vector<std::size_t>& layer_sizes,
                               Capacity capacity = Capacity::unbounded());
LayeredNetwork n_by_1(std::size_t n, const std::vector<Capacity>& capacities);
LayeredNetwork n_by_1(std::size_t n, Capacity capacity = Capacity::unbounded());
/// Fan-in tree: node i of layer l feeds node floor(i * N_{l+1} / N_l) of layer
/// l + 1. Layer sizes must be non-increasing.
LayeredNetwork fan_in_tree(const std::vector<std::size_t>& layer_sizes,
                           Capacity capacity = Capacity::unbounded());

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::string field)
        : std::runtime_error(what), line_(line), field_(std::move(field)) {}
    std::size_t line() const { return line_; }
    const std::string& field() const { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// Parses a topology document. Syntax and schema problems raise ParseError;
/// invariant violations raise std::invalid_argument via require_valid.
Instance parse_instance(const std::string& text);
Instance load_instance(const std::string& path);
/// Canonical form: links sorted by (l, i, j), integral numbers without a
/// fractional part, two-space indentation, trailing newline.
std::string dump_instance(const Instance& inst);
void save_instance(const Instance& inst, const std::string& path);

/// Rate document: a JSON object keyed "l:i:j" (1-based). Links not listed
/// get rate 0; unknown keys raise ParseError.
RateAssignment parse_rates(const LayeredNetwork& net, const std::string& text);
RateAssignment load_rates(const LayeredNetwork& net, const std::string& path);
/// Every link in (l, i, j) order.
std::string dump_rates(const LayeredNetwork& net, const RateAssignment& rates);

/// The seven multi-stage shapes of the benchmark tables.
const std::vector<std::vector<std::size_t>>& benchmark_multistage_shapes();

}  // namespace ovd
