#include "ovd/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ovd {

using nlohmann::json;

LayeredNetwork::LayeredNetwork(std::vector<std::size_t> layer_sizes, std::vector<Link> links)
    : layer_sizes_(std::move(layer_sizes)), links_(std::move(links)) {
    if (layer_sizes_.size() < 2)
        throw std::invalid_argument("network needs at least 2 layers");
    offsets_.assign(layer_sizes_.size() + 1, 0);
    for (std::size_t l = 0; l < layer_sizes_.size(); ++l) {
        if (layer_sizes_[l] == 0)
            throw std::invalid_argument("layer " + std::to_string(l + 1) + " is empty");
        offsets_[l + 1] = offsets_[l] + layer_sizes_[l];
    }
    for (const Link& k : links_) {
        if (k.layer + 1 >= layer_sizes_.size() || k.src >= layer_sizes_[k.layer] ||
            k.dst >= layer_sizes_[k.layer + 1]) {
            throw std::invalid_argument("link (" + std::to_string(k.layer + 1) + ", " + std::to_string(k.src + 1) +
                                        ", " + std::to_string(k.dst + 1) + ") is out of range");
        }
    }
    std::sort(links_.begin(), links_.end(), [](const Link& a, const Link& b) {
        return std::tie(a.layer, a.src, a.dst) < std::tie(b.layer, b.src, b.dst);
    });
    for (std::size_t e = 1; e < links_.size(); ++e) {
        const Link& a = links_[e - 1];
        const Link& b = links_[e];
        if (a.layer == b.layer && a.src == b.src && a.dst == b.dst)
            throw std::invalid_argument("duplicate link (" + std::to_string(a.layer + 1) + ", " +
                                        std::to_string(a.src + 1) + ", " + std::to_string(a.dst + 1) + ")");
    }
    out_.assign(num_nodes(), {});
    in_.assign(num_nodes(), {});
    for (std::size_t e = 0; e < links_.size(); ++e) {
        out_[src_node(e)].push_back(e);
        in_[dst_node(e)].push_back(e);
    }
}

NodeRef LayeredNetwork::node_ref(std::size_t id) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), id);
    std::size_t layer = static_cast<std::size_t>(it - offsets_.begin()) - 1;
    return {layer, id - offsets_[layer]};
}

std::size_t LayeredNetwork::src_node(std::size_t link_id) const {
    const Link& k = links_[link_id];
    return node_id(k.layer, k.src);
}

std::size_t LayeredNetwork::dst_node(std::size_t link_id) const {
    const Link& k = links_[link_id];
    return node_id(k.layer + 1, k.dst);
}

std::optional<std::size_t> LayeredNetwork::find_link(std::size_t layer, std::size_t src, std::size_t dst) const {
    if (layer + 1 >= num_layers() || src >= layer_sizes_[layer]) return std::nullopt;
    for (std::size_t e : out_[node_id(layer, src)])
        if (links_[e].dst == dst) return e;
    return std::nullopt;
}

bool LayeredNetwork::all_capacities_finite() const {
    return std::all_of(links_.begin(), links_.end(), [](const Link& k) { return k.capacity.is_finite(); });
}

bool LayeredNetwork::is_tree() const {
    if (links_.size() + 1 != num_nodes()) return false;
    // union-find over nodes
    std::vector<std::size_t> parent(num_nodes());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t e = 0; e < links_.size(); ++e) {
        std::size_t a = find(src_node(e)), b = find(dst_node(e));
        if (a == b) return false;
        parent[a] = b;
    }
    return true;
}

bool LayeredNetwork::is_fan_in_tree() const {
    for (std::size_t n = 0; n < offsets_[num_layers() - 1]; ++n)
        if (out_[n].size() != 1) return false;
    return is_tree();
}

double ArrivalProfile::total() const { return std::accumulate(lambda.begin(), lambda.end(), 0.0); }
double ServiceProfile::total() const { return std::accumulate(mu.begin(), mu.end(), 0.0); }

double egress_sum(const LayeredNetwork& net, const RateAssignment& rates, std::size_t node) {
    double s = 0;
    for (std::size_t e : net.out_links(node)) s += rates[e];
    return s;
}

double ingress_sum(const LayeredNetwork& net, const RateAssignment& rates, std::size_t node) {
    double s = 0;
    for (std::size_t e : net.in_links(node)) s += rates[e];
    return s;
}

std::size_t SimConfig::num_steps() const {
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (!(horizon > 0)) throw std::invalid_argument("horizon must be positive");
    if (dt > horizon * (1 + 1e-12)) throw std::invalid_argument("dt exceeds the horizon");
    // tolerate T/dt landing a hair above an integer
    double n = horizon / dt;
    double r = std::round(n);
    if (std::abs(n - r) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(r);
    return static_cast<std::size_t>(std::ceil(n));
}

const char* to_string(ValidationKind kind) {
    switch (kind) {
        case ValidationKind::dimension_mismatch: return "dimension mismatch";
        case ValidationKind::dangling_node: return "dangling node";
        case ValidationKind::nonpositive_value: return "nonpositive value";
        case ValidationKind::bad_link: return "bad link";
    }
    return "unknown";
}

std::string link_key(const LayeredNetwork& net, std::size_t link_id) {
    const Link& k = net.link(link_id);
    return std::to_string(k.layer + 1) + ":" + std::to_string(k.src + 1) + ":" + std::to_string(k.dst + 1);
}

std::string node_key(const LayeredNetwork& net, std::size_t node_id) {
    NodeRef r = net.node_ref(node_id);
    return std::to_string(r.layer + 1) + ":" + std::to_string(r.index + 1);
}

namespace {

std::string fmt_num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<ValidationError> validate(const LayeredNetwork& net, const ArrivalProfile& arr,
                                      const ServiceProfile& svc) {
    std::vector<ValidationError> errs;
    if (arr.lambda.size() != net.num_ingress())
        errs.push_back({ValidationKind::dimension_mismatch,
                        "dimension mismatch: lambda has " + std::to_string(arr.lambda.size()) + " entries, layer 1 has " +
                            std::to_string(net.num_ingress()) + " nodes"});
    if (svc.mu.size() != net.num_egress())
        errs.push_back({ValidationKind::dimension_mismatch,
                        "dimension mismatch: mu has " + std::to_string(svc.mu.size()) + " entries, layer " +
                            std::to_string(net.num_layers()) + " has " + std::to_string(net.num_egress()) + " nodes"});
    for (std::size_t i = 0; i < arr.lambda.size(); ++i)
        if (!(arr.lambda[i] > 0) || !std::isfinite(arr.lambda[i]))
            errs.push_back({ValidationKind::nonpositive_value,
                            "nonpositive value: lambda[" + std::to_string(i + 1) + "] = " + fmt_num(arr.lambda[i])});
    for (std::size_t j = 0; j < svc.mu.size(); ++j)
        if (!(svc.mu[j] > 0) || !std::isfinite(svc.mu[j]))
            errs.push_back({ValidationKind::nonpositive_value,
                            "nonpositive value: mu[" + std::to_string(j + 1) + "] = " + fmt_num(svc.mu[j])});
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        const Capacity& c = net.link(e).capacity;
        if (c.is_finite() && (!(c.value() > 0) || !std::isfinite(c.value())))
            errs.push_back({ValidationKind::nonpositive_value,
                            "nonpositive value: capacity of link " + link_key(net, e) + " = " + fmt_num(c.value())});
    }
    const std::size_t L = net.num_layers();
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        NodeRef r = net.node_ref(n);
        bool needs_out = r.layer + 1 < L;
        bool needs_in = r.layer > 0;
        if (needs_out && net.out_links(n).empty())
            errs.push_back({ValidationKind::dangling_node, "dangling node: " + node_key(net, n) + " has no egress link"});
        if (needs_in && net.in_links(n).empty())
            errs.push_back({ValidationKind::dangling_node, "dangling node: " + node_key(net, n) + " has no ingress link"});
    }
    return errs;
}

void require_valid(const Instance& inst) {
    auto errs = validate(inst.net, inst.arrivals, inst.service);
    if (errs.empty()) return;
    std::string msg;
    for (const auto& e : errs) {
        if (!msg.empty()) msg += "; ";
        msg += e.message;
    }
    throw std::invalid_argument(msg);
}

void check_rates(const LayeredNetwork& net, const RateAssignment& rates) {
    if (rates.size() != net.num_links())
        throw std::invalid_argument("rate vector has " + std::to_string(rates.size()) + " entries, network has " +
                                    std::to_string(net.num_links()) + " links");
    for (std::size_t e = 0; e < net.num_links(); ++e) {
        double g = rates[e];
        if (!std::isfinite(g) || g < 0)
            throw std::invalid_argument("invalid rate " + fmt_num(g) + " on link " + link_key(net, e));
        const Capacity& c = net.link(e).capacity;
        if (!c.admits(g, 1e-9 * std::max(1.0, c.is_finite() ? c.value() : 1.0)))
            throw std::invalid_argument("rate " + fmt_num(g) + " exceeds capacity " + fmt_num(c.value()) +
                                        " on link " + link_key(net, e));
    }
}

LayeredNetwork full_connection(const std::vector<std::size_t>& layer_sizes,
                               const std::vector<Capacity>& per_layer_capacity) {
    if (layer_sizes.size() < 2 || per_layer_capacity.size() != layer_sizes.size() - 1)
        throw std::invalid_argument("full_connection: need one capacity per adjacent layer pair");
    std::vector<Link> links;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        for (std::size_t i = 0; i < layer_sizes[l]; ++i)
            for (std::size_t j = 0; j < layer_sizes[l + 1]; ++j)
                links.push_back({l, i, j, per_layer_capacity[l]});
    return LayeredNetwork(layer_sizes, std::move(links));
}

LayeredNetwork full_connection(const std::vector<std::size_t>& layer_sizes, Capacity capacity) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("full_connection: need at least 2 layers");
    return full_connection(layer_sizes, std::vector<Capacity>(layer_sizes.size() - 1, capacity));
}

LayeredNetwork n_by_1(std::size_t n, const std::vector<Capacity>& capacities) {
    if (capacities.size() != n) throw std::invalid_argument("n_by_1: need one capacity per ingress node");
    std::vector<Link> links;
    for (std::size_t i = 0; i < n; ++i) links.push_back({0, i, 0, capacities[i]});
    return LayeredNetwork({n, 1}, std::move(links));
}

LayeredNetwork n_by_1(std::size_t n, Capacity capacity) {
    return n_by_1(n, std::vector<Capacity>(n, capacity));
}

LayeredNetwork fan_in_tree(const std::vector<std::size_t>& layer_sizes, Capacity capacity) {
    std::vector<Link> links;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        if (layer_sizes[l + 1] > layer_sizes[l])
            throw std::invalid_argument("fan_in_tree: layer sizes must be non-increasing");
        for (std::size_t i = 0; i < layer_sizes[l]; ++i)
            links.push_back({l, i, i * layer_sizes[l + 1] / layer_sizes[l], capacity});
    }
    return LayeredNetwork(layer_sizes, std::move(links));
}

const std::vector<std::vector<std::size_t>>& benchmark_multistage_shapes() {
    static const std::vector<std::vector<std::size_t>> shapes = {
        {16, 12, 16}, {12, 16, 12}, {16, 12, 8, 6}, {6, 8, 12, 16},
        {15, 12, 9, 12, 15}, {9, 12, 15, 12, 9}, {12, 12, 12, 12, 12},
    };
    return shapes;
}

// ---- serialization ----

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Best-effort line for a schema error: first occurrence of the quoted key.
std::size_t line_of_key(const std::string& text, const std::string& key) {
    auto pos = text.find("\"" + key + "\"");
    return pos == std::string::npos ? 0 : line_of_offset(text, pos);
}

[[noreturn]] void schema_error(const std::string& text, const std::string& field, const std::string& what) {
    std::size_t line = line_of_key(text, field);
    std::string msg = "schema error at field '" + field + "'";
    if (line) msg += " (line " + std::to_string(line) + ")";
    throw ParseError(msg + ": " + what, line, field);
}

std::vector<double> number_array(const json& doc, const std::string& text, const std::string& key) {
    if (!doc.contains(key)) schema_error(text, key, "missing");
    const json& a = doc.at(key);
    if (!a.is_array()) schema_error(text, key, "expected an array");
    std::vector<double> out;
    for (const json& v : a) {
        if (!v.is_number()) schema_error(text, key, "expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

std::size_t index_field(const json& link, const std::string& text, const char* name, std::size_t lo) {
    if (!link.contains(name)) schema_error(text, std::string("links.") + name, "missing");
    const json& v = link.at(name);
    if (!v.is_number_integer() || v.get<long long>() < static_cast<long long>(lo))
        schema_error(text, std::string("links.") + name, "expected an integer >= " + std::to_string(lo));
    return static_cast<std::size_t>(v.get<long long>());
}

json number_json(double v) {
    if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9e15) return json(static_cast<long long>(v));
    return json(v);
}

}  // namespace

Instance parse_instance(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("parse error at line " + std::to_string(line) + ": " + e.what(), line, "");
    }
    if (!doc.is_object()) throw ParseError("parse error at line 1: document must be an object", 1, "");

    if (!doc.contains("layers")) schema_error(text, "layers", "missing");
    if (!doc.at("layers").is_array()) schema_error(text, "layers", "expected an array");
    std::vector<std::size_t> layers;
    for (const json& v : doc.at("layers")) {
        if (!v.is_number_integer() || v.get<long long>() < 1)
            schema_error(text, "layers", "expected positive integers");
        layers.push_back(static_cast<std::size_t>(v.get<long long>()));
    }
    if (layers.size() < 2) schema_error(text, "layers", "need at least 2 layers");

    if (!doc.contains("links")) schema_error(text, "links", "missing");
    if (!doc.at("links").is_array()) schema_error(text, "links", "expected an array");
    std::vector<Link> links;
    for (const json& k : doc.at("links")) {
        if (!k.is_object()) schema_error(text, "links", "expected objects {l, i, j, c}");
        Link link;
        link.layer = index_field(k, text, "l", 1) - 1;
        link.src = index_field(k, text, "i", 1) - 1;
        link.dst = index_field(k, text, "j", 1) - 1;
        if (!k.contains("c")) schema_error(text, "links.c", "missing");
        const json& c = k.at("c");
        if (c.is_string()) {
            if (c.get<std::string>() != "unbounded") schema_error(text, "links.c", "string capacity must be \"unbounded\"");
            link.capacity = Capacity::unbounded();
        } else if (c.is_number()) {
            link.capacity = Capacity::finite(c.get<double>());
        } else {
            schema_error(text, "links.c", "expected a number or \"unbounded\"");
        }
        links.push_back(link);
    }

    ArrivalProfile arr{number_array(doc, text, "lambda")};
    ServiceProfile svc{number_array(doc, text, "mu")};
    Instance inst{LayeredNetwork(std::move(layers), std::move(links)), std::move(arr), std::move(svc)};
    require_valid(inst);
    return inst;
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_instance(ss.str());
}

std::string dump_instance(const Instance& inst) {
    json doc = json::object();
    doc["layers"] = inst.net.layer_sizes();
    json links = json::array();
    for (const Link& k : inst.net.links()) {
        json o = json::object();
        o["l"] = k.layer + 1;
        o["i"] = k.src + 1;
        o["j"] = k.dst + 1;
        o["c"] = k.capacity.is_unbounded() ? json("unbounded") : number_json(k.capacity.value());
        links.push_back(o);
    }
    doc["links"] = links;
    json lam = json::array(), mu = json::array();
    for (double v : inst.arrivals.lambda) lam.push_back(number_json(v));
    for (double v : inst.service.mu) mu.push_back(number_json(v));
    doc["lambda"] = lam;
    doc["mu"] = mu;
    return doc.dump(2) + "\n";
}

RateAssignment parse_rates(const LayeredNetwork& net, const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError("parse error at line " + std::to_string(line) + ": " + e.what(), line, "");
    }
    if (!doc.is_object()) throw ParseError("rate document must be an object keyed \"l:i:j\"", 1, "");
    RateAssignment g = RateAssignment::zeros(net);
    for (const auto& [key, v] : doc.items()) {
        std::size_t l = 0, i = 0, j = 0;
        char c1 = 0, c2 = 0;
        std::istringstream ks(key);
        bool ok = static_cast<bool>(ks >> l >> c1 >> i >> c2 >> j) && ks.peek() == EOF && c1 == ':' && c2 == ':' &&
                  l >= 1 && i >= 1 && j >= 1;
        if (!ok) schema_error(text, key, "expected a key of the form l:i:j");
        auto id = net.find_link(l - 1, i - 1, j - 1);
        if (!id) schema_error(text, key, "no such link");
        if (!v.is_number()) schema_error(text, key, "expected a number");
        g.g[*id] = v.get<double>();
    }
    return g;
}

RateAssignment load_rates(const LayeredNetwork& net, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_rates(net, ss.str());
}

std::string dump_rates(const LayeredNetwork& net, const RateAssignment& rates) {
    if (rates.size() != net.num_links()) throw std::invalid_argument("rate vector size does not match links");
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (std::size_t e = 0; e < net.num_links(); ++e) doc[link_key(net, e)] = number_json(rates.g[e]);
    return doc.dump(2) + "\n";
}

void save_instance(const Instance& inst, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << dump_instance(inst);
}

}  // namespace ovd
