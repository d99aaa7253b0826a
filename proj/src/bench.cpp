#include "ovd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "ovd/fluid.hpp"

namespace ovd {

Family parse_family(const std::string& name) {
    if (name == "nx1") return Family::nx1;
    if (name == "nsxnd") return Family::ns_x_nd;
    if (name == "multistage") return Family::multistage;
    if (name == "tree") return Family::tree;
    throw std::invalid_argument("unknown family '" + name + "'");
}

const char* to_string(Family f) {
    switch (f) {
        case Family::nx1: return "nx1";
        case Family::ns_x_nd: return "nsxnd";
        case Family::multistage: return "multistage";
        case Family::tree: return "tree";
    }
    return "unknown";
}

void ExperimentConfig::validate() const {
    auto range_ok = [](const Range& r) { return std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi; };
    if (shape.size() < 2) throw std::invalid_argument("shape needs at least 2 layers");
    for (std::size_t s : shape)
        if (s == 0) throw std::invalid_argument("shape has an empty layer");
    if (!range_ok(lambda) || lambda.lo <= 0) throw std::invalid_argument("lambda range must be nonempty and positive");
    if (capacity && (!range_ok(*capacity) || capacity->lo <= 0))
        throw std::invalid_argument("capacity range must be nonempty and positive");
    if (q0 && (!range_ok(*q0) || q0->lo < 0)) throw std::invalid_argument("q0 range must be nonempty and nonnegative");
    if (!(mu_fraction > 0)) throw std::invalid_argument("mu fraction must be positive");
    if (num_instances == 0) throw std::invalid_argument("need at least one instance");
    if (!(horizon > 0) || !(dt > 0)) throw std::invalid_argument("horizon and dt must be positive");
    if (policies.empty()) throw std::invalid_argument("no policies to compare");
    if (family == Family::nx1 && (shape.size() != 2 || shape[1] != 1))
        throw std::invalid_argument("nx1 family needs shape N x 1");
    if (family == Family::ns_x_nd && shape.size() != 2) throw std::invalid_argument("nsxnd family is single-hop");
    if (family == Family::tree)
        for (std::size_t l = 1; l < shape.size(); ++l)
            if (shape[l] > shape[l - 1]) throw std::invalid_argument("tree layers must not grow");
}

namespace {

std::vector<std::size_t> parse_shape(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, 'x')) {
        if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
            throw std::invalid_argument("bad shape '" + s + "'");
        out.push_back(std::stoul(part));
    }
    return out;
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    if (name == "nx1-sufficient" || name == "nx1-limited") {
        c.family = Family::nx1;
        c.shape = {32, 1};
        c.lambda = {12, 20};
        c.capacity = name == "nx1-sufficient" ? Range{20, 35} : Range{5, 15};
        c.q0 = Range{101, 300};
        c.horizon = 200;
        return c;
    }
    if (name == "32x16") {
        c.family = Family::ns_x_nd;
        c.shape = {32, 16};
        c.lambda = {60, 100};
        c.capacity = Range{100, 175};
        c.horizon = 50;
        return c;
    }
    auto colon = name.find(':');
    if (colon != std::string::npos) {
        std::string kind = name.substr(0, colon);
        if (kind == "multistage" || kind == "tree") {
            c.family = kind == "tree" ? Family::tree : Family::multistage;
            c.shape = parse_shape(name.substr(colon + 1));
            c.lambda = {30, 50};
            c.capacity = Range{50, 88};
            c.horizon = 50;
            c.validate();
            return c;
        }
    }
    throw std::invalid_argument("unknown preset '" + name + "'");
}

std::vector<double> dirichlet_weights(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> cuts{0.0};
    for (std::size_t k = 0; k + 1 < n; ++k) cuts.push_back(u(rng));
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    std::vector<double> w;
    for (std::size_t k = 0; k < n; ++k) w.push_back(cuts[k + 1] - cuts[k]);
    return w;
}

SampledInstance sample_instance(const ExperimentConfig& cfg, std::mt19937_64& rng, std::size_t index) {
    cfg.validate();
    auto draw = [&](const Range& r) { return std::round(std::uniform_real_distribution<double>(r.lo, r.hi)(rng)); };

    LayeredNetwork base = cfg.family == Family::tree ? fan_in_tree(cfg.shape) : full_connection(cfg.shape);
    // ingress ancestors per node, so tree links can carry their whole subtree
    std::vector<double> feeders(base.num_nodes(), 0.0);
    for (std::size_t i = 0; i < base.num_ingress(); ++i) feeders[i] = 1;
    for (std::size_t e = 0; e < base.num_links(); ++e) feeders[base.dst_node(e)] += feeders[base.src_node(e)];

    std::vector<Link> links = base.links();
    if (cfg.capacity) {
        for (std::size_t e = 0; e < links.size(); ++e) {
            double scale = cfg.family == Family::tree ? feeders[base.src_node(e)] : 1.0;
            links[e].capacity = Capacity::finite(scale * draw(*cfg.capacity));
        }
    }

    SampledInstance s{"", Instance{LayeredNetwork(cfg.shape, std::move(links)), {}, {}}, {}};
    std::ostringstream id;
    id << to_string(cfg.family) << '-' << std::setw(4) << std::setfill('0') << index;
    s.id = id.str();

    for (std::size_t i = 0; i < cfg.shape.front(); ++i) s.inst.arrivals.lambda.push_back(draw(cfg.lambda));
    const double budget = cfg.mu_fraction * s.inst.arrivals.total();
    const std::size_t nd = cfg.shape.back();
    if (nd == 1) {
        s.inst.service.mu = {std::max(1.0, std::round(budget))};
    } else {
        for (double a : dirichlet_weights(nd, rng)) s.inst.service.mu.push_back(std::max(1.0, std::round(a * budget)));
    }

    s.sim.horizon = cfg.horizon;
    s.sim.dt = cfg.dt;
    s.sim.discretize = cfg.integer;
    if (cfg.q0) {
        std::vector<double> q(s.inst.net.num_nodes(), 0.0);
        for (std::size_t i = 0; i < s.inst.net.num_ingress(); ++i) q[i] = draw(*cfg.q0);
        s.sim.q0 = std::move(q);
    }
    require_valid(s.inst);
    return s;
}

PolicySpec policy_by_name(const std::string& name, const Instance& inst, const SimConfig& sim) {
    if (name == "OPT") {
        if (!inst.net.is_n_by_1() && inst.net.is_fan_in_tree()) return PolicySpec::fixed(tree_construct(inst));
        return PolicySpec::fixed(opt_static_rates(inst, sim));
    }
    if (name == "BP") return PolicySpec::backpressure();
    if (name == "MAX") return PolicySpec::max_link_rate();
    if (name == "QP") return PolicySpec::queue_proportional();
    if (name == "TREE") return PolicySpec::tree();
    throw std::invalid_argument("unknown policy '" + name + "'");
}

namespace {

double ratio(double x, double opt) {
    if (opt > 0) return x / opt;
    return x == 0 ? 1.0 : std::numeric_limits<double>::infinity();
}

struct InstanceOutcome {
    std::vector<ResultRow> rows;
    std::vector<std::string> failures;
};

InstanceOutcome evaluate(const ExperimentConfig& cfg, const SampledInstance& s) {
    InstanceOutcome out;
    std::map<std::string, DelayReport> reports;
    for (const std::string& p : cfg.policies) {
        try {
            PolicySpec spec = policy_by_name(p, s.inst, s.sim);
            EmpiricalRun run = metrics_empirical(s.inst, make_rate_function(s.inst, spec), s.sim,
                                                 cfg.max_extension_factor);
            reports[p] = run.report;
        } catch (const std::exception& e) {
            out.failures.push_back(s.id + " " + p + ": " + e.what());
        }
    }
    auto opt = reports.find("OPT");
    for (const std::string& p : cfg.policies) {
        auto it = reports.find(p);
        if (it == reports.end()) continue;
        ResultRow r;
        r.instance_id = s.id;
        r.policy = p;
        r.d_avg = it->second.d_avg;
        r.d_max = it->second.d_max;
        const double nan = std::numeric_limits<double>::quiet_NaN();
        r.ratio_avg_vs_opt = opt == reports.end() ? nan : ratio(r.d_avg, opt->second.d_avg);
        r.ratio_max_vs_opt = opt == reports.end() ? nan : ratio(r.d_max, opt->second.d_max);
        r.fairness = ratio(r.d_max, r.d_avg);
        out.rows.push_back(r);
    }
    return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::vector<SampledInstance> instances;
    for (std::size_t k = 0; k < cfg.num_instances; ++k) instances.push_back(sample_instance(cfg, rng, k));

    std::vector<InstanceOutcome> outcomes(instances.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < instances.size(); k = next++) outcomes[k] = evaluate(cfg, instances[k]);
    };
    unsigned n = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    n = std::min<unsigned>(n, static_cast<unsigned>(instances.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    ExperimentResult res;
    for (InstanceOutcome& o : outcomes) {
        res.rows.insert(res.rows.end(), o.rows.begin(), o.rows.end());
        res.failures.insert(res.failures.end(), o.failures.begin(), o.failures.end());
    }
    return res;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << "instance_id,policy,d_avg,d_max,ratio_avg_vs_opt,ratio_max_vs_opt,fairness\n";
    std::ostringstream line;
    line << std::setprecision(10);
    for (const ResultRow& r : rows) {
        line.str("");
        line << r.instance_id << ',' << r.policy << ',' << r.d_avg << ',' << r.d_max << ',' << r.ratio_avg_vs_opt
             << ',' << r.ratio_max_vs_opt << ',' << r.fairness << '\n';
        os << line.str();
    }
}

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    std::vector<CdfPoint> cdf;
    const double n = static_cast<double>(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) cdf.push_back({values[k], static_cast<double>(k + 1) / n});
    return cdf;
}

void write_cdf_csv(std::ostream& os, const std::vector<CdfPoint>& cdf) {
    os << "value,probability\n" << std::setprecision(10);
    for (const CdfPoint& p : cdf) os << p.value << ',' << p.probability << '\n';
}

std::vector<PolicySummary> summarize(const std::vector<ResultRow>& rows) {
    std::vector<PolicySummary> out;
    std::map<std::string, std::size_t> slot;
    std::vector<std::size_t> finite_ratios;
    for (const ResultRow& r : rows) {
        auto [it, fresh] = slot.emplace(r.policy, out.size());
        if (fresh) {
            out.push_back({});
            out.back().policy = r.policy;
            finite_ratios.push_back(0);
        }
        PolicySummary& s = out[it->second];
        ++s.count;
        s.mean_d_avg += r.d_avg;
        s.mean_d_max += r.d_max;
        s.mean_fairness += r.fairness;
        s.max_fairness = std::max(s.max_fairness, r.fairness);
        if (std::isfinite(r.ratio_avg_vs_opt) && std::isfinite(r.ratio_max_vs_opt)) {
            ++finite_ratios[it->second];
            s.mean_ratio_avg += r.ratio_avg_vs_opt;
            s.mean_ratio_max += r.ratio_max_vs_opt;
            s.max_ratio_avg = std::max(s.max_ratio_avg, r.ratio_avg_vs_opt);
            s.max_ratio_max = std::max(s.max_ratio_max, r.ratio_max_vs_opt);
        }
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        PolicySummary& s = out[k];
        const double n = static_cast<double>(s.count);
        s.mean_d_avg /= n;
        s.mean_d_max /= n;
        s.mean_fairness /= n;
        if (finite_ratios[k]) {
            s.mean_ratio_avg /= static_cast<double>(finite_ratios[k]);
            s.mean_ratio_max /= static_cast<double>(finite_ratios[k]);
        }
    }
    return out;
}

void write_summary_csv(std::ostream& os, const std::vector<PolicySummary>& summary) {
    os << "policy,count,mean_d_avg,mean_d_max,mean_ratio_avg,max_ratio_avg,mean_ratio_max,max_ratio_max,"
          "mean_fairness,max_fairness\n"
       << std::setprecision(10);
    for (const PolicySummary& s : summary)
        os << s.policy << ',' << s.count << ',' << s.mean_d_avg << ',' << s.mean_d_max << ',' << s.mean_ratio_avg
           << ',' << s.max_ratio_avg << ',' << s.mean_ratio_max << ',' << s.max_ratio_max << ',' << s.mean_fairness
           << ',' << s.max_fairness << '\n';
}

void write_experiment(const ExperimentResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto open = [&](const std::string& name) {
        std::ofstream f(fs::path(dir) / name);
        if (!f) throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
        return f;
    };
    {
        auto f = open("results.csv");
        write_results_csv(f, res.rows);
    }
    {
        auto f = open("summary.csv");
        write_summary_csv(f, summarize(res.rows));
    }
    {
        auto f = open("failures.txt");
        for (const std::string& s : res.failures) f << s << '\n';
    }
    std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> by_policy;
    for (const ResultRow& r : res.rows) {
        by_policy[r.policy].first.push_back(r.d_avg);
        by_policy[r.policy].second.push_back(r.d_max);
    }
    for (auto& [p, v] : by_policy) {
        auto a = open("cdf_" + p + "_d_avg.csv");
        write_cdf_csv(a, empirical_cdf(v.first));
        auto m = open("cdf_" + p + "_d_max.csv");
        write_cdf_csv(m, empirical_cdf(v.second));
    }
}

ConjectureVerdict conjecture_check(const Instance& inst, const RateAssignment& rates, double horizon) {
    ConjectureVerdict v;
    try {
        RateAssignment eff = effective_rates(inst.net, inst.arrivals, rates);
        v.predicted_min = min_delay_check_multistage(inst, eff).in;
    } catch (const std::domain_error&) {
        v.predicted_min = false;
    }
    SimConfig cfg;
    cfg.horizon = horizon;
    v.minimum = min_delay_value(inst.arrivals, inst.service, horizon);
    try {
        DelayReport rep = metrics_analytic(inst, rates, cfg);
        v.d_avg = rep.d_avg;
        v.d_max = rep.d_max;
    } catch (const std::domain_error&) {
        v.d_avg = v.d_max = kInfiniteDelay;
    }
    // D_avg is stationary at the minimum, so a first-order departure from the
    // region can show up only in D_max
    const double tol = 1e-6 * std::max(v.minimum, 1e-12);
    v.empirical_min = std::abs(v.d_avg - v.minimum) <= tol && std::abs(v.d_max - v.minimum) <= tol;
    v.relative_gap = std::max(std::abs(v.d_avg - v.minimum), std::abs(v.d_max - v.minimum)) /
                     std::max(v.minimum, 1e-12);
    v.agree = v.predicted_min == v.empirical_min;
    return v;
}

namespace {

// A min-delay member for gamma_l = R^{w_l}, w on the simplex, reshuffled by
// random 2x2 circulations that keep every node sum.
RateAssignment random_region_member(const Instance& inst, std::mt19937_64& rng) {
    const LayeredNetwork& net = inst.net;
    const std::size_t L = net.num_layers();
    const double R = inst.arrivals.total() / inst.service.total();
    std::vector<double> w = dirichlet_weights(L, rng);
    GammaVector gamma;
    for (double x : w) gamma.push_back(std::pow(R, x));
    // keep the product exact
    double prod = 1;
    for (std::size_t l = 0; l + 1 < L; ++l) prod *= gamma[l];
    gamma[L - 1] = R / prod;
    RateAssignment g = construct_static_rates(inst, gamma);

    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < L; ++l) {
        if (net.layer_size(l) < 2 || net.layer_size(l + 1) < 2) continue;
        std::uniform_int_distribution<std::size_t> pick_i(0, net.layer_size(l) - 1), pick_j(0, net.layer_size(l + 1) - 1);
        std::size_t i = pick_i(rng), i2 = pick_i(rng), j = pick_j(rng), j2 = pick_j(rng);
        if (i == i2 || j == j2) continue;
        std::size_t a = *net.find_link(l, i, j), b = *net.find_link(l, i2, j2);
        std::size_t c = *net.find_link(l, i, j2), d = *net.find_link(l, i2, j);
        double room = std::min(g.g[c], g.g[d]);
        double delta = u(rng) * room;
        g.g[a] += delta;
        g.g[b] += delta;
        g.g[c] -= delta;
        g.g[d] -= delta;
    }
    return g;
}

}  // namespace

ConjectureSweepResult conjecture_sweep(const ConjectureSweepConfig& cfg) {
    ConjectureSweepResult res;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (const auto& shape : cfg.shapes) {
        for (std::size_t k = 0; k < cfg.samples; ++k) {
            Instance inst{full_connection(shape), {}, {}};
            for (std::size_t i = 0; i < shape.front(); ++i) inst.arrivals.lambda.push_back(1 + 9 * u(rng));
            const double budget = (0.2 + 0.7 * u(rng)) * inst.arrivals.total();
            for (double a : dirichlet_weights(shape.back(), rng))
                inst.service.mu.push_back(std::max(0.05, a) * budget);

            RateAssignment g = RateAssignment::zeros(inst.net);
            const double mode = u(rng);
            const double top = 2 * *std::max_element(inst.arrivals.lambda.begin(), inst.arrivals.lambda.end());
            if (mode < 0.2) {
                for (double& x : g.g) x = top * u(rng);
            } else {
                g = random_region_member(inst, rng);
                if (mode < 0.4) {
                    // unchanged member
                } else if (mode < 0.7 || mode >= 0.85) {
                    // over-provision whole nodes; realized rates fall back to the member
                    for (std::size_t n = 0; n < inst.net.num_nodes(); ++n) {
                        double s = 1 + 2 * u(rng);
                        for (std::size_t e : inst.net.out_links(n)) g.g[e] *= s;
                    }
                }
                if (mode >= 0.7) {
                    std::uniform_int_distribution<std::size_t> pick(0, inst.net.num_links() - 1);
                    double f = u(rng) < 0.5 ? 0.9 * u(rng) : 1.1 + u(rng);
                    g.g[pick(rng)] *= f;
                }
            }
            ConjectureVerdict v = conjecture_check(inst, g, cfg.horizon);
            ++res.total;
            res.agreed += v.agree;
            res.predicted_min += v.predicted_min;
            res.empirical_min += v.empirical_min;
            if (!v.agree) res.counterexamples.push_back({inst, g, v});
        }
    }
    return res;
}

std::string counterexample_json(const ConjectureCounterexample& c) {
    nlohmann::ordered_json j;
    j["instance"] = nlohmann::json::parse(dump_instance(c.inst));
    nlohmann::ordered_json rates;
    for (std::size_t e = 0; e < c.inst.net.num_links(); ++e) rates[link_key(c.inst.net, e)] = c.rates.g[e];
    j["rates"] = rates;
    j["predicted_min"] = c.verdict.predicted_min;
    j["empirical_min"] = c.verdict.empirical_min;
    j["d_avg"] = c.verdict.d_avg;
    j["d_max"] = c.verdict.d_max;
    j["relative_gap"] = c.verdict.relative_gap;
    j["minimum"] = c.verdict.minimum;
    return j.dump(2) + "\n";
}

}  // namespace ovd
