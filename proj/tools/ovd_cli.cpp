#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ovd/bench.hpp"
#include "ovd/delay.hpp"
#include "ovd/fluid.hpp"
#include "ovd/optimizer.hpp"
#include "ovd/policies.hpp"

using namespace ovd;
namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

struct Globals {
    std::uint64_t seed = 1;
    std::string out;
    std::string format = "csv";
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Writes to <out>/<name> when --out is set, stdout otherwise.
void emit(const Globals& g, const std::string& name, const std::string& body) {
    if (g.out.empty()) {
        std::cout << body;
        return;
    }
    fs::create_directories(g.out);
    std::ofstream f(fs::path(g.out) / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (fs::path(g.out) / name).string());
    f << body;
    std::cerr << "wrote " << (fs::path(g.out) / name).string() << "\n";
}

PolicySpec policy_from_flag(const std::string& flag, const Instance& inst, const SimConfig& sim) {
    if (flag == "opt-static") return policy_by_name("OPT", inst, sim);
    if (flag == "opt-queue") return PolicySpec::queue_proportional();
    if (flag == "bp") return PolicySpec::backpressure();
    if (flag == "max") return PolicySpec::max_link_rate();
    if (flag == "tree") return PolicySpec::tree();
    if (flag.rfind("custom:", 0) == 0) return PolicySpec::fixed(load_rates(inst.net, flag.substr(7)));
    throw std::invalid_argument("unknown policy '" + flag + "'");
}

ojson report_json(const DelayReport& r) {
    ojson j;
    j["mode"] = r.mode == DelayMode::analytic ? "analytic" : "empirical";
    j["d_avg"] = r.d_avg;
    j["d_max"] = r.d_max;
    j["d_bar"] = r.d_bar;
    return j;
}

ojson check_json(const RegionCheck& rc) {
    ojson j;
    j["in_region"] = rc.in;
    if (!rc.violated.empty()) j["violated"] = rc.violated;
    if (!rc.gamma.empty()) j["gamma"] = rc.gamma;
    ojson clauses = ojson::array();
    for (const ClauseResidual& c : rc.clauses) clauses.push_back({{"clause", c.clause}, {"residual", c.residual}, {"ok", c.ok}});
    j["clauses"] = clauses;
    return j;
}

std::string check_text(const RegionCheck& rc) {
    std::ostringstream os;
    os << (rc.in ? "in min-delay region" : "NOT in min-delay region") << "\n";
    for (const ClauseResidual& c : rc.clauses)
        os << "  " << (c.ok ? "ok  " : "FAIL") << "  " << c.clause << "  residual=" << c.residual << "\n";
    return os.str();
}

GammaVector gamma_from_flag(const std::string& flag, const Instance& inst) {
    const std::size_t L = inst.net.num_layers();
    if (flag == "balanced") return gamma_balanced(inst.arrivals, inst.service, L);
    if (flag == "tight") return gamma_throughput_tight(inst.arrivals, inst.service, L);
    nlohmann::json j = nlohmann::json::parse(read_file(flag));
    return j.get<GammaVector>();
}

RoutingConstraints constraints_from_file(const std::string& path, const LayeredNetwork& net) {
    RoutingConstraints rc;
    nlohmann::json j = nlohmann::json::parse(read_file(path));
    for (const auto& key : j.value("forced_zero", std::vector<std::string>{})) {
        RateAssignment probe = parse_rates(net, "{\"" + key + "\": 1}");
        for (std::size_t e = 0; e < probe.size(); ++e)
            if (probe.g[e] > 0) rc.forced_zero.push_back(e);
    }
    if (j.contains("split_cap")) rc.split_cap = j.at("split_cap").get<double>();
    if (j.contains("utilization_cap")) rc.utilization_cap = j.at("utilization_cap").get<double>();
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Layered-network delay simulator, policy checker and optimizer"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--out", g.out, "Output directory (stdout when omitted)");
    app.add_option("--format", g.format, "Report format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Run a policy and report delays");
    std::string instance_path, policy = "opt-static", metrics = "empirical";
    SimConfig cfg;
    cfg.horizon = 100;
    cfg.dt = 0.1;
    std::vector<double> q0;
    sim->add_option("--instance", instance_path, "Topology document")->required()->check(CLI::ExistingFile);
    sim->add_option("--policy", policy, "opt-static, opt-queue, bp, max, tree or custom:<file>")->capture_default_str();
    sim->add_option("--horizon", cfg.horizon, "Tagging window T")->capture_default_str();
    sim->add_option("--t0", cfg.t0, "Start time")->capture_default_str();
    sim->add_option("--dt", cfg.dt, "Step size")->capture_default_str();
    sim->add_flag("--integer", cfg.discretize, "Integer packet mode");
    sim->add_option("--q0", q0, "Initial backlog per node, layer-major")->delimiter(',');
    sim->add_option("--metrics", metrics, "empirical or analytic")
        ->check(CLI::IsMember({"empirical", "analytic"}))
        ->capture_default_str();

    // check
    auto* chk = app.add_subcommand("check", "Test a static rate vector against the min-delay conditions");
    std::string rates_path, checker = "auto";
    std::vector<double> gamma_list;
    bool use_effective = false;
    chk->add_option("--instance", instance_path, "Topology document")->required()->check(CLI::ExistingFile);
    chk->add_option("--rates", rates_path, "Rate document keyed l:i:j")->required()->check(CLI::ExistingFile);
    chk->add_option("--checker", checker, "auto, nx1, single-hop, multistage or tree")
        ->check(CLI::IsMember({"auto", "nx1", "single-hop", "multistage", "tree"}))
        ->capture_default_str();
    chk->add_option("--gamma", gamma_list, "Fixed gamma for the multistage checker")->delimiter(',');
    chk->add_flag("--effective", use_effective, "Check the realized (effective) rates instead");

    // optimize
    auto* opt = app.add_subcommand("optimize", "Co-optimize a secondary objective under the min-delay constraints");
    std::string objective = "total_bandwidth", gamma_flag = "balanced", constraints_path;
    opt->add_option("--instance", instance_path, "Topology document")->required()->check(CLI::ExistingFile);
    opt->add_option("--objective", objective, "total_bandwidth, max_utilization, avg_utilization, "
                                              "max_overload_rate or max_layer_growth")
        ->capture_default_str();
    opt->add_option("--gamma", gamma_flag, "balanced, tight or a JSON array file")->capture_default_str();
    opt->add_option("--constraints", constraints_path, "JSON with forced_zero, split_cap, utilization_cap")
        ->check(CLI::ExistingFile);

    // overload
    auto* ovl = app.add_subcommand("overload", "Decide whether static policies leave the network overloaded");
    ovl->add_option("--instance", instance_path, "Topology document")->required()->check(CLI::ExistingFile);

    // bench
    auto* bench = app.add_subcommand("bench", "Sample instances and compare policies");
    std::string preset_name = "nx1-sufficient";
    std::size_t instances = 50;
    unsigned threads = 0;
    double bench_dt = 0.1;
    std::vector<std::string> policies;
    bench->add_option("--preset", preset_name,
                      "nx1-sufficient, nx1-limited, 32x16, multistage:AxBx.. or tree:AxBx..")
        ->capture_default_str();
    bench->add_option("--instances", instances, "Number of sampled instances")->capture_default_str();
    bench->add_option("--threads", threads, "Worker threads (0 = all cores)")->capture_default_str();
    bench->add_option("--dt", bench_dt, "Step size")->capture_default_str();
    bench->add_option("--policies", policies, "Subset of OPT,BP,MAX,QP,TREE")->delimiter(',');

    // conjecture
    auto* conj = app.add_subcommand("conjecture", "Random sweep comparing predicted and realized min-delay");
    std::size_t samples = 10000;
    std::vector<std::string> shapes{"2x2", "2x2x2"};
    conj->add_option("--samples", samples, "Rate vectors per shape")->capture_default_str();
    conj->add_option("--shapes", shapes, "Full-connection shapes")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            Instance inst = load_instance(instance_path);
            if (!q0.empty()) cfg.q0 = q0;
            PolicySpec spec = policy_from_flag(policy, inst, cfg);
            Trajectory tr = run(inst, spec, cfg);
            DelayReport rep;
            if (metrics == "analytic") {
                if (spec.kind != PolicySpec::Kind::static_rates)
                    throw std::invalid_argument("analytic metrics need a static policy");
                rep = metrics_analytic(inst, spec.rates, cfg);
            } else {
                rep = metrics_empirical(inst, make_rate_function(inst, spec), cfg).report;
            }
            if (g.format == "json") {
                emit(g, "delay.json", report_json(rep).dump(2) + "\n");
            } else {
                std::ostringstream os;
                write_delay_csv_header(os, inst.net.num_ingress());
                write_delay_csv_row(os, fs::path(instance_path).stem().string(), policy, rep);
                emit(g, "delay.csv", os.str());
            }
            if (!g.out.empty()) {
                std::ostringstream os;
                write_trajectory_csv(os, inst.net, tr);
                emit(g, "trajectory.csv", os.str());
            }
        } else if (*chk) {
            Instance inst = load_instance(instance_path);
            RateAssignment r = load_rates(inst.net, rates_path);
            if (use_effective) r = effective_rates(inst.net, inst.arrivals, r);
            std::string which = checker;
            if (which == "auto") which = inst.net.is_n_by_1() ? "nx1" : "multistage";
            RegionCheck rc;
            if (which == "nx1") rc = min_delay_region_check_Nx1(inst, r);
            else if (which == "single-hop") rc = min_delay_check_single_hop(inst, r);
            else if (which == "tree") rc = tree_rates_check(inst, r);
            else rc = min_delay_check_multistage(inst, r, gamma_list.empty() ? std::nullopt
                                                                             : std::optional<GammaVector>(gamma_list));
            if (g.format == "json") emit(g, "check.json", check_json(rc).dump(2) + "\n");
            else emit(g, "check.txt", check_text(rc));
            return rc.in ? 0 : 1;
        } else if (*opt) {
            Instance inst = load_instance(instance_path);
            ObjectiveSpec spec;
            spec.kind = parse_objective(objective);
            if (!constraints_path.empty()) spec.routing = constraints_from_file(constraints_path, inst.net);
            GammaVector gamma = gamma_from_flag(gamma_flag, inst);
            CoOptimizeResult res = co_optimize(inst, gamma, spec);
            if (!res.feasible) {
                std::cerr << "infeasible; conflicting constraints:\n";
                for (const std::string& row : res.conflicting) std::cerr << "  " << row << "\n";
                return 2;
            }
            std::cerr << to_string(spec.kind) << " = " << std::setprecision(12) << res.objective
                      << (res.check.in ? "" : " (checker: " + res.check.violated + ")") << "\n";
            emit(g, "rates.json", dump_rates(inst.net, res.rates));
        } else if (*ovl) {
            Instance inst = load_instance(instance_path);
            OverloadVerdict v = overload_check(inst);
            ojson j;
            j["overloaded"] = v.overloaded;
            if (v.witness) j["witness"] = ojson::parse(dump_rates(inst.net, *v.witness));
            if (!v.certificate.empty()) j["certificate"] = v.certificate;
            emit(g, "overload.json", j.dump(2) + "\n");
        } else if (*bench) {
            ExperimentConfig ec = preset(preset_name);
            ec.num_instances = instances;
            ec.threads = threads;
            ec.seed = g.seed;
            ec.dt = bench_dt;
            if (!policies.empty()) ec.policies = policies;
            ExperimentResult res = run_experiment(ec);
            if (!g.out.empty()) write_experiment(res, g.out);
            std::ostringstream os;
            if (g.format == "json") {
                ojson arr = ojson::array();
                for (const PolicySummary& s : summarize(res.rows))
                    arr.push_back({{"policy", s.policy},
                                   {"count", s.count},
                                   {"mean_d_avg", s.mean_d_avg},
                                   {"mean_d_max", s.mean_d_max},
                                   {"mean_ratio_avg", s.mean_ratio_avg},
                                   {"mean_ratio_max", s.mean_ratio_max},
                                   {"mean_fairness", s.mean_fairness}});
                os << arr.dump(2) << "\n";
            } else {
                write_summary_csv(os, summarize(res.rows));
            }
            std::cout << os.str();
            for (const std::string& f : res.failures) std::cerr << "failed: " << f << "\n";
        } else if (*conj) {
            ConjectureSweepConfig cc;
            cc.samples = samples;
            cc.seed = g.seed;
            cc.shapes.clear();
            for (const std::string& s : shapes) {
                std::vector<std::size_t> sh;
                std::stringstream ss(s);
                std::string part;
                while (std::getline(ss, part, 'x')) sh.push_back(std::stoul(part));
                cc.shapes.push_back(sh);
            }
            ConjectureSweepResult res = conjecture_sweep(cc);
            std::cout << "samples=" << res.total << " agreed=" << res.agreed << " predicted_min=" << res.predicted_min
                      << " empirical_min=" << res.empirical_min << "\n";
            if (!res.counterexamples.empty()) {
                std::cerr << "COUNTEREXAMPLES FOUND: " << res.counterexamples.size() << "\n";
                std::string dir = g.out.empty() ? "conjecture_counterexamples" : g.out;
                fs::create_directories(dir);
                for (std::size_t k = 0; k < res.counterexamples.size(); ++k) {
                    std::ofstream f(fs::path(dir) / ("counterexample_" + std::to_string(k) + ".json"));
                    f << counterexample_json(res.counterexamples[k]);
                }
                std::cerr << "written to " << dir << "\n";
                return 1;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
