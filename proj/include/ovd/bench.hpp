#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ovd/delay.hpp"
#include "ovd/network.hpp"
#include "ovd/policies.hpp"

namespace ovd {

enum class Family { nx1, ns_x_nd, multistage, tree };

Family parse_family(const std::string& name);
const char* to_string(Family f);

struct Range {
    double lo = 0;
    double hi = 0;
};

struct ExperimentConfig {
    Family family = Family::nx1;
    std::vector<std::size_t> shape{32, 1};  // layer sizes
    Range lambda{12, 20};
    double mu_fraction = 0.4;               // sum mu = fraction * sum lambda before rounding
    std::optional<Range> capacity;          // per-link uniform integer draw; unset = unbounded
    std::optional<Range> q0;                // integer backlog at ingress nodes; unset = empty
    std::size_t num_instances = 50;
    double horizon = 200;
    double dt = 0.1;
    bool integer = true;
    std::uint64_t seed = 1;
    std::vector<std::string> policies{"OPT", "BP", "MAX"};
    unsigned threads = 0;                   // 0 = hardware concurrency
    double max_extension_factor = 1000;

    /// Throws std::invalid_argument on empty ranges or unusable settings.
    void validate() const;
};

/// Ready-made settings of the benchmark families: "nx1-sufficient",
/// "nx1-limited", "32x16", "multistage:<AxBxC...>", "tree:<AxBxC...>".
ExperimentConfig preset(const std::string& name);

struct SampledInstance {
    std::string id;
    Instance inst;
    SimConfig sim;
};

/// One draw of the family's sampling law. Every rational quantity is
/// rounded to an integer.
SampledInstance sample_instance(const ExperimentConfig& cfg, std::mt19937_64& rng, std::size_t index);

/// Dirichlet(1, ..., 1) weights from the gaps of sorted uniforms.
std::vector<double> dirichlet_weights(std::size_t n, std::mt19937_64& rng);

/// Policy by benchmark name: OPT, BP, MAX, QP (queue-proportional), TREE.
PolicySpec policy_by_name(const std::string& name, const Instance& inst, const SimConfig& sim);

struct ResultRow {
    std::string instance_id;
    std::string policy;
    double d_avg = 0;
    double d_max = 0;
    double ratio_avg_vs_opt = 0;
    double ratio_max_vs_opt = 0;
    double fairness = 0;  // d_max / d_avg
};

struct ExperimentResult {
    std::vector<ResultRow> rows;          // ordered by instance, then policy order of the config
    std::vector<std::string> failures;    // "instance_id policy: message"
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// `instance_id,policy,d_avg,d_max,ratio_avg_vs_opt,ratio_max_vs_opt,fairness`
void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows);

struct CdfPoint {
    double value;
    double probability;
};
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);
void write_cdf_csv(std::ostream& os, const std::vector<CdfPoint>& cdf);

struct PolicySummary {
    std::string policy;
    std::size_t count = 0;
    double mean_d_avg = 0, mean_d_max = 0;
    double mean_ratio_avg = 0, max_ratio_avg = 0;
    double mean_ratio_max = 0, max_ratio_max = 0;
    double mean_fairness = 0, max_fairness = 0;
};
std::vector<PolicySummary> summarize(const std::vector<ResultRow>& rows);
void write_summary_csv(std::ostream& os, const std::vector<PolicySummary>& summary);

/// results.csv, summary.csv, failures.txt and cdf_<policy>_<metric>.csv under `dir`.
void write_experiment(const ExperimentResult& res, const std::string& dir);

struct ConjectureVerdict {
    bool predicted_min = false;  // effective rates pass the multi-stage checker
    bool empirical_min = false;  // analytic D_avg and D_max equal the closed-form minimum
    bool agree = false;
    double d_avg = 0;
    double d_max = 0;
    double minimum = 0;
    double relative_gap = 0;     // largest of |D - minimum| / minimum over D_avg, D_max
};

/// Static rates on a q0 = 0 instance over [0, T].
ConjectureVerdict conjecture_check(const Instance& inst, const RateAssignment& rates, double horizon = 100);

struct ConjectureSweepConfig {
    std::vector<std::vector<std::size_t>> shapes{{2, 2}, {2, 2, 2}};
    std::size_t samples = 10000;  // per shape
    std::uint64_t seed = 1;
    double horizon = 100;
};

struct ConjectureCounterexample {
    Instance inst;
    RateAssignment rates;
    ConjectureVerdict verdict;
};

struct ConjectureSweepResult {
    std::size_t total = 0;
    std::size_t agreed = 0;
    std::size_t predicted_min = 0;
    std::size_t empirical_min = 0;
    std::vector<ConjectureCounterexample> counterexamples;
};

/// Random instances and rate vectors, mixing uniform draws with region
/// members that are over-provisioned or perturbed.
ConjectureSweepResult conjecture_sweep(const ConjectureSweepConfig& cfg);

/// JSON document holding the instance, the rates keyed "l:i:j" and both verdicts.
std::string counterexample_json(const ConjectureCounterexample& c);

}  // namespace ovd
