#include "ovd/delay.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>

namespace ovd {

// ---- PiecewiseLinear ----

PiecewiseLinear::PiecewiseLinear(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.empty()) throw std::invalid_argument("piecewise-linear: bad breakpoints");
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (!xs_.empty() && xs[k] <= xs_.back()) {
            if (xs[k] == xs_.back() && ys[k] == ys_.back()) continue;
            throw std::invalid_argument("piecewise-linear: breakpoints must increase");
        }
        xs_.push_back(xs[k]);
        ys_.push_back(ys[k]);
    }
}

PiecewiseLinear PiecewiseLinear::identity() { return PiecewiseLinear({0.0, 1.0}, {0.0, 1.0}); }

double PiecewiseLinear::operator()(double x) const {
    if (xs_.size() == 1) return ys_[0];
    std::size_t k;
    if (x <= xs_.front()) {
        k = 0;
    } else if (x >= xs_.back()) {
        k = xs_.size() - 2;
    } else {
        k = static_cast<std::size_t>(std::upper_bound(xs_.begin(), xs_.end(), x) - xs_.begin()) - 1;
    }
    double slope = (ys_[k + 1] - ys_[k]) / (xs_[k + 1] - xs_[k]);
    return ys_[k] + slope * (x - xs_[k]);
}

double PiecewiseLinear::integrate(double a, double b) const {
    if (b < a) return -integrate(b, a);
    std::vector<double> pts{a};
    for (double x : xs_)
        if (x > a && x < b) pts.push_back(x);
    pts.push_back(b);
    double s = 0;
    for (std::size_t k = 0; k + 1 < pts.size(); ++k)
        s += 0.5 * ((*this)(pts[k]) + (*this)(pts[k + 1])) * (pts[k + 1] - pts[k]);
    return s;
}

PiecewiseLinear PiecewiseLinear::compose(const PiecewiseLinear& outer, const PiecewiseLinear& inner, double a,
                                         double b) {
    std::vector<double> base{a};
    for (double x : inner.xs_)
        if (x > a && x < b) base.push_back(x);
    base.push_back(b);
    std::vector<double> pts = base;
    for (std::size_t k = 0; k + 1 < base.size(); ++k) {
        double u = base[k], v = base[k + 1];
        double fu = inner(u), fv = inner(v);
        if (fu == fv) continue;
        for (double y : outer.xs_) {
            if ((y > fu && y < fv) || (y < fu && y > fv)) pts.push_back(u + (y - fu) * (v - u) / (fv - fu));
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<double> ys;
    ys.reserve(pts.size());
    for (double x : pts) ys.push_back(outer(inner(x)));
    return PiecewiseLinear(std::move(pts), std::move(ys));
}

PiecewiseLinear operator+(const PiecewiseLinear& f, const PiecewiseLinear& h) {
    std::vector<double> xs = f.xs_;
    xs.insert(xs.end(), h.xs_.begin(), h.xs_.end());
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    if (xs.size() == 1) xs.push_back(xs[0] + 1);
    std::vector<double> ys;
    for (double x : xs) ys.push_back(f(x) + h(x));
    return PiecewiseLinear(std::move(xs), std::move(ys));
}

PiecewiseLinear operator*(double k, const PiecewiseLinear& f) {
    std::vector<double> ys = f.ys_;
    for (double& y : ys) y *= k;
    return PiecewiseLinear(f.xs_, std::move(ys));
}

// ---- static queue solution ----

namespace {

std::vector<double> drain_rates(const Instance& inst, const RateAssignment& rates) {
    const LayeredNetwork& net = inst.net;
    std::vector<double> s(net.num_nodes());
    for (std::size_t n = 0; n < net.num_nodes(); ++n) {
        NodeRef r = net.node_ref(n);
        s[n] = r.layer + 1 == net.num_layers() ? inst.service.mu[r.index] : egress_sum(net, rates, n);
    }
    return s;
}

}  // namespace

StaticQueueSolution solve_static_queues(const Instance& inst, const RateAssignment& rates,
                                        const std::vector<double>& q0, double t0) {
    const LayeredNetwork& net = inst.net;
    check_rates(net, rates);
    const std::size_t N = net.num_nodes();
    if (q0.size() != N) throw std::invalid_argument("q0 size does not match node count");
    StaticQueueSolution sol;
    sol.drain_rate = drain_rates(inst, rates);
    const std::vector<double>& S = sol.drain_rate;

    double scale = 1.0;
    for (double v : q0) scale = std::max(scale, v);
    const double tol = 1e-12 * scale;

    std::vector<double> q = q0;
    std::vector<std::vector<double>> px(N), py(N);
    std::vector<double> emptied(N, t0);
    double t = t0;
    for (std::size_t n = 0; n < N; ++n) {
        px[n].push_back(t);
        py[n].push_back(q[n]);
    }
    std::vector<double> in(N), slope(N);
    for (std::size_t iter = 0; iter <= N + 1; ++iter) {
        std::fill(in.begin(), in.end(), 0.0);
        for (std::size_t i = 0; i < net.num_ingress(); ++i) in[net.node_id(0, i)] = inst.arrivals.lambda[i];
        for (std::size_t n = 0; n < N; ++n) {
            bool queued = q[n] > tol || in[n] >= S[n];
            double out = queued ? S[n] : in[n];
            slope[n] = in[n] - out;
            if (S[n] > 0)
                for (std::size_t e : net.out_links(n)) in[net.dst_node(e)] += out * rates[e] / S[n];
        }
        double step = kInfiniteDelay;
        std::size_t who = N;
        for (std::size_t n = 0; n < N; ++n) {
            if (q[n] > tol && slope[n] < 0) {
                double h = q[n] / -slope[n];
                if (h < step) {
                    step = h;
                    who = n;
                }
            }
        }
        if (who == N) {
            for (std::size_t n = 0; n < N; ++n) {
                px[n].push_back(t + 1);
                py[n].push_back(std::max(0.0, q[n]) + slope[n]);
                if (q[n] > tol || slope[n] > 0) emptied[n] = kInfiniteDelay;
            }
            break;
        }
        t += step;
        for (std::size_t n = 0; n < N; ++n) {
            q[n] += slope[n] * step;
            if (n == who || q[n] <= tol) {
                if (q[n] <= tol && py[n].back() > 0) emptied[n] = t;
                q[n] = 0;
            }
            px[n].push_back(t);
            py[n].push_back(q[n]);
        }
    }
    sol.q.reserve(N);
    for (std::size_t n = 0; n < N; ++n) sol.q.emplace_back(std::move(px[n]), std::move(py[n]));
    sol.empty_time = std::move(emptied);
    return sol;
}

double packet_delay(const StaticQueueSolution& sol, const std::vector<std::size_t>& path, double t) {
    double tau = t;
    for (std::size_t n : path) {
        double qn = std::max(0.0, sol.q[n](tau));
        if (qn <= 0) continue;
        if (sol.drain_rate[n] <= 0) return kInfiniteDelay;
        tau += qn / sol.drain_rate[n];
    }
    return tau - t;
}

double packet_delay(const Instance& inst, const RateAssignment& rates, const Trajectory& traj,
                    const std::vector<std::size_t>& path, double t) {
    std::vector<double> drain = drain_rates(inst, rates);
    double tau = t;
    for (std::size_t n : path) {
        double qn = std::max(0.0, traj.queue_at(n, tau));
        if (qn <= 0) continue;
        if (drain[n] <= 0) return kInfiniteDelay;
        tau += qn / drain[n];
    }
    return tau - t;
}

// ---- path weights ----

PathWeightTable path_weights(const LayeredNetwork& net, const ArrivalProfile& arr, const RateAssignment& rates) {
    RateAssignment eff = effective_rates(net, arr, rates);
    PathWeightTable table;
    table.per_ingress.resize(net.num_ingress());
    std::vector<std::size_t> stack;
    auto walk = [&](auto&& self, std::size_t node, double w, std::vector<WeightedPath>& out) -> void {
        stack.push_back(node);
        const auto& links = net.out_links(node);
        if (links.empty()) {
            out.push_back({stack, w});
        } else {
            double total = egress_sum(net, eff, node);
            for (std::size_t e : links) {
                if (eff[e] <= 0) continue;
                self(self, net.dst_node(e), w * eff[e] / total, out);
            }
        }
        stack.pop_back();
    };
    for (std::size_t i = 0; i < net.num_ingress(); ++i) walk(walk, net.node_id(0, i), 1.0, table.per_ingress[i]);
    return table;
}

// ---- analytic metrics ----

void finish_report(DelayReport& rep, const ArrivalProfile& arr) {
    double num = 0, den = 0, mx = 0;
    for (std::size_t i = 0; i < rep.d_bar.size(); ++i) {
        num += arr.lambda[i] * rep.d_bar[i];
        den += arr.lambda[i];
        mx = std::max(mx, rep.d_bar[i]);
    }
    rep.d_avg = den > 0 ? num / den : 0;
    rep.d_max = mx;
}

double min_delay_value(const ArrivalProfile& arr, const ServiceProfile& svc, double horizon) {
    return horizon / 2 * std::max(arr.total() / svc.total() - 1, 0.0);
}

namespace {

bool all_zero(const std::optional<std::vector<double>>& q0) {
    return !q0 || std::all_of(q0->begin(), q0->end(), [](double v) { return v == 0; });
}

// With empty initial queues every backlogged node grows linearly from t0, so
// a packet's delay is (t - t0) * (product over its hops of in/out - 1).
DelayReport zero_start_metrics(const Instance& inst, const RateAssignment& rates, double T) {
    const LayeredNetwork& net = inst.net;
    const std::size_t N = net.num_nodes();
    std::vector<double> S = drain_rates(inst, rates);
    std::vector<double> in(N, 0.0), r(N, 1.0), R(N, 1.0);
    for (std::size_t i = 0; i < net.num_ingress(); ++i) in[net.node_id(0, i)] = inst.arrivals.lambda[i];
    for (std::size_t n = 0; n < N; ++n) {
        double out = std::min(in[n], S[n]);
        if (in[n] > S[n]) r[n] = S[n] > 0 ? in[n] / S[n] : kInfiniteDelay;
        if (S[n] > 0)
            for (std::size_t e : net.out_links(n)) in[net.dst_node(e)] += out * rates[e] / S[n];
    }
    for (std::size_t n = N; n-- > 0;) {
        const auto& links = net.out_links(n);
        if (links.empty() || S[n] <= 0) {
            R[n] = r[n];
            continue;
        }
        double acc = 0;
        for (std::size_t e : links) {
            if (rates[e] <= 0) continue;
            acc += rates[e] / S[n] * R[net.dst_node(e)];
        }
        R[n] = r[n] * acc;
    }
    DelayReport rep;
    rep.mode = DelayMode::analytic;
    for (std::size_t i = 0; i < net.num_ingress(); ++i) {
        double Ri = R[net.node_id(0, i)];
        rep.d_bar.push_back(std::isinf(Ri) ? kInfiniteDelay : T / 2 * (Ri - 1));
    }
    finish_report(rep, inst.arrivals);
    return rep;
}

}  // namespace

DelayReport metrics_analytic(const Instance& inst, const RateAssignment& rates, const SimConfig& cfg) {
    require_valid(inst);
    check_rates(inst.net, rates);
    const double T = cfg.horizon;
    if (!(T > 0)) throw std::invalid_argument("horizon must be positive");
    if (all_zero(cfg.q0)) return zero_start_metrics(inst, rates, T);
    if (!inst.net.is_n_by_1())
        throw std::invalid_argument("analytic delay with nonzero initial queues is only available on N x 1 networks");

    const LayeredNetwork& net = inst.net;
    const double t0 = cfg.t0;
    if (cfg.q0->size() != net.num_nodes()) throw std::invalid_argument("q0 size does not match node count");
    StaticQueueSolution sol = solve_static_queues(inst, rates, *cfg.q0, t0);
    const std::size_t d = net.node_id(1, 0);
    PiecewiseLinear at_egress = PiecewiseLinear::identity() + (1.0 / inst.service.mu[0]) * sol.q[d];
    DelayReport rep;
    rep.mode = DelayMode::analytic;
    for (std::size_t i = 0; i < net.num_ingress(); ++i) {
        double g = sol.drain_rate[i];
        if (g <= 0) {
            rep.d_bar.push_back(kInfiniteDelay);
            continue;
        }
        PiecewiseLinear at_src = PiecewiseLinear::identity() + (1.0 / g) * sol.q[i];
        PiecewiseLinear exit = PiecewiseLinear::compose(at_egress, at_src, t0, t0 + T);
        double integral = exit.integrate(t0, t0 + T) - (T * t0 + T * T / 2);
        rep.d_bar.push_back(integral / T);
    }
    finish_report(rep, inst.arrivals);
    return rep;
}

// ---- empirical (tagged) metrics ----

double EmpiricalRun::window_average(double t0, double dt, double a, double b) const {
    double m = 0, s = 0;
    for (std::size_t k = 0; k < born_mass.size(); ++k) {
        double t = t0 + static_cast<double>(k) * dt;
        if (t >= a && t < b) {
            m += born_mass[k];
            s += born_delay[k];
        }
    }
    if (m <= 0) throw std::invalid_argument("window contains no arrivals");
    return s / m;
}

namespace {

struct Batch {
    long ingress;  // -1 for untagged traffic
    long birth;
    double amount;
};

void append_sorted(std::deque<Batch>& queue, std::vector<Batch>& incoming) {
    std::stable_sort(incoming.begin(), incoming.end(), [](const Batch& a, const Batch& b) {
        return a.birth != b.birth ? a.birth < b.birth : a.ingress < b.ingress;
    });
    for (const Batch& x : incoming) {
        if (x.amount <= 0) continue;
        if (!queue.empty() && queue.back().ingress == x.ingress && queue.back().birth == x.birth)
            queue.back().amount += x.amount;
        else
            queue.push_back(x);
    }
    incoming.clear();
}

}  // namespace

EmpiricalRun metrics_empirical(const Instance& inst, const RateFunction& policy, const SimConfig& cfg,
                               double max_extension_factor) {
    require_valid(inst);
    const LayeredNetwork& net = inst.net;
    const std::size_t N = net.num_nodes();
    const std::size_t L = net.num_layers();
    const std::size_t steps = cfg.num_steps();
    const auto max_steps = steps + static_cast<std::size_t>(std::ceil(max_extension_factor * cfg.horizon / cfg.dt));

    FluidEngine eng(inst, cfg.dt, cfg.discretize);
    QueueState state = initial_state(inst, cfg);
    std::vector<std::deque<Batch>> fifo(N);
    std::vector<std::vector<Batch>> incoming(N);
    for (std::size_t n = 0; n < N; ++n)
        if (state.q[n] > 0) fifo[n].push_back({-1, -1, state.q[n]});

    EmpiricalRun run;
    run.steps = steps;
    run.born_mass.assign(steps, 0.0);
    run.born_delay.assign(steps, 0.0);
    std::vector<double> mass(net.num_ingress(), 0.0), delay(net.num_ingress(), 0.0);
    double tagged_in = 0, tagged_out = 0;

    std::size_t k = 0;
    for (;; ++k) {
        if (k >= steps && tagged_in - tagged_out <= 1e-9 * std::max(1.0, tagged_in)) break;
        if (k >= max_steps)
            throw std::runtime_error("tagged packets did not drain within " +
                                     std::to_string(max_extension_factor) + " x T past the horizon");
        RateAssignment g = policy(state);
        check_rates(net, g);
        StepFlows f = eng.advance(state, g);
        const bool tagging = k < steps;
        for (std::size_t i = 0; i < net.num_ingress(); ++i) {
            double a = f.arrivals[i];
            if (a <= 0) continue;
            incoming[net.node_id(0, i)].push_back({tagging ? static_cast<long>(i) : -1, static_cast<long>(k), a});
            if (tagging) {
                tagged_in += a;
                run.born_mass[k] += a;
            }
        }
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t idx = 0; idx < net.layer_size(l); ++idx) {
                std::size_t n = net.node_id(l, idx);
                auto& queue = fifo[n];
                append_sorted(queue, incoming[n]);
                const bool egress = l + 1 == L;
                double remove = 0;
                if (egress) {
                    remove = f.served[idx];
                } else {
                    for (std::size_t e : net.out_links(n)) remove += f.transfer[e];
                }
                if (remove <= 0) continue;
                const double total_remove = remove;
                const double slack = 1e-9 * std::max(1.0, total_remove);
                while (remove > slack) {
                    if (queue.empty())
                        throw std::logic_error("FIFO bookkeeping lost mass at node " + node_key(net, n));
                    Batch& head = queue.front();
                    double take = std::min(head.amount, remove);
                    if (head.amount - take <= slack) take = head.amount;
                    if (egress) {
                        if (head.ingress >= 0) {
                            double sojourn = static_cast<double>(static_cast<long>(k) - head.birth) * cfg.dt;
                            auto i = static_cast<std::size_t>(head.ingress);
                            mass[i] += take;
                            delay[i] += take * sojourn;
                            run.born_delay[static_cast<std::size_t>(head.birth)] += take * sojourn;
                            tagged_out += take;
                        }
                    } else {
                        for (std::size_t e : net.out_links(n)) {
                            if (f.transfer[e] <= 0) continue;
                            incoming[net.dst_node(e)].push_back(
                                {head.ingress, head.birth, take * f.transfer[e] / total_remove});
                        }
                    }
                    head.amount -= take;
                    remove -= take;
                    if (head.amount <= slack) queue.pop_front();
                }
            }
        }
        state = std::move(f.next);
        state.t = cfg.t0 + static_cast<double>(k + 1) * cfg.dt;
    }
    run.extension = k > steps ? static_cast<double>(k - steps) * cfg.dt : 0.0;
    run.report.mode = DelayMode::empirical;
    for (std::size_t i = 0; i < net.num_ingress(); ++i) run.report.d_bar.push_back(mass[i] > 0 ? delay[i] / mass[i] : 0.0);
    finish_report(run.report, inst.arrivals);
    return run;
}

// ---- CSV ----

void write_delay_csv_header(std::ostream& os, std::size_t num_ingress) {
    os << "instance_id,policy,d_avg,d_max";
    for (std::size_t i = 0; i < num_ingress; ++i) os << ",d_bar_" << (i + 1);
    os << '\n';
}

void write_delay_csv_row(std::ostream& os, const std::string& instance_id, const std::string& policy,
                         const DelayReport& rep) {
    auto old = os.precision(10);
    os << instance_id << ',' << policy << ',' << rep.d_avg << ',' << rep.d_max;
    for (double d : rep.d_bar) os << ',' << d;
    os << '\n';
    os.precision(old);
}

}  // namespace ovd
