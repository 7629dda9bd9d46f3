#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/phy.hpp"
#include "mmlat/rng.hpp"

namespace mmlat::queue {

/// A stationary transmission control: one target error rate plus a rate map
/// from queue length to transmitted-packet count. rate_map[q] <= q always
/// (packets come from the buffer).
struct Policy {
    double eps = 0.0;            // target error rate in [0, 1)
    std::vector<int> rate_map;   // indexed by queue length 0..B

    int rate(int q) const { return rate_map.at(static_cast<std::size_t>(q)); }

    void validate(const SystemConfig& cfg) const {
        if (!(eps >= 0.0) || eps >= 1.0) throw ConfigError("policy eps must be in [0, 1)");
        if (static_cast<int>(rate_map.size()) != cfg.buffer_size + 1)
            throw ConfigError("policy rate_map must cover q = 0..B");
        for (int q = 0; q <= cfg.buffer_size; ++q) {
            if (rate_map[q] < 0 || rate_map[q] > q)
                throw ConfigError("policy rate_map must satisfy 0 <= r(q) <= q");
        }
    }
};

/// Build a policy from a callable q -> r, clamped into [0, q].
template <typename Fn>
Policy make_policy(double eps, const SystemConfig& cfg, Fn&& fn) {
    Policy p;
    p.eps = eps;
    p.rate_map.resize(static_cast<std::size_t>(cfg.buffer_size) + 1);
    for (int q = 0; q <= cfg.buffer_size; ++q)
        p.rate_map[q] = std::clamp(static_cast<int>(fn(q)), 0, q);
    return p;
}

/// The rule-of-double rate map r(q) = min(q, 2 lambda).
inline Policy rule_of_double(double eps, const SystemConfig& cfg) {
    return make_policy(eps, cfg, [&](int q) { return std::min(q, 2 * cfg.arrival_rate); });
}

struct StepResult {
    int next_queue = 0;
    int dropped = 0;
};

/// One frame of buffer dynamics:
///   q' = min(max(q + lambda - 1{success} r, lambda), B)
/// with overflow drops max(q + lambda - 1{success} r - B, lambda - B),
/// clamped at zero (B >= lambda by config validation).
inline StepResult step(int q, int r, bool success, const SystemConfig& cfg) {
    if (r < 0 || r > q || q > cfg.buffer_size)
        throw ConfigError("step requires 0 <= r <= q <= B");
    const int lambda = cfg.arrival_rate;
    const int served = success ? r : 0;
    const int inflow = q + lambda - served;
    StepResult out;
    out.next_queue = std::min(std::max(inflow, lambda), cfg.buffer_size);
    out.dropped = std::max(std::max(inflow - cfg.buffer_size, lambda - cfg.buffer_size), 0);
    return out;
}

/// Target error rate used for power lookup: quantiles are not resolvable
/// below 1/n, and eps = 0 ("never fail") maps to the smallest resolvable
/// target. For any eps >= 1/n this is the identity.
inline double power_eps(double eps, const GainDistribution& dist) {
    return std::max(eps, 1.0 / static_cast<double>(dist.size()));
}

/// Per-frame transmission power under a policy; infeasible rates surface as
/// an InfeasibleError naming the offending state.
inline double frame_power(int q, int r, double eps, const SystemConfig& cfg,
                          const GainDistribution& dist) {
    const auto p = phy::required_power(r, power_eps(eps, dist), cfg, dist);
    if (!p) {
        std::ostringstream msg;
        msg << "infeasible power at q=" << q << " r=" << r << " eps=" << eps;
        throw InfeasibleError(msg.str());
    }
    return *p;
}

struct SimReport {
    double avg_queue = 0.0;      // packets
    double drop_rate = 0.0;      // packets per frame
    double avg_power = 0.0;      // linear units
    double latency_frames = 0.0;
    double latency_seconds = 0.0;
    std::int64_t horizon = 0;    // averaged frames (after warm-up)
    std::int64_t warmup = 0;     // discarded frames
    int min_queue = 0;
    int max_queue = 0;
    std::map<int, std::int64_t> rate_histogram; // rate -> frames transmitted at it
};

/// Frame-by-frame simulation of a policy: i.i.d. Bernoulli(1 - eps) decoding
/// successes, exact buffer dynamics, power accrued through the phy map.
/// Averages cover `horizon` frames after discarding `warmup` frames of
/// transient (the queue starts empty). Deterministic given (seed).
inline SimReport simulate(const Policy& policy, const SystemConfig& cfg,
                          const GainDistribution& dist, std::int64_t horizon,
                          std::uint64_t seed, std::int64_t warmup = 1000) {
    cfg.validate();
    policy.validate(cfg);
    if (horizon < 10000) throw ConfigError("simulate horizon must be >= 1e4 frames");
    if (warmup < 0) throw ConfigError("warmup must be >= 0");

    // Power depends only on the rate; precompute per rate value.
    std::vector<double> power_of_rate(static_cast<std::size_t>(cfg.buffer_size) + 1, -1.0);

    CounterRng rng(seed, derive_stream("simulate"));
    const double success_prob = 1.0 - policy.eps;

    SimReport report;
    report.horizon = horizon;
    report.warmup = warmup;
    report.min_queue = cfg.buffer_size;
    report.max_queue = 0;

    int q = 0;
    double queue_sum = 0.0;
    double power_sum = 0.0;
    std::int64_t dropped_sum = 0;
    for (std::int64_t t = 0; t < warmup + horizon; ++t) {
        const int r = policy.rate(q);
        double& pr = power_of_rate[static_cast<std::size_t>(r)];
        if (pr < 0.0) pr = frame_power(q, r, policy.eps, cfg, dist);
        const bool success = rng.bernoulli(success_prob);
        const StepResult s = step(q, r, success, cfg);
        if (t >= warmup) {
            queue_sum += q;
            power_sum += pr;
            dropped_sum += s.dropped;
            report.min_queue = std::min(report.min_queue, q);
            report.max_queue = std::max(report.max_queue, q);
            ++report.rate_histogram[r];
        }
        q = s.next_queue;
    }

    const double lambda = cfg.arrival_rate;
    const double frames = static_cast<double>(horizon);
    report.avg_queue = queue_sum / frames;
    report.drop_rate = static_cast<double>(dropped_sum) / frames;
    report.avg_power = power_sum / frames;
    // Little's-law accounting, exact by construction.
    report.latency_frames =
        report.avg_queue / lambda + report.drop_rate / lambda * cfg.drop_penalty_frames();
    report.latency_seconds = report.latency_frames * cfg.frame_duration_s;
    return report;
}

struct SteadyState {
    double latency_frames = 0.0;
    double avg_power = 0.0;
    double avg_queue = 0.0;
    double drop_rate = 0.0;      // expected packets dropped per frame
    double throughput = 0.0;     // expected packets served per frame
    std::vector<double> pi;      // stationary probability indexed by q = 0..B

    double pi_at(int q) const { return pi.at(static_cast<std::size_t>(q)); }
};

namespace detail {

/// Closed communicating classes of the policy-induced chain on {lambda..B}
/// (the queue never returns below lambda after the first frame). Edges with
/// probability zero are ignored.
inline std::vector<std::vector<int>> recurrent_classes(const Policy& policy,
                                                       const SystemConfig& cfg) {
    const int lo = cfg.arrival_rate;
    const int hi = cfg.buffer_size;
    const int n = hi - lo + 1;
    std::vector<std::vector<int>> adj(n);
    for (int q = lo; q <= hi; ++q) {
        const int r = policy.rate(q);
        if (policy.eps < 1.0) adj[q - lo].push_back(step(q, r, true, cfg).next_queue - lo);
        if (policy.eps > 0.0) adj[q - lo].push_back(step(q, r, false, cfg).next_queue - lo);
    }
    // reach[i] = bitset of states reachable from i (n <= a few hundred).
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
        std::vector<int> stack{i};
        reach[i][i] = true;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            for (int w : adj[v]) {
                if (!reach[i][w]) {
                    reach[i][w] = true;
                    stack.push_back(w);
                }
            }
        }
    }
    std::vector<bool> assigned(n, false);
    std::vector<std::vector<int>> classes;
    for (int i = 0; i < n; ++i) {
        if (assigned[i]) continue;
        // i is recurrent iff every state reachable from i can reach i back.
        bool recurrent = true;
        for (int j = 0; j < n && recurrent; ++j)
            if (reach[i][j] && !reach[j][i]) recurrent = false;
        if (!recurrent) continue;
        std::vector<int> cls;
        for (int j = 0; j < n; ++j) {
            if (reach[i][j] && reach[j][i]) {
                cls.push_back(j + lo);
                assigned[j] = true;
            }
        }
        classes.push_back(std::move(cls));
    }
    return classes;
}

} // namespace detail

/// Exact policy evaluation: solve pi^T P = pi^T on the recurrent class of the
/// induced finite chain and return the exact long-run latency and power.
/// The expected per-frame cost takes the expectation of the overflow term
/// over the success indicator. Throws NonUnichainError if the policy creates
/// more than one recurrent class.
inline SteadyState steady_state_eval(const Policy& policy, const SystemConfig& cfg,
                                     const GainDistribution& dist) {
    cfg.validate();
    policy.validate(cfg);

    const auto classes = detail::recurrent_classes(policy, cfg);
    if (classes.size() != 1) {
        std::ostringstream msg;
        msg << "policy induces " << classes.size() << " recurrent classes";
        throw NonUnichainError(msg.str());
    }
    const std::vector<int>& states = classes.front();
    const int n = static_cast<int>(states.size());
    std::vector<int> index(static_cast<std::size_t>(cfg.buffer_size) + 1, -1);
    for (int i = 0; i < n; ++i) index[states[i]] = i;

    const double eps = policy.eps;
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n); // P^T - I, last row -> normalization
    for (int i = 0; i < n; ++i) {
        const int q = states[i];
        const int r = policy.rate(q);
        // Positive-probability successors stay inside the closed class.
        const int qs = step(q, r, true, cfg).next_queue;
        a(index[qs], i) += 1.0 - eps;
        if (eps > 0.0) {
            const int qf = step(q, r, false, cfg).next_queue;
            a(index[qf], i) += eps;
        }
        a(i, i) -= 1.0;
    }
    for (int i = 0; i < n; ++i) a(n - 1, i) = 1.0;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    const Eigen::VectorXd pi_class = a.fullPivLu().solve(rhs);
    if (!pi_class.allFinite()) throw SingularMatrixError("stationary solve failed");

    SteadyState out;
    out.pi.assign(static_cast<std::size_t>(cfg.buffer_size) + 1, 0.0);
    const double lambda = cfg.arrival_rate;
    for (int i = 0; i < n; ++i) {
        const int q = states[i];
        const double w = std::max(pi_class(i), 0.0);
        out.pi[static_cast<std::size_t>(q)] = w;
        const int r = policy.rate(q);
        const double drop_succ = step(q, r, true, cfg).dropped;
        const double drop_fail = step(q, r, false, cfg).dropped;
        const double expected_drop = (1.0 - eps) * drop_succ + eps * drop_fail;
        out.avg_queue += w * q;
        out.drop_rate += w * expected_drop;
        out.throughput += w * (1.0 - eps) * r;
        out.avg_power += w * frame_power(q, r, eps, cfg, dist);
    }
    out.latency_frames =
        out.avg_queue / lambda + out.drop_rate / lambda * cfg.drop_penalty_frames();
    return out;
}

} // namespace mmlat::queue
