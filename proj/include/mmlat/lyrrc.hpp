#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/phy.hpp"
#include "mmlat/queue.hpp"

namespace mmlat::lyrrc {

/// Utilization factor rho = lambda L / (N log M): offered load over the
/// large-array link capacity. The closed-form results below need rho < 1;
/// rho >= 1 is reported by the caller, not rejected here.
inline double utilization(const SystemConfig& cfg) {
    if (cfg.antennas < 2) throw ConfigError("utilization requires antennas >= 2");
    return cfg.arrival_rate * cfg.packet_bits /
           (cfg.subcarriers * std::log(static_cast<double>(cfg.antennas)));
}

struct EpsilonO {
    double value = 0.0;       // F_eta at the closed-form threshold
    double threshold = 0.0;   // effective-gain threshold
    bool resolution_limited = false; // threshold fell below every sample
};

/// Smallest target error rate that sustains long-term throughput lambda under
/// the power budget. Single-user threshold
///   M^-(1-rho) (1/(gamma P) + 1/(gamma p_tau tau));
/// multiuser threshold
///   M^-(1-rho) (1 + K/tau + p_I) / (gamma P).
/// When the threshold falls below every sample the true value is smaller than
/// 1/n and is reported as 0 with the resolution flag set.
inline EpsilonO epsilon_o(const SystemConfig& cfg, const GainDistribution& dist) {
    cfg.validate();
    const double rho = utilization(cfg);
    if (rho >= 1.0) throw DomainError("epsilon_o requires utilization < 1");
    const double gamma = cfg.large_scale_gain;
    const double array_factor =
        std::pow(static_cast<double>(cfg.antennas), -(1.0 - rho));
    EpsilonO out;
    if (cfg.mode == LinkMode::multiuser) {
        out.threshold =
            array_factor * phy::interference_penalty(cfg) / (gamma * cfg.power_budget);
    } else {
        out.threshold = array_factor * (1.0 / (gamma * cfg.power_budget) +
                                        1.0 / (gamma * cfg.pilot_power * cfg.pilots));
    }
    out.value = dist.cdf(out.threshold);
    out.resolution_limited = out.value == 0.0;
    return out;
}

/// Overall latency of the rule-of-double rate adaptation at target error rate
/// eps < 1/2: 1 + eps / (1 - 2 eps) frames. At eps >= 1/2 the queueing
/// latency diverges.
inline double lyrrc_latency(double eps) {
    if (!(eps >= 0.0)) throw DomainError("eps must be >= 0");
    if (eps >= 0.5) throw DomainError("latency diverges for eps >= 0.5");
    return 1.0 + eps / (1.0 - 2.0 * eps);
}

struct GeometricDistribution {
    std::vector<double> pi;        // pi[i-1] = probability of queue level i*lambda
    double truncation_mass = 0.0;  // mass beyond i_max, not renormalized
};

/// Steady-state queue-level distribution under rule-of-double with infinite
/// buffer: pi_{i lambda} = (1 - x) x^(i-1), x = eps / (1 - eps).
inline GeometricDistribution steady_state_distribution(double eps, int i_max) {
    if (!(eps >= 0.0) || eps >= 0.5) throw DomainError("requires eps in [0, 1/2)");
    if (i_max < 1) throw DomainError("i_max must be >= 1");
    const double x = eps / (1.0 - eps);
    GeometricDistribution out;
    out.pi.resize(static_cast<std::size_t>(i_max));
    double mass = 0.0;
    double term = 1.0 - x;
    for (int i = 0; i < i_max; ++i) {
        out.pi[i] = term;
        mass += term;
        term *= x;
    }
    out.truncation_mass = 1.0 - mass;
    return out;
}

/// Latency lower bound 1 + eps_o / (1 - eps_o): retransmission latency alone,
/// at the smallest sustainable target error rate.
inline double latency_lower_bound(const SystemConfig& cfg, const GainDistribution& dist) {
    const double eps = epsilon_o(cfg, dist).value;
    return 1.0 + eps / (1.0 - eps);
}

/// The LYRRC policy: target error rate eps_o and rate map min(q, 2 lambda).
/// The stored eps is floored at the quantile resolution 1/n so that power
/// lookups stay defined when eps_o underflows the sample set.
inline queue::Policy lyrrc_policy(const SystemConfig& cfg, const GainDistribution& dist) {
    const EpsilonO eo = epsilon_o(cfg, dist);
    if (eo.value > cfg.eps_max) {
        throw InfeasibleError("LYRRC reliability-infeasible: eps_o exceeds eps_max");
    }
    return queue::rule_of_double(queue::power_eps(eo.value, dist), cfg);
}

/// Average power under LYRRC: the stationary rate is lambda with probability
/// (1-2e)/(1-e) and 2 lambda with probability e/(1-e), each paid at the phy
/// power map. Evaluated at the resolution-floored target so it matches the
/// exact-chain evaluation of lyrrc_policy identically.
inline double lyrrc_average_power(const SystemConfig& cfg, const GainDistribution& dist) {
    const EpsilonO eo = epsilon_o(cfg, dist);
    const double e = queue::power_eps(eo.value, dist);
    if (e >= 0.5) throw DomainError("average power undefined for eps_o >= 1/2");
    const int lambda = cfg.arrival_rate;
    const auto p_single = phy::required_power(lambda, e, cfg, dist);
    const auto p_double = phy::required_power(2 * lambda, e, cfg, dist);
    if (!p_single || !p_double)
        throw InfeasibleError("LYRRC rate unreachable at eps_o for any power");
    const double x = e / (1.0 - e);
    return (1.0 - x) * *p_single + x * *p_double;
}

struct GapScaling {
    double gap = 0.0;              // lyrrc latency minus the lower bound
    double eps_o = 0.0;            // asymptotic order of (D* - 1)
    double gap_closed_form = 0.0;  // eps_o^2 / ((1 - 2 eps_o)(1 - eps_o))
};

/// Optimality gap of LYRRC and its scaling order. The difference of the two
/// latency formulas collapses algebraically to eps_o^2/((1-2eps_o)(1-eps_o));
/// both routes are returned so callers can assert the identity.
inline GapScaling gap_and_scaling(const SystemConfig& cfg, const GainDistribution& dist) {
    const EpsilonO eo = epsilon_o(cfg, dist);
    const double e = eo.value;
    GapScaling out;
    out.eps_o = e;
    out.gap = lyrrc_latency(e) - (1.0 + e / (1.0 - e));
    out.gap_closed_form = e * e / ((1.0 - 2.0 * e) * (1.0 - e));
    return out;
}

struct LyrrcResult {
    double eps_o = 0.0;
    double eps_effective = 0.0;    // resolution-floored target used for power
    bool resolution_limited = false;
    bool reliability_feasible = true; // eps_o <= eps_max
    double rho = 0.0;
    double threshold = 0.0;
    double latency_frames = 0.0;   // 1 + eps_o/(1 - 2 eps_o)
    double latency_lower_bound = 0.0;
    double gap = 0.0;
    double avg_power = 0.0;
    queue::Policy policy;
};

/// Full closed-form evaluation bundle (CLI surface).
inline LyrrcResult evaluate(const SystemConfig& cfg, const GainDistribution& dist) {
    const EpsilonO eo = epsilon_o(cfg, dist);
    LyrrcResult out;
    out.eps_o = eo.value;
    out.eps_effective = queue::power_eps(eo.value, dist);
    out.resolution_limited = eo.resolution_limited;
    out.reliability_feasible = eo.value <= cfg.eps_max;
    out.rho = utilization(cfg);
    out.threshold = eo.threshold;
    out.latency_frames = lyrrc_latency(eo.value);
    out.latency_lower_bound = 1.0 + eo.value / (1.0 - eo.value);
    out.gap = gap_and_scaling(cfg, dist).gap;
    out.avg_power = lyrrc_average_power(cfg, dist);
    out.policy = queue::rule_of_double(out.eps_effective, cfg);
    return out;
}

} // namespace mmlat::lyrrc
