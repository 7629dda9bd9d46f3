#pragma once

#include <cmath>
#include <optional>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"

namespace mmlat::phy {

/// exp(r L / N): outage-threshold scale for transmitting r packets per frame.
inline double rate_scale(int rate_packets, const SystemConfig& cfg) {
    if (rate_packets < 0) throw DomainError("rate must be >= 0");
    return std::exp(rate_packets * cfg.nats_per_packet_per_subcarrier());
}

/// Worst-case multiuser penalty 1 + K/tau + p_I: inter-beam interference is
/// bounded by K/tau (pilot power at least the data power) plus inter-cell
/// interference.
inline double interference_penalty(const SystemConfig& cfg) {
    return 1.0 + static_cast<double>(cfg.users) / static_cast<double>(cfg.pilots) +
           cfg.interference_power;
}

/// Single-user power needed to hit target error rate eps at rate r:
///   p = [ M gamma F^-1(eps) / exp(rL/N) - gamma / (1 + gamma p_tau tau) ]^-1.
/// Empty result means the bracket is non-positive: the rate is unreachable at
/// that target error rate no matter how much power is spent. Infeasibility is
/// an expected outcome, not an error; the MDP treats it as infinite cost.
inline std::optional<double> required_power_su(int rate_packets, double eps,
                                               const SystemConfig& cfg,
                                               const GainDistribution& dist) {
    if (!(eps > 0.0) || eps >= 1.0) throw DomainError("eps must be in (0, 1)");
    const double gain = dist.inverse_cdf(eps);
    const double bracket =
        cfg.antennas * cfg.large_scale_gain * gain / rate_scale(rate_packets, cfg) -
        cfg.large_scale_gain * cfg.error_variance();
    if (!(bracket > 0.0)) return std::nullopt;
    return 1.0 / bracket;
}

/// Multiuser power map: p = (1 + K/tau + p_I) exp(rL/N) / (F^-1(eps) M gamma).
/// Always finite for a positive quantile.
inline double required_power_mu(int rate_packets, double eps, const SystemConfig& cfg,
                                const GainDistribution& dist) {
    if (!(eps > 0.0) || eps >= 1.0) throw DomainError("eps must be in (0, 1)");
    const double gain = dist.inverse_cdf(eps);
    return interference_penalty(cfg) * rate_scale(rate_packets, cfg) /
           (gain * cfg.antennas * cfg.large_scale_gain);
}

/// Mode dispatcher used by the queue and MDP layers.
inline std::optional<double> required_power(int rate_packets, double eps,
                                            const SystemConfig& cfg,
                                            const GainDistribution& dist) {
    if (cfg.mode == LinkMode::multiuser)
        return required_power_mu(rate_packets, eps, cfg, dist);
    return required_power_su(rate_packets, eps, cfg, dist);
}

/// Outage threshold on the effective gain for a given (rate, power).
inline double outage_threshold(int rate_packets, double power, const SystemConfig& cfg) {
    if (!(power > 0.0)) throw DomainError("power must be > 0");
    const double scale = rate_scale(rate_packets, cfg);
    if (cfg.mode == LinkMode::multiuser) {
        return interference_penalty(cfg) * scale /
               (cfg.antennas * power * cfg.large_scale_gain);
    }
    return scale / cfg.antennas *
           (cfg.error_variance() + 1.0 / (cfg.large_scale_gain * power));
}

/// Block error rate at (rate, power): the effective-gain CDF evaluated at the
/// outage threshold.
inline double block_error_rate(int rate_packets, double power, const SystemConfig& cfg,
                               const GainDistribution& dist) {
    return dist.cdf(outage_threshold(rate_packets, power, cfg));
}

} // namespace mmlat::phy
