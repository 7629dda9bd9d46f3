#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmlat/errors.hpp"

namespace mmlat {

/// Which link abstraction the power/outage formulas use. The single-user map
/// subtracts the channel-estimation-error term explicitly; the multiuser map
/// folds estimation error and inter-cell interference into a single
/// (1 + K/tau + p_interference) penalty. The two are never mixed.
enum class LinkMode { single_user, multiuser };

/// All scalar system parameters. Powers and gains are linear-scale; dBm/dB
/// conversion happens only at the CLI boundary.
struct SystemConfig {
    int antennas = 64;        // M, base-station antennas
    int subcarriers = 52;     // N, subcarriers spanned by one code block
    int users = 1;            // K, simultaneously served single-antenna users
    int pilots = 4;           // tau, uplink pilot symbols per frame
    double pilot_power = 100.0;       // p_tau (20 dBm)
    double large_scale_gain = 0.1;    // gamma in (0, 1] (-10 dB)
    double power_budget = 100.0;      // P, long-term average power (20 dBm)
    int arrival_rate = 5;             // lambda, packets arriving per frame
    double packet_bits = 52.0;        // L, bits per packet
    int buffer_size = 10;             // B, queue capacity in packets
    double drop_penalty_s = 0.5;      // latency charged per overflowed packet
    double eps_max = 0.031622776601683794; // reliability cap on target error rate
    double interference_power = 1.0;  // p_I, inter-cell interference (noise-floor units)
    double frame_duration_s = 0.25e-3;
    LinkMode mode = LinkMode::single_user;

    /// Per-entry variance of the MMSE channel estimate.
    double estimate_variance() const {
        const double snr = static_cast<double>(pilots) * pilot_power * large_scale_gain;
        return snr / (snr + 1.0);
    }

    /// Variance of the corresponding estimation error, 1 / (1 + gamma p_tau tau).
    double error_variance() const { return 1.0 - estimate_variance(); }

    /// Drop penalty expressed in frames, the unit the latency objective uses.
    double drop_penalty_frames() const { return drop_penalty_s / frame_duration_s; }

    /// Nats carried per packet per subcarrier; exp(r * L / N) is the outage
    /// threshold scale for transmission rate r.
    double nats_per_packet_per_subcarrier() const {
        return packet_bits / static_cast<double>(subcarriers);
    }

    void validate() const {
        if (antennas < 1) throw ConfigError("antennas must be >= 1");
        if (subcarriers < 1) throw ConfigError("subcarriers must be >= 1");
        if (users < 1) throw ConfigError("users must be >= 1");
        if (pilots < 1) throw ConfigError("pilots must be >= 1");
        if (!(pilot_power > 0.0)) throw ConfigError("pilot_power must be > 0");
        if (!(large_scale_gain > 0.0) || large_scale_gain > 1.0)
            throw ConfigError("large_scale_gain must be in (0, 1]");
        if (!(power_budget > 0.0)) throw ConfigError("power_budget must be > 0");
        if (arrival_rate < 1) throw ConfigError("arrival_rate must be >= 1");
        if (!(packet_bits > 0.0)) throw ConfigError("packet_bits must be > 0");
        if (buffer_size < arrival_rate)
            throw ConfigError("buffer_size must be >= arrival_rate");
        if (drop_penalty_s < 0.0) throw ConfigError("drop_penalty_s must be >= 0");
        if (!(eps_max > 0.0) || eps_max > 1.0)
            throw ConfigError("eps_max must be in (0, 1]");
        if (interference_power < 0.0)
            throw ConfigError("interference_power must be >= 0");
        if (!(frame_duration_s > 0.0)) throw ConfigError("frame_duration_s must be > 0");
        if (mode == LinkMode::multiuser && antennas <= users)
            throw ConfigError("multiuser mode requires antennas > users");
    }
};

/// One user's slice of a multiuser system; shared parameters (M, N, tau,
/// interference) live in MultiuserConfig itself.
struct UserConfig {
    double large_scale_gain = 0.1;
    double pilot_power = 100.0;
    double power_budget = 100.0;
    int arrival_rate = 5;
    double packet_bits = 52.0;
    double eps_max = 0.031622776601683794;
    double weight = 1.0;
};

struct MultiuserConfig {
    int antennas = 64;
    int subcarriers = 52;
    int pilots = 4;
    double interference_power = 1.0;
    int buffer_size = 10;
    double drop_penalty_s = 0.5;
    double frame_duration_s = 0.25e-3;
    std::vector<UserConfig> user;

    int user_count() const { return static_cast<int>(user.size()); }

    void validate() const {
        if (user.empty()) throw ConfigError("multiuser config needs at least one user");
        if (antennas <= user_count())
            throw ConfigError("zero-forcing requires antennas > users");
        for (const UserConfig& u : user) {
            if (!(u.weight > 0.0)) throw ConfigError("user weights must be > 0");
            single_user_view(u).validate();
        }
    }

    /// The decoupled single-user problem for one user, in multiuser link mode.
    SystemConfig single_user_view(const UserConfig& u) const {
        SystemConfig cfg;
        cfg.antennas = antennas;
        cfg.subcarriers = subcarriers;
        cfg.users = user_count();
        cfg.pilots = pilots;
        cfg.pilot_power = u.pilot_power;
        cfg.large_scale_gain = u.large_scale_gain;
        cfg.power_budget = u.power_budget;
        cfg.arrival_rate = u.arrival_rate;
        cfg.packet_bits = u.packet_bits;
        cfg.buffer_size = buffer_size;
        cfg.drop_penalty_s = drop_penalty_s;
        cfg.eps_max = u.eps_max;
        cfg.interference_power = interference_power;
        cfg.frame_duration_s = frame_duration_s;
        cfg.mode = LinkMode::multiuser;
        return cfg;
    }
};

inline double dbm_to_linear(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double linear_to_dbm(double lin) { return 10.0 * std::log10(lin); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

} // namespace mmlat
