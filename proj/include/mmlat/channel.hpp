#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmlat/config.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/parallel.hpp"
#include "mmlat/rng.hpp"

namespace mmlat::channel {

/// Estimated uplink channel for one subcarrier in one frame.
struct ChannelSample {
    std::vector<std::complex<double>> estimated_channel; // length M
    int subcarrier_index = 1;                            // in [1, N]
};

namespace detail {

/// RNG stream for (sample index, subcarrier); every antenna entry comes from
/// the same stream so a whole vector is one contiguous counter range.
inline std::uint64_t sample_stream(std::uint64_t sample_index, int subcarrier) {
    return derive_stream("channel", sample_index, static_cast<std::uint64_t>(subcarrier));
}

/// Squared norm of a fresh estimate vector, divided by M, without
/// materializing the vector. Must stay draw-for-draw identical to
/// sample_estimated_channel.
inline double draw_kappa(const SystemConfig& cfg, std::uint64_t seed,
                         std::uint64_t sample_index, int subcarrier) {
    CounterRng rng(seed, sample_stream(sample_index, subcarrier));
    const double sigma = std::sqrt(cfg.estimate_variance() / 2.0);
    double sum_sq = 0.0;
    for (int m = 0; m < cfg.antennas; ++m) {
        const double re = sigma * rng.normal();
        const double im = sigma * rng.normal();
        sum_sq += re * re + im * im;
    }
    return sum_sq / static_cast<double>(cfg.antennas);
}

} // namespace detail

/// Draw the MMSE channel estimate for one subcarrier: M i.i.d. circularly
/// symmetric complex Gaussian entries with per-entry variance
/// tau p_tau gamma / (1 + tau p_tau gamma).
inline ChannelSample sample_estimated_channel(const SystemConfig& cfg, std::uint64_t seed,
                                              std::uint64_t sample_index = 0,
                                              int subcarrier_index = 1) {
    cfg.validate();
    if (subcarrier_index < 1 || subcarrier_index > cfg.subcarriers)
        throw ConfigError("subcarrier_index out of range");
    CounterRng rng(seed, detail::sample_stream(sample_index, subcarrier_index));
    const double sigma = std::sqrt(cfg.estimate_variance() / 2.0);
    ChannelSample sample;
    sample.subcarrier_index = subcarrier_index;
    sample.estimated_channel.reserve(cfg.antennas);
    for (int m = 0; m < cfg.antennas; ++m) {
        const double re = sigma * rng.normal();
        const double im = sigma * rng.normal();
        sample.estimated_channel.emplace_back(re, im);
    }
    return sample;
}

/// Per-antenna gain of one subcarrier: squared norm of the estimate over M.
inline double per_antenna_gain(const ChannelSample& sample) {
    if (sample.estimated_channel.empty())
        throw ConfigError("per_antenna_gain: empty channel vector");
    double sum_sq = 0.0;
    for (const std::complex<double>& h : sample.estimated_channel) sum_sq += std::norm(h);
    return sum_sq / static_cast<double>(sample.estimated_channel.size());
}

/// Effective channel gain: geometric mean of the per-subcarrier gains,
/// computed in the log domain so N=52 products cannot underflow.
inline double effective_gain(std::span<const double> per_antenna_gains) {
    if (per_antenna_gains.empty()) throw DomainError("effective_gain: no gains");
    double log_sum = 0.0;
    for (double kappa : per_antenna_gains) {
        if (!(kappa > 0.0)) throw DomainError("effective_gain: gains must be > 0");
        log_sum += std::log(kappa);
    }
    return std::exp(log_sum / static_cast<double>(per_antenna_gains.size()));
}

/// Empirical distribution of the effective gain from n_samples independent
/// frames, each aggregating N fresh per-antenna gains. Deterministic given
/// (cfg, seed) regardless of thread count. point_mass, when set, replaces the
/// sampler with a degenerate distribution (test hook for variance-0 channels).
inline GainDistribution build_gain_distribution(const SystemConfig& cfg, std::size_t n_samples,
                                                std::uint64_t seed,
                                                std::optional<double> point_mass = std::nullopt) {
    cfg.validate();
    if (n_samples < 1000)
        throw ConfigError("n_samples must be >= 1000 for usable quantile resolution");
    std::vector<double> etas(n_samples);
    if (point_mass) {
        if (!(*point_mass > 0.0)) throw ConfigError("point_mass must be > 0");
        std::fill(etas.begin(), etas.end(), *point_mass);
        return GainDistribution::from_samples(std::move(etas));
    }
    parallel_for(n_samples, [&](std::size_t i) {
        double log_sum = 0.0;
        for (int n = 1; n <= cfg.subcarriers; ++n)
            log_sum += std::log(detail::draw_kappa(cfg, seed, i, n));
        etas[i] = std::exp(log_sum / static_cast<double>(cfg.subcarriers));
    });
    return GainDistribution::from_samples(std::move(etas));
}

struct KappaStats {
    double mean = 0.0;
    double variance = 0.0;
    std::size_t count = 0;
};

/// Monte-Carlo mean/variance of the per-antenna gain on a dedicated stream.
inline KappaStats sample_kappa_stats(const SystemConfig& cfg, std::size_t n_samples,
                                     std::uint64_t seed) {
    cfg.validate();
    if (n_samples < 2) throw ConfigError("kappa stats need at least 2 samples");
    std::vector<double> kappas(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        // Subcarrier slot 0 keeps these draws disjoint from eta sampling.
        kappas[i] = detail::draw_kappa(cfg, seed, i, 0);
    });
    double mean = 0.0;
    for (double k : kappas) mean += k;
    mean /= static_cast<double>(n_samples);
    double var = 0.0;
    for (double k : kappas) var += (k - mean) * (k - mean);
    var /= static_cast<double>(n_samples - 1);
    return KappaStats{mean, var, n_samples};
}

} // namespace mmlat::channel
