#pragma once

#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mmlat/channel.hpp"
#include "mmlat/errors.hpp"
#include "mmlat/gain_distribution.hpp"
#include "mmlat/multiuser.hpp"
#include "mmlat/rng.hpp"

namespace mmlat::trace {

static_assert(std::endian::native == std::endian::little,
              "trace files are little-endian; big-endian hosts are unsupported");

/// On-disk layout: 16-byte magic, four little-endian u32 header fields
/// (antennas M, subcarriers N, users K, frame count), then float32
/// interleaved re/im samples ordered frame-major, then subcarrier, user,
/// antenna. One format serves K = 1 and K > 1.
inline constexpr char kMagic[16] = {'M', 'M', 'L', 'A', 'T', '-', 'T', 'R',
                                    'A', 'C', 'E', '-', 'v', '0', '1', '\0'};

struct TraceFile {
    std::uint32_t antennas = 0;
    std::uint32_t subcarriers = 0;
    std::uint32_t users = 0;
    std::uint32_t frames = 0;
    std::vector<std::complex<float>> payload; // frames * N * K * M entries

    std::size_t expected_entries() const {
        return static_cast<std::size_t>(frames) * subcarriers * users * antennas;
    }

    const std::complex<float>& at(std::uint32_t frame, std::uint32_t subcarrier,
                                  std::uint32_t user, std::uint32_t antenna) const {
        const std::size_t idx =
            ((static_cast<std::size_t>(frame) * subcarriers + subcarrier) * users + user) *
                antennas +
            antenna;
        return payload[idx];
    }
};

inline void write_trace(const std::string& path, const TraceFile& trace) {
    if (trace.payload.size() != trace.expected_entries())
        throw ConfigError("trace payload size does not match header");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot open trace file for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t header[4] = {trace.antennas, trace.subcarriers, trace.users,
                                     trace.frames};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(trace.payload.data()),
              static_cast<std::streamsize>(trace.payload.size() * sizeof(std::complex<float>)));
    if (!out) throw ParseError("short write to trace file: " + path);
}

inline TraceFile load_trace(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ParseError("cannot open trace file: " + path);
    const std::streamoff file_size = in.tellg();
    in.seekg(0);

    char magic[sizeof(kMagic)];
    if (file_size < static_cast<std::streamoff>(sizeof(kMagic) + 16) ||
        !in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ParseError("trace magic mismatch at byte offset 0: " + path);
    }
    std::uint32_t header[4];
    if (!in.read(reinterpret_cast<char*>(header), sizeof(header)))
        throw ParseError("trace header truncated at byte offset 16: " + path);

    TraceFile trace;
    trace.antennas = header[0];
    trace.subcarriers = header[1];
    trace.users = header[2];
    trace.frames = header[3];
    if (trace.antennas < 1 || trace.subcarriers < 1 || trace.users < 1 || trace.frames < 1)
        throw ParseError("trace header has zero dimension at byte offset 16: " + path);

    const std::size_t expected_bytes =
        sizeof(kMagic) + sizeof(header) +
        trace.expected_entries() * sizeof(std::complex<float>);
    if (static_cast<std::size_t>(file_size) != expected_bytes) {
        std::ostringstream msg;
        msg << "trace payload truncated: expected " << expected_bytes << " bytes, found "
            << file_size << " (payload starts at byte offset 32): " << path;
        throw ParseError(msg.str());
    }
    trace.payload.resize(trace.expected_entries());
    if (!in.read(reinterpret_cast<char*>(trace.payload.data()),
                 static_cast<std::streamsize>(trace.payload.size() *
                                              sizeof(std::complex<float>))))
        throw ParseError("trace payload read failed: " + path);
    return trace;
}

/// Optional re-injection of channel-estimation error onto measured traces:
/// adds zero-mean complex Gaussian noise of variance 1 / (1 + gamma p_tau tau)
/// to every gain. Measured traces are treated as the perfect channel, so this
/// is an interpretation choice and is flagged as such in CLI output.
struct EstimationNoise {
    double gamma = 0.1;
    double pilot_power = 100.0;
    int pilots = 4;
    std::uint64_t seed = 0;

    double variance() const { return 1.0 / (1.0 + gamma * pilot_power * pilots); }
};

/// Effective-gain distribution of one user from a trace: per frame, the
/// geometric mean over subcarriers of the per-antenna gain (vector norm for
/// K = 1, inverse-Gram diagonal for K > 1). One eta sample per frame.
inline GainDistribution gain_distribution_from_trace(
    const TraceFile& trace, std::uint32_t user,
    const std::optional<EstimationNoise>& noise = std::nullopt) {
    if (user >= trace.users) throw ConfigError("trace user index out of range");
    const std::uint32_t m = trace.antennas;
    const std::uint32_t k_users = trace.users;
    std::vector<double> etas(trace.frames);

    const double sigma = noise ? std::sqrt(noise->variance() / 2.0) : 0.0;
    for (std::uint32_t f = 0; f < trace.frames; ++f) {
        double log_sum = 0.0;
        for (std::uint32_t n = 0; n < trace.subcarriers; ++n) {
            CounterRng rng(noise ? noise->seed : 0, derive_stream("trace-noise", f, n));
            double kappa = 0.0;
            if (k_users == 1) {
                double sum_sq = 0.0;
                for (std::uint32_t a = 0; a < m; ++a) {
                    std::complex<double> h(trace.at(f, n, 0, a));
                    if (noise)
                        h += std::complex<double>(sigma * rng.normal(), sigma * rng.normal());
                    sum_sq += std::norm(h);
                }
                kappa = sum_sq / static_cast<double>(m);
            } else {
                multiuser::ComplexMatrix est(m, k_users);
                for (std::uint32_t u = 0; u < k_users; ++u) {
                    for (std::uint32_t a = 0; a < m; ++a) {
                        std::complex<double> h(trace.at(f, n, u, a));
                        if (noise)
                            h += std::complex<double>(sigma * rng.normal(),
                                                      sigma * rng.normal());
                        est(a, u) = h;
                    }
                }
                kappa = multiuser::mu_per_antenna_gain(est, user);
            }
            log_sum += std::log(kappa);
        }
        etas[f] = std::exp(log_sum / static_cast<double>(trace.subcarriers));
    }
    return GainDistribution::from_samples(std::move(etas));
}

} // namespace mmlat::trace
