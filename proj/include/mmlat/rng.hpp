#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mmlat {

/// Counter-based pseudo-random generator.
///
/// Each draw is a stateless hash of (seed, stream, counter), so samples can be
/// generated in any order and from any thread without coordination: two
/// generators with the same (seed, stream) produce the same sequence, and
/// distinct streams are statistically independent. The mixer is the splitmix64
/// finalizer applied to the three words in sequence, which passes the usual
/// empirical test batteries for this construction.
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64() noexcept { return mix3(seed_, stream_, counter_++); }

    /// Uniform double in (0, 1]; never returns 0 so log() stays finite.
    double uniform01() noexcept {
        // 53 random mantissa bits, then shift from [0,1) to (0,1].
        return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller (platform-independent, unlike
    /// std::normal_distribution).
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform01();
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    bool bernoulli(double p_true) noexcept { return uniform01() <= p_true; }

    static std::uint64_t mix3(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
        std::uint64_t x = splitmix(a + 0x9e3779b97f4a7c15ULL);
        x = splitmix(x ^ b);
        x = splitmix(x ^ c);
        return x;
    }

  private:
    static std::uint64_t splitmix(std::uint64_t x) noexcept {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Named stream derivation: a master seed expands into independent streams by
/// hashing a label plus optional numeric qualifiers. This is the documented
/// seed-splitting rule used by the CLI ("channel", "simulate", "oracle", ...).
inline std::uint64_t derive_stream(std::string_view label, std::uint64_t a = 0,
                                   std::uint64_t b = 0) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return CounterRng::mix3(h, a, b);
}

inline std::uint64_t bits_of(double v) noexcept {
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    std::uint64_t out;
    __builtin_memcpy(&out, &v, sizeof(out));
    return out;
}

} // namespace mmlat
