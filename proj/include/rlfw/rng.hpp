#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace rlfw {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

// Seeded generator built on splitmix64. Distributions are implemented here
// rather than with <random> so draws are identical across standard libraries.
class Rng {
public:
    explicit constexpr Rng(std::uint64_t seed) noexcept : state_(seed) {}

    /// Independent child stream keyed by name, e.g. Rng(seed).substream("balance").
    [[nodiscard]] Rng substream(std::string_view name) const noexcept {
        std::uint64_t s = state_ ^ fnv1a(name);
        return Rng(splitmix64(s));
    }
    [[nodiscard]] Rng substream(std::uint64_t index) const noexcept {
        std::uint64_t s = state_ + 0xD1B54A32D192ED03ULL * (index + 1);
        return Rng(splitmix64(s));
    }

    std::uint64_t next_u64() noexcept { return splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's multiply-shift with rejection.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = -n % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    double normal() noexcept {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double exponential(double mean) noexcept { return -mean * std::log(1.0 - uniform()); }

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    std::uint64_t state_;
};

}  // namespace rlfw
