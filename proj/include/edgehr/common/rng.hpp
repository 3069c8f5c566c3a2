/**
 * @file rng.hpp
 * @brief Reproducible pseudo-random generator.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Distributions from <random> are implementation-defined, so the
 * helpers below derive integers and reals from raw engine output with
 * documented algorithms:
 *
 * - uniform01(): top 53 bits of one draw scaled by 2^-53, range [0, 1).
 * - normal(): Box-Muller on two uniform01() draws, cosine branch only.
 * - below(n): rejection sampling on the raw 64-bit draw, discarding values
 *   under (2^64 mod n), then reducing modulo n.
 * - derive_seed(seed, stream): splitmix64 finalizer over seed + golden-ratio
 *   multiples of (stream + 1); used for per-tree and per-call streams.
 */

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace edgehr {

std::uint64_t splitmix64(std::uint64_t x) noexcept;

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace edgehr
