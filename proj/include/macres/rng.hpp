#pragma once

// Seedable, splittable pseudorandom generator.
//
// Every stochastic routine in the library takes an explicit Rng&. Child
// streams are derived from (key, id) only, never from the parent's running
// state, so split(i) returns the same stream no matter how much the parent
// has already been used. This is what makes worker-count-independent
// results possible.

#include <array>
#include <cstdint>
#include <limits>

namespace macres {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// xoshiro256** engine with a derivation key for splitting.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept : key_(detail::splitmix64(seed ^ 0x6a09e667f3bcc909ULL)) {
        reseed_from_key();
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = detail::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = detail::rotl(s_[3], 45);
        return result;
    }

    /// Independent child stream; pure function of (this->key, id).
    [[nodiscard]] Rng split(std::uint64_t id) const noexcept {
        Rng child;
        child.key_ = detail::splitmix64(key_ ^ detail::splitmix64(id + 0x243f6a8885a308d3ULL));
        child.reseed_from_key();
        return child;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    std::uint8_t bit() noexcept { return static_cast<std::uint8_t>((*this)() >> 63); }

    /// 1 with probability p1.
    std::uint8_t bernoulli(double p1) noexcept {
        if (p1 <= 0.0) return 0;
        if (p1 >= 1.0) return 1;
        return uniform01() < p1 ? 1 : 0;
    }

    /// Uniform integer in [0, n); n > 0. Lemire's nearly-divisionless method.
    std::uint64_t below(std::uint64_t n) noexcept {
        __uint128_t m = static_cast<__uint128_t>((*this)()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<__uint128_t>((*this)()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

private:
    void reseed_from_key() noexcept {
        std::uint64_t x = key_;
        for (auto& w : s_) {
            x = detail::splitmix64(x);
            w = x;
        }
    }

    std::uint64_t key_ = 0;
    std::array<std::uint64_t, 4> s_{};
};

}  // namespace macres
