#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace fkrwrc {

using Philox4x32Ctr = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

// Philox4x32 with 10 rounds (Salmon et al., SC'11).
constexpr Philox4x32Ctr philox4x32(Philox4x32Ctr ctr, Philox4x32Key key) noexcept
{
    constexpr std::uint32_t m0 = 0xD2511F53u;
    constexpr std::uint32_t m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u;
    constexpr std::uint32_t w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += w0;
            key[1] += w1;
        }
        const std::uint64_t p0 = std::uint64_t(m0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(m1) * ctr[2];
        const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
        const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) noexcept
{
    return splitmix64(h ^ splitmix64(v + 0x632BE59BD9B4E019ull));
}

constexpr std::uint64_t tag_hash(std::string_view tag) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= std::uint8_t(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Key for an independent stream, derived from a seed, a tag and two indices.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::string_view tag,
                                   std::uint64_t a = 0, std::uint64_t b = 0) noexcept
{
    return hash_combine(hash_combine(hash_combine(splitmix64(seed), tag_hash(tag)), a), b);
}

/// Maps 64 random bits to a double in (0, 1].
constexpr double bits_to_unit(std::uint64_t bits) noexcept
{
    return double((bits >> 11) + 1) * 0x1.0p-53;
}

/// Counter-addressed uniforms: value(counter, lane) is a pure function of the key.
class CounterStream {
  public:
    constexpr CounterStream() = default;
    constexpr explicit CounterStream(std::uint64_t key) noexcept
        : key_{std::uint32_t(key), std::uint32_t(key >> 32)}
    {
    }

    constexpr std::uint64_t bits(std::uint64_t counter, std::uint32_t lane) const noexcept
    {
        const auto out = philox4x32({std::uint32_t(counter), std::uint32_t(counter >> 32), lane >> 1, 0x5EEDu}, key_);
        return (lane & 1u) ? (std::uint64_t(out[3]) << 32 | out[2]) : (std::uint64_t(out[1]) << 32 | out[0]);
    }

    constexpr double uniform(std::uint64_t counter, std::uint32_t lane) const noexcept
    {
        return bits_to_unit(bits(counter, lane));
    }

  private:
    Philox4x32Key key_{};
};

/// Sequential generator over a Philox stream; models UniformRandomBitGenerator.
class Rng {
  public:
    using result_type = std::uint64_t;

    Rng() = default;
    explicit Rng(std::uint64_t key) : stream_(key) {}
    Rng(std::uint64_t seed, std::string_view tag, std::uint64_t a = 0, std::uint64_t b = 0)
        : stream_(stream_key(seed, tag, a, b))
    {
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()()
    {
        const auto v = stream_.bits(counter_, lane_);
        if (++lane_ == 2) {
            lane_ = 0;
            ++counter_;
        }
        return v;
    }

    /// Uniform in (0, 1].
    double uniform() { return bits_to_unit((*this)()); }

    double exponential() { return -std::log(uniform()); }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double t = 2.0 * M_PI * uniform();
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n)
    {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t v;
        do {
            v = (*this)();
        } while (v >= limit);
        return v % n;
    }

  private:
    CounterStream stream_;
    std::uint64_t counter_ = 0;
    std::uint32_t lane_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fkrwrc
