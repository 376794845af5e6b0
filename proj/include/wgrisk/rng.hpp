#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace wgrisk {

/// Counter-based generator built on the SplitMix64 finalizer.
///
/// Every draw is a pure function of (key, counter), so any block of a stream
/// can be regenerated independently and in any order. This is what lets the
/// Gram accumulator walk the noise matrix column block by column block
/// without ever materializing it.
///
/// Gaussians use the Box-Muller cosine branch: normal(key, i) consumes the
/// uniforms at counters 2i and 2i+1. Results are bit-reproducible for a given
/// compiler and libm; no promise is made across platforms.
class CounterRng {
public:
    static constexpr const char* kName = "splitmix64-counter/box-muller-cos";

    explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Derives an independent stream key from a parent key and a tag.
    static constexpr std::uint64_t derive(std::uint64_t parent, std::uint64_t tag) noexcept {
        return mix(parent + 0x9e3779b97f4a7c15ULL * (tag + 1) + 0x632be59bd9b4e019ULL);
    }

    constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
        return mix(key_ + 0x9e3779b97f4a7c15ULL * (counter + 1));
    }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal(std::uint64_t index) const noexcept {
        const double u1 = uniform(2 * index);
        const double u2 = uniform(2 * index + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    constexpr std::uint64_t key() const noexcept { return key_; }

private:
    std::uint64_t key_;
};

/// Stream tags used to split a master seed.
enum class Stream : std::uint64_t { labels = 1, groups = 2, noise = 3, test = 4, wishart = 5 };

inline CounterRng stream(std::uint64_t seed, Stream s) noexcept {
    return CounterRng(CounterRng::derive(seed, static_cast<std::uint64_t>(s)));
}

/// Per-trial substream seed.
constexpr std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) noexcept {
    return seed ^ trial;
}

} // namespace wgrisk
