#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

#include "core.hpp"

namespace arfade {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Child seed for the substream addressed by `path` under `seed`. Each step of the
/// path is hashed in turn, so seeds of sibling streams do not depend on how many
/// siblings exist.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t s = mix64(seed);
    for (std::uint64_t step : path) {
        s = mix64(s ^ mix64(step + 0x632be59bd9b4e019ULL));
    }
    return s;
}

/// Stream tags used under a user seed.
enum class Stream : std::uint64_t {
    Channel = 1,
    Noise = 2,
    Pilots = 3,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream, std::uint64_t index) noexcept {
    return derive_seed(seed, {static_cast<std::uint64_t>(stream), index});
}

/// Circular complex Gaussian: real and imaginary parts i.i.d. N(0, variance / 2).
class ComplexGaussian {
public:
    explicit ComplexGaussian(std::uint64_t seed) : engine_(seed) {}

    cplx operator()(double variance = 1.0) {
        const double scale = std::sqrt(variance / 2.0);
        const double re = normal_(engine_);
        const double im = normal_(engine_);
        return {scale * re, scale * im};
    }

    std::mt19937_64& engine() noexcept { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace arfade
