#pragma once

#include <cstdint>

#include "vstar/tensor.hpp"

namespace vstar {

/// Counter-based deterministic generator. The i-th output is a pure function
/// of (seed, i), so streams are reproducible bit-exactly across platforms and
/// a generator can be reconstructed from (seed, position) alone.
///
/// next_u64 at position p (1-based after the call) is
///     mix(seed + p * 0x9E3779B97F4A7C15)
/// with the SplitMix64 finalizer as mix(). Reference vectors, seed = 0:
///     position 1 -> 0xE220A8397B1DCDAF
///     position 2 -> 0x6E789E6AA1B965F4
///     position 3 -> 0x06C45D188009454F
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t position = 0)
        : seed_(seed), position_(position) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t position() const { return position_; }

    std::uint64_t next_u64() {
        ++position_;
        return mix(seed_ + position_ * GAMMA);
    }

    /// Uniform in [0, 1), 53-bit mantissa.
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; always consumes exactly two draws.
    double next_normal();

    /// Uniform integer in [0, n). Rejection-free modulo; fine for small n.
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

    /// Derives an independent child stream. Documented split function:
    ///     child_seed = mix(mix(seed) + (stream_id + 1) * 0xD1B54A32D192ED03)
    SeededRng split(std::uint64_t stream_id) const {
        return SeededRng(mix(mix(seed_) + (stream_id + 1) * 0xD1B54A32D192ED03ULL));
    }

    void fill_uniform(Tensor& t, double lo = 0.0, double hi = 1.0);
    void fill_normal(Tensor& t);
    void fill_normal(Matrix& m);

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

private:
    static constexpr std::uint64_t GAMMA = 0x9E3779B97F4A7C15ULL;

    std::uint64_t seed_;
    std::uint64_t position_;
};

}  // namespace vstar
