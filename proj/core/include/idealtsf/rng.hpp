#pragma once

#include <cstdint>
#include <random>

namespace idealtsf {

/// Deterministic random stream. The engine is std::mt19937_64 (bit-exact by
/// the standard); the variate transforms are hand-rolled because the standard
/// library distributions are implementation-defined and would break
/// cross-toolchain reproducibility.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer on [lo, hi], inclusive. Rejection-sampled, no modulo bias.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

    /// One N(mean, stddev^2) draw via Box-Muller. Always consumes exactly two
    /// engine outputs so stream positions stay predictable.
    double gaussian(double mean = 0.0, double stddev = 1.0);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Stream-splitting hash: derives an independent stream seed from a master
/// seed and two indices (e.g. window and channel), so applying a transform
/// per sequence gives the same result regardless of iteration order.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace idealtsf
