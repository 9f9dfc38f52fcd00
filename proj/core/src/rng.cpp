#include "idealtsf/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace idealtsf {

std::uint64_t RngStream::uniform_int(std::uint64_t lo, std::uint64_t hi) {
    if (lo > hi) {
        throw std::invalid_argument("RngStream::uniform_int: lo > hi");
    }
    const std::uint64_t range = hi - lo + 1;  // 0 means the full 64-bit range
    if (range == 0) {
        return engine_();
    }
    // Reject draws from the incomplete top block: threshold = 2^64 mod range.
    const std::uint64_t threshold = (0 - range) % range;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x < threshold);
    return lo + x % range;
}

double RngStream::gaussian(double mean, double stddev) {
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform01();
    const double u2 = uniform01();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (0x9e3779b97f4a7c15ull + a));
    h = splitmix64(h ^ (0xa24baed4963ee407ull + b));
    return h;
}

}  // namespace idealtsf
