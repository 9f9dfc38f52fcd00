#pragma once

// Shared test fixtures: synthetic series with injected spikes and missing
// runs, dyadic-grid random values for exact floating-point attack checks,
// and a scratch-directory helper.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "idealtsf/rng.hpp"
#include "idealtsf/tensor.hpp"
#include "idealtsf/time_series.hpp"

namespace testsupport {

struct FixtureSpec {
    std::size_t channels = 3;
    std::size_t timesteps = 2000;
    double spike_fraction = 0.01;
    double missing_fraction = 0.02;
    double observation_noise = 0.02;
    std::uint64_t seed = 7;
};

/// Sinusoid mixture per channel with injected large spikes and contiguous
/// missing runs. Deterministic for a given spec.
inline idealtsf::TimeSeries make_synthetic_series(const FixtureSpec& spec = {}) {
    using std::numbers::pi;
    idealtsf::TimeSeries series(spec.channels, spec.timesteps);
    idealtsf::RngStream rng(idealtsf::derive_stream_seed(spec.seed, 0xf1c, 0));

    for (std::size_t c = 0; c < spec.channels; ++c) {
        const double phase1 = rng.uniform(0.0, 2.0 * pi);
        const double phase2 = rng.uniform(0.0, 2.0 * pi);
        const double amp2 = 0.4 + 0.4 * rng.uniform01();
        for (std::size_t t = 0; t < spec.timesteps; ++t) {
            const double x = static_cast<double>(t);
            series.at(c, t) = std::sin(2.0 * pi * x / 24.0 + phase1) +
                              amp2 * std::sin(2.0 * pi * x / 60.0 + phase2) +
                              rng.gaussian(0.0, spec.observation_noise);
        }

        const auto spikes =
            static_cast<std::size_t>(spec.spike_fraction * static_cast<double>(spec.timesteps));
        for (std::size_t s = 0; s < spikes; ++s) {
            const std::size_t t = rng.uniform_int(0, spec.timesteps - 1);
            const double magnitude = rng.uniform(6.0, 12.0);
            series.at(c, t) += rng.uniform01() < 0.5 ? magnitude : -magnitude;
        }

        const auto missing_target =
            static_cast<std::size_t>(spec.missing_fraction * static_cast<double>(spec.timesteps));
        std::size_t missing = 0;
        while (missing < missing_target) {
            const std::size_t run = rng.uniform_int(5, 15);
            const std::size_t start = rng.uniform_int(0, spec.timesteps - run);
            for (std::size_t t = start; t < start + run && missing < missing_target; ++t) {
                if (series.observed(c, t)) {
                    series.set_missing(c, t);
                    ++missing;
                }
            }
        }
    }
    return series;
}

/// Uniform draw from the dyadic grid k * 2^-20 with |value| <= bound, so sums
/// and differences with other grid values are exact in double precision.
inline double dyadic(idealtsf::RngStream& rng, double bound) {
    const auto steps = static_cast<std::int64_t>(bound * 1048576.0);
    const auto k = static_cast<std::int64_t>(rng.uniform_int(0, 2 * static_cast<std::uint64_t>(steps)));
    return static_cast<double>(k - steps) * 0x1.0p-20;
}

inline idealtsf::Tensor3 random_tensor(idealtsf::RngStream& rng, std::size_t d0, std::size_t d1,
                                       std::size_t d2, double lo = -1.0, double hi = 1.0) {
    idealtsf::Tensor3 out(d0, d1, d2);
    for (double& v : out.data) v = rng.uniform(lo, hi);
    return out;
}

/// Fresh scratch directory under the system temp root.
inline std::string scratch_dir(const std::string& tag) {
    const auto path = std::filesystem::temp_directory_path() /
                      ("idealtsf_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
    return path.string();
}

}  // namespace testsupport
