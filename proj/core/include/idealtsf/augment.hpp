#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "idealtsf/rng.hpp"
#include "idealtsf/time_series.hpp"

namespace idealtsf {

/// Parameters of the stable-distribution jump increments. mu and beta are
/// carried for completeness but do not enter the polar sampling recipe; only
/// gamma and alpha shape the draws.
struct StableParams {
    double mu = 0.0;
    double gamma = 0.05;
    double alpha = 1.5;    // (0, 2], alpha == 1 rejected (magnitude singularity)
    double beta = 0.0;     // [-1, 1]

    void validate() const;
};

struct NoiseScale {
    std::size_t window = 1;
    double sigma = 0.0;
};

/// Multi-scale noise schedule: windows strictly increasing, with the longer
/// (lower-frequency) scales carrying the larger intensities.
struct NoiseScaleSpec {
    std::vector<NoiseScale> scales;

    void validate() const;
};

/// Canonical schedule for a given base intensity and scale count:
/// w_i = 4^i, sigma_i = noise * w_i / w_max. The largest scale runs at the
/// full base intensity.
NoiseScaleSpec make_noise_scales(double noise, int n_scales);

/// Structured deletion: with the given probability, one contiguous run of
/// uniformly drawn length in [l_min, l_max] is zeroed.
struct DeletionSpec {
    std::size_t l_min = 4;
    std::size_t l_max = 300;
    double probability = 0.3;

    void validate() const;
    /// l_max is clamped to the sequence length at application time.
    DeletionSpec clamped(std::size_t sequence_length) const;
};

/// One full negative-sample draw specification. Fully determines the output
/// for a given source sequence.
struct AugConfig {
    StableParams stable;
    NoiseScaleSpec noise = make_noise_scales(0.03, 3);
    DeletionSpec deletion;
    std::uint64_t seed = 42;

    void validate() const;
};

/// Flat JSON mirroring the hyperparameter-table field names:
/// {noise, noise_sc, erase_l_min, erase_l_max, erase_p, alpha, gamma, seed}.
/// Serialization assumes the canonical make_noise_scales layout.
std::string to_json_string(const AugConfig& cfg);
AugConfig aug_config_from_json_string(const std::string& text);

/// Deterministic increment magnitude R = [(gamma/2) * |Gamma(alpha)| / |1-alpha|]^(1/alpha).
double increment_magnitude(const StableParams& params);

/// R * cos(theta) for a caller-chosen angle.
double increment_from_angle(const StableParams& params, double theta);

/// Draws theta ~ Uniform(0, 2*pi) and returns R * cos(theta). Only the angle
/// is random; R is fixed by the parameters.
double sample_increment(const StableParams& params, RngStream& rng);

/// x'_i = x_i + dx_i with i.i.d. increments.
std::vector<double> apply_jumps(const std::vector<double>& x, const StableParams& params,
                                RngStream& rng);

/// Adds, per scale, a trailing moving average of fresh N(0, sigma_i^2) draws.
/// At the left boundary the average runs over the available prefix. Steady
/// state variance per scale is sigma_i^2 / w_i.
std::vector<double> apply_multiscale_noise(const std::vector<double>& x,
                                           const NoiseScaleSpec& spec, RngStream& rng);

/// Inclusive index range [start, end] of a zeroed segment.
struct DeletionRange {
    std::size_t start = 0;
    std::size_t end = 0;
};

std::pair<std::vector<double>, std::optional<DeletionRange>> apply_structured_deletion(
    const std::vector<double>& x, const DeletionSpec& spec, RngStream& rng);

/// Applies jumps -> multi-scale noise -> structured deletion to every
/// (window, channel) input sequence independently; targets pass through.
/// Each sequence gets its own rng stream derived from (seed, window, channel),
/// so results do not depend on iteration order.
WindowBatch make_negative_batch(const WindowBatch& batch, const AugConfig& cfg);

}  // namespace idealtsf
