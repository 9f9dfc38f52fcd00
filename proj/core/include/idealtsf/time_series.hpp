#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "idealtsf/tensor.hpp"

namespace idealtsf {

/// Std floor applied to degenerate (constant) channels during normalization.
inline constexpr double kStdFloor = 1e-8;

/// Multivariate series, [channels x timesteps]. Cells with mask=false hold
/// NaN; observed cells are finite. All other modules consume this substrate.
struct TimeSeries {
    std::size_t channels = 0;
    std::size_t timesteps = 0;
    std::vector<double> values;        // row-major [channels][timesteps]
    std::vector<std::uint8_t> mask;    // 1 = observed
    std::vector<std::string> channel_names;
    std::optional<double> step_seconds;

    TimeSeries() = default;
    TimeSeries(std::size_t c, std::size_t t);

    double& at(std::size_t c, std::size_t t) { return values[c * timesteps + t]; }
    double at(std::size_t c, std::size_t t) const { return values[c * timesteps + t]; }
    bool observed(std::size_t c, std::size_t t) const { return mask[c * timesteps + t] != 0; }
    void set_missing(std::size_t c, std::size_t t);

    /// Checks the shape and NaN/finite invariants; throws on violation.
    void validate() const;
};

/// Per-channel standardization statistics.
struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;  // >= kStdFloor
};

/// Aligned lookback/horizon windows cut from one series.
/// inputs: [batch][channel][lookback], targets: [batch][channel][horizon];
/// each window's target starts exactly where its input ends.
struct WindowBatch {
    Tensor3 inputs;
    Tensor3 targets;
    std::vector<std::size_t> origin_indices;

    std::size_t size() const { return inputs.d0; }
    std::size_t channels() const { return inputs.d1; }
    std::size_t lookback() const { return inputs.d2; }
    std::size_t horizon() const { return targets.d2; }
};

inline const std::set<std::string>& default_missing_tokens() {
    static const std::set<std::string> tokens = {"", "NaN", "nan"};
    return tokens;
}

/// Reads a comma-separated file, one column per channel, rows in time order.
/// Cells matching a missing token become masked-out NaN. Throws on I/O
/// failure, ragged rows, or unparseable cells (with row/column in the message).
TimeSeries load_csv(const std::string& path, bool has_header,
                    const std::set<std::string>& missing_tokens = default_missing_tokens());

void write_csv(const std::string& path, const TimeSeries& series);

/// Per-channel (x - mean) / std over observed cells; masked cells untouched.
/// Uses sample std (divide by n-1), floored at kStdFloor for constant
/// channels. Requires >= 2 observed points per channel.
std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series);

/// Inverse of zscore_normalize on observed cells.
TimeSeries denormalize(const TimeSeries& series, const NormStats& stats);

/// Applies mean[c] + std[c] * x to every cell of a [batch][channel][time] tensor.
Tensor3 denormalize_tensor(const Tensor3& normalized, const NormStats& stats);

/// Cuts floor((T - L - H) / stride) + 1 windows in source order. Masked cells
/// arrive as NaN in the window data. Throws if the series is too short.
WindowBatch make_windows(const TimeSeries& series, std::size_t lookback,
                         std::size_t horizon, std::size_t stride);

/// Removes windows whose target segment contains any unobserved (NaN) cell,
/// so supervised losses never see masked targets.
WindowBatch drop_unobserved_target_windows(const WindowBatch& batch);

}  // namespace idealtsf
