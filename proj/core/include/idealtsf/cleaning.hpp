#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace idealtsf {

/// Detection and repair knobs for positive-sample generation.
struct CleanConfig {
    double z_threshold = 3.0;      // |Z| above this is anomalous
    double iqr_factor = 1.5;       // fence width in IQR units
    std::size_t smooth_window = 5; // trailing moving-average width

    void validate() const;
};

/// What detection found in one sequence. Missing and anomaly sets are
/// disjoint: anomalies are only flagged among observed points.
struct CleanReport {
    std::vector<std::size_t> missing_indices;  // sorted
    std::vector<std::size_t> anomaly_indices;  // sorted
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double mean = 0.0;
    double std_dev = 0.0;
    bool z_criterion_skipped = false;  // true when std was zero
};

std::string to_json_string(const CleanReport& report);

/// Missing cells are the NaN cells (the series substrate stores masked-out
/// values as NaN).
std::vector<std::size_t> detect_missing(const std::vector<double>& x);

/// Z-score plus IQR-fence detection over the observed points. Quartiles use
/// linear interpolation between order statistics; std is the sample std.
/// Requires at least 4 observed points. A zero std skips the Z criterion
/// (reported in the result); the IQR fences still apply.
CleanReport detect_anomalies(const std::vector<double>& x, const CleanConfig& cfg);

/// Replaces each repaired index by the linear interpolation between its
/// nearest non-repaired neighbours; leading/trailing runs copy the nearest
/// non-repaired value. Throws if the repair set covers every index.
std::vector<double> interpolate_linear(const std::vector<double>& x,
                                       const std::vector<std::size_t>& repair_set);

/// Trailing moving average over [max(0, t-W+1), t].
std::vector<double> smooth_moving_average(const std::vector<double>& x, std::size_t window);

/// Full repair: detect missing and anomalies, interpolate across their union,
/// then smooth. The output is finite at every index.
std::pair<std::vector<double>, CleanReport> make_positive(const std::vector<double>& x,
                                                          const CleanConfig& cfg);

}  // namespace idealtsf
