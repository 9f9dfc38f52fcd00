#pragma once

#include <optional>
#include <string>

#include "idealtsf/tensor.hpp"

namespace idealtsf {

/// Forecast error summary. mase is absent when the naive one-step scale of
/// the truth is zero (e.g. constant targets) or the horizon has no
/// consecutive pairs.
struct MetricReport {
    double mse = 0.0;
    double mae = 0.0;
    double smape = 0.0;
    std::optional<double> mase;
};

/// mse/mae: means of squared/absolute residuals over all B*C*H elements.
/// smape: (200/N) * sum |p-y| / (|p|+|y|), terms with zero denominator are
/// skipped (excluded from N). mase: mae divided by the mean one-step absolute
/// difference of the truth along the horizon.
MetricReport metric_suite(const Tensor3& pred, const Tensor3& truth);

/// Flat JSON object {"mse":..,"mae":..,"smape":..,"mase":..|null}.
std::string to_json_string(const MetricReport& report);

}  // namespace idealtsf
