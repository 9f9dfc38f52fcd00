#pragma once

// Independent scalar reference implementations used to cross-check the
// library. These deliberately share no code with core/ — plain loops,
// separately derived statistics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace testsupport {

struct OracleMetrics {
    double mse = 0.0;
    double mae = 0.0;
    double smape = 0.0;
    std::optional<double> mase;
};

/// Element-by-element metric reference over flat [B][C][H] data.
inline OracleMetrics oracle_metrics(const std::vector<double>& pred,
                                    const std::vector<double>& truth, std::size_t batch,
                                    std::size_t channels, std::size_t horizon) {
    OracleMetrics m;
    const std::size_t n = batch * channels * horizon;
    std::size_t smape_count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = pred[i] - truth[i];
        m.mse += diff * diff / static_cast<double>(n);
        m.mae += std::fabs(diff) / static_cast<double>(n);
        const double denom = std::fabs(pred[i]) + std::fabs(truth[i]);
        if (denom > 0.0) {
            m.smape += std::fabs(diff) / denom;
            ++smape_count;
        }
    }
    m.smape = smape_count == 0 ? 0.0 : 200.0 * m.smape / static_cast<double>(smape_count);

    if (horizon >= 2) {
        double scale = 0.0;
        std::size_t terms = 0;
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t base = (b * channels + c) * horizon;
                for (std::size_t t = 1; t < horizon; ++t) {
                    scale += std::fabs(truth[base + t] - truth[base + t - 1]);
                    ++terms;
                }
            }
        }
        scale /= static_cast<double>(terms);
        if (scale > 0.0) m.mase = m.mae / scale;
    }
    return m;
}

/// Brute-force anomaly reference: recomputes mean, sample std and
/// linearly-interpolated quartiles from scratch, then applies the Z and IQR
/// rules to every finite point. NaN cells are ignored.
inline std::vector<std::size_t> oracle_anomalies(const std::vector<double>& x, double z_threshold,
                                                 double iqr_factor) {
    std::vector<double> obs;
    for (double v : x) {
        if (!std::isnan(v)) obs.push_back(v);
    }
    const auto n = static_cast<double>(obs.size());

    double mean = 0.0;
    for (double v : obs) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : obs) var += (v - mean) * (v - mean);
    var /= (n - 1.0);
    const double sd = std::sqrt(var);

    std::vector<double> sorted = obs;
    std::sort(sorted.begin(), sorted.end());
    auto quant = [&](double p) {
        const double pos = p * (n - 1.0);
        const auto idx = static_cast<std::size_t>(std::floor(pos));
        if (idx + 1 >= sorted.size()) return sorted.back();
        return sorted[idx] * (1.0 - (pos - std::floor(pos))) +
               sorted[idx + 1] * (pos - std::floor(pos));
    };
    const double q1 = quant(0.25);
    const double q3 = quant(0.75);
    const double iqr = q3 - q1;

    std::vector<std::size_t> flagged;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (std::isnan(x[t])) continue;
        bool is_outlier = x[t] < q1 - iqr_factor * iqr || x[t] > q3 + iqr_factor * iqr;
        if (sd > 0.0 && std::fabs(x[t] - mean) > z_threshold * sd) is_outlier = true;
        if (is_outlier) flagged.push_back(t);
    }
    return flagged;
}

inline double sample_variance(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(x.size() - 1);
}

/// Excess kurtosis m4/m2^2 - 3 of a sample.
inline double excess_kurtosis(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(x.size());
    m4 /= static_cast<double>(x.size());
    return m4 / (m2 * m2) - 3.0;
}

}  // namespace testsupport
