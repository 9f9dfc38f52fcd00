#include "idealtsf/cleaning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace idealtsf {

namespace {

/// Linear-interpolation quantile over sorted values (inclusive convention).
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = p * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

void CleanConfig::validate() const {
    if (!(z_threshold > 0.0)) {
        throw std::invalid_argument("CleanConfig: z_threshold must be positive");
    }
    if (!(iqr_factor > 0.0)) {
        throw std::invalid_argument("CleanConfig: iqr_factor must be positive");
    }
    if (smooth_window == 0) {
        throw std::invalid_argument("CleanConfig: smooth_window must be >= 1");
    }
}

std::string to_json_string(const CleanReport& report) {
    nlohmann::json j;
    j["missing_indices"] = report.missing_indices;
    j["anomaly_indices"] = report.anomaly_indices;
    j["q1"] = report.q1;
    j["q3"] = report.q3;
    j["iqr"] = report.iqr;
    j["mean"] = report.mean;
    j["std"] = report.std_dev;
    j["z_criterion_skipped"] = report.z_criterion_skipped;
    return j.dump();
}

std::vector<std::size_t> detect_missing(const std::vector<double>& x) {
    std::vector<std::size_t> missing;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (!std::isfinite(x[t])) missing.push_back(t);
    }
    return missing;
}

CleanReport detect_anomalies(const std::vector<double>& x, const CleanConfig& cfg) {
    cfg.validate();

    CleanReport report;
    std::vector<double> observed;
    observed.reserve(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (std::isfinite(x[t])) {
            observed.push_back(x[t]);
        } else {
            report.missing_indices.push_back(t);
        }
    }
    if (observed.size() < 4) {
        throw std::invalid_argument("detect_anomalies: need at least 4 observed points, got " +
                                    std::to_string(observed.size()));
    }

    const std::size_t n = observed.size();
    double sum = 0.0;
    for (double v : observed) sum += v;
    report.mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (double v : observed) {
        const double d = v - report.mean;
        ss += d * d;
    }
    report.std_dev = std::sqrt(ss / static_cast<double>(n - 1));
    report.z_criterion_skipped = report.std_dev == 0.0;

    std::vector<double> sorted = observed;
    std::sort(sorted.begin(), sorted.end());
    report.q1 = quantile_sorted(sorted, 0.25);
    report.q3 = quantile_sorted(sorted, 0.75);
    report.iqr = report.q3 - report.q1;

    const double low_fence = report.q1 - cfg.iqr_factor * report.iqr;
    const double high_fence = report.q3 + cfg.iqr_factor * report.iqr;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (!std::isfinite(x[t])) continue;
        bool flagged = x[t] < low_fence || x[t] > high_fence;
        if (!flagged && !report.z_criterion_skipped) {
            flagged = std::abs((x[t] - report.mean) / report.std_dev) > cfg.z_threshold;
        }
        if (flagged) report.anomaly_indices.push_back(t);
    }
    return report;
}

std::vector<double> interpolate_linear(const std::vector<double>& x,
                                       const std::vector<std::size_t>& repair_set) {
    std::vector<bool> repair(x.size(), false);
    for (std::size_t t : repair_set) {
        if (t >= x.size()) {
            throw std::invalid_argument("interpolate_linear: repair index out of range");
        }
        repair[t] = true;
    }

    std::vector<std::size_t> anchors;  // non-repaired indices, ascending
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (!repair[t]) anchors.push_back(t);
    }
    if (anchors.empty()) {
        throw std::invalid_argument("interpolate_linear: repair set covers every index");
    }

    std::vector<double> out = x;
    std::size_t next_anchor = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (!repair[t]) continue;
        while (next_anchor < anchors.size() && anchors[next_anchor] < t) ++next_anchor;
        if (next_anchor == 0) {
            out[t] = x[anchors.front()];  // leading run: nearest-value extension
        } else if (next_anchor == anchors.size()) {
            out[t] = x[anchors.back()];   // trailing run
        } else {
            const std::size_t t1 = anchors[next_anchor - 1];
            const std::size_t t2 = anchors[next_anchor];
            const double w = static_cast<double>(t - t1) / static_cast<double>(t2 - t1);
            out[t] = x[t1] + w * (x[t2] - x[t1]);
        }
    }
    return out;
}

std::vector<double> smooth_moving_average(const std::vector<double>& x, std::size_t window) {
    if (window == 0) {
        throw std::invalid_argument("smooth_moving_average: window must be >= 1");
    }
    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        const std::size_t from = t + 1 >= window ? t + 1 - window : 0;
        double sum = 0.0;
        for (std::size_t i = from; i <= t; ++i) sum += x[i];
        out[t] = sum / static_cast<double>(t - from + 1);
    }
    return out;
}

std::pair<std::vector<double>, CleanReport> make_positive(const std::vector<double>& x,
                                                          const CleanConfig& cfg) {
    CleanReport report = detect_anomalies(x, cfg);

    std::vector<std::size_t> repair_set = report.missing_indices;
    repair_set.insert(repair_set.end(), report.anomaly_indices.begin(),
                      report.anomaly_indices.end());
    std::sort(repair_set.begin(), repair_set.end());

    std::vector<double> repaired = interpolate_linear(x, repair_set);
    std::vector<double> smoothed = smooth_moving_average(repaired, cfg.smooth_window);
    return {std::move(smoothed), std::move(report)};
}

}  // namespace idealtsf
