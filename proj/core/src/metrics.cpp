#include "idealtsf/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace idealtsf {

MetricReport metric_suite(const Tensor3& pred, const Tensor3& truth) {
    if (!pred.same_shape(truth)) {
        throw std::invalid_argument("metric_suite: shape mismatch");
    }
    if (pred.size() == 0) {
        throw std::invalid_argument("metric_suite: empty input");
    }

    const std::size_t n = pred.size();
    double se = 0.0, ae = 0.0;
    double smape_sum = 0.0;
    std::size_t smape_terms = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = pred.data[i] - truth.data[i];
        se += r * r;
        ae += std::abs(r);
        const double denom = std::abs(pred.data[i]) + std::abs(truth.data[i]);
        if (denom > 0.0) {
            smape_sum += std::abs(r) / denom;
            ++smape_terms;
        }
    }

    MetricReport report;
    report.mse = se / static_cast<double>(n);
    report.mae = ae / static_cast<double>(n);
    report.smape = smape_terms > 0 ? 200.0 * smape_sum / static_cast<double>(smape_terms) : 0.0;

    // Naive one-step scale of the truth, pooled over all (batch, channel)
    // horizon sequences.
    if (truth.d2 >= 2) {
        double diff_sum = 0.0;
        for (std::size_t b = 0; b < truth.d0; ++b) {
            for (std::size_t c = 0; c < truth.d1; ++c) {
                for (std::size_t t = 1; t < truth.d2; ++t) {
                    diff_sum += std::abs(truth.at(b, c, t) - truth.at(b, c, t - 1));
                }
            }
        }
        const double scale = diff_sum / static_cast<double>(truth.d0 * truth.d1 * (truth.d2 - 1));
        if (scale > 0.0) {
            report.mase = report.mae / scale;
        }
    }
    return report;
}

std::string to_json_string(const MetricReport& report) {
    nlohmann::json j;
    j["mse"] = report.mse;
    j["mae"] = report.mae;
    j["smape"] = report.smape;
    if (report.mase) {
        j["mase"] = *report.mase;
    } else {
        j["mase"] = nullptr;
    }
    return j.dump();
}

}  // namespace idealtsf
