#include "idealtsf/time_series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace idealtsf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    if (line.empty()) {
        cells.emplace_back();  // single empty cell (missing value)
        return cells;
    }
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

TimeSeries::TimeSeries(std::size_t c, std::size_t t)
    : channels(c),
      timesteps(t),
      values(c * t, 0.0),
      mask(c * t, 1),
      channel_names(c) {
    for (std::size_t i = 0; i < c; ++i) channel_names[i] = "c" + std::to_string(i);
}

void TimeSeries::set_missing(std::size_t c, std::size_t t) {
    values[c * timesteps + t] = kNaN;
    mask[c * timesteps + t] = 0;
}

void TimeSeries::validate() const {
    if (values.size() != channels * timesteps || mask.size() != values.size()) {
        throw std::invalid_argument("TimeSeries: values/mask shape mismatch");
    }
    if (channel_names.size() != channels) {
        throw std::invalid_argument("TimeSeries: channel_names size mismatch");
    }
    if (step_seconds && *step_seconds <= 0.0) {
        throw std::invalid_argument("TimeSeries: step_seconds must be positive");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const bool finite = std::isfinite(values[i]);
        if (mask[i] && !finite) {
            throw std::invalid_argument("TimeSeries: observed cell is not finite");
        }
        if (!mask[i] && !std::isnan(values[i])) {
            throw std::invalid_argument("TimeSeries: masked cell must carry NaN");
        }
    }
}

TimeSeries load_csv(const std::string& path, bool has_header,
                    const std::set<std::string>& missing_tokens) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_csv: cannot open '" + path + "'");
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> rows;     // [time][channel]
    std::vector<std::vector<std::uint8_t>> row_mask;
    std::string line;
    std::size_t line_no = 0;
    std::size_t columns = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && has_header) {
            names = split_row(line);
            columns = names.size();
            continue;
        }
        // A final empty line is trailing-newline filler, not a data row.
        if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
        auto cells = split_row(line);
        if (columns == 0) {
            columns = cells.size();
        } else if (cells.size() != columns) {
            throw std::runtime_error("load_csv: ragged row at line " + std::to_string(line_no) +
                                     " (" + std::to_string(cells.size()) + " columns, expected " +
                                     std::to_string(columns) + ")");
        }
        std::vector<double> vals(columns);
        std::vector<std::uint8_t> obs(columns, 1);
        for (std::size_t c = 0; c < columns; ++c) {
            if (missing_tokens.count(cells[c])) {
                vals[c] = kNaN;
                obs[c] = 0;
                continue;
            }
            const char* first = cells[c].data();
            const char* last = first + cells[c].size();
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
                throw std::runtime_error("load_csv: unparseable cell '" + cells[c] +
                                         "' at line " + std::to_string(line_no) + ", column " +
                                         std::to_string(c + 1));
            }
            vals[c] = v;
        }
        rows.push_back(std::move(vals));
        row_mask.push_back(std::move(obs));
    }

    if (columns == 0 || rows.empty()) {
        throw std::runtime_error("load_csv: no data rows in '" + path + "'");
    }

    TimeSeries series(columns, rows.size());
    if (has_header && names.size() == columns) series.channel_names = names;
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (std::size_t c = 0; c < columns; ++c) {
            series.at(c, t) = rows[t][c];
            series.mask[c * series.timesteps + t] = row_mask[t][c];
        }
    }
    return series;
}

void write_csv(const std::string& path, const TimeSeries& series) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("write_csv: cannot open '" + path + "'");
    }
    out.precision(17);
    for (std::size_t c = 0; c < series.channels; ++c) {
        out << series.channel_names[c] << (c + 1 < series.channels ? "," : "\n");
    }
    for (std::size_t t = 0; t < series.timesteps; ++t) {
        for (std::size_t c = 0; c < series.channels; ++c) {
            if (series.observed(c, t)) out << series.at(c, t);
            out << (c + 1 < series.channels ? "," : "\n");
        }
    }
}

std::pair<TimeSeries, NormStats> zscore_normalize(const TimeSeries& series) {
    NormStats stats;
    stats.mean.resize(series.channels);
    stats.std_dev.resize(series.channels);

    TimeSeries out = series;
    for (std::size_t c = 0; c < series.channels; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            if (series.observed(c, t)) {
                sum += series.at(c, t);
                ++n;
            }
        }
        if (n < 2) {
            throw std::invalid_argument("zscore_normalize: channel " + std::to_string(c) +
                                        " has fewer than 2 observed points");
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            if (series.observed(c, t)) {
                const double d = series.at(c, t) - mean;
                ss += d * d;
            }
        }
        const double std_dev = std::max(std::sqrt(ss / static_cast<double>(n - 1)), kStdFloor);
        stats.mean[c] = mean;
        stats.std_dev[c] = std_dev;
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            if (series.observed(c, t)) {
                out.at(c, t) = (series.at(c, t) - mean) / std_dev;
            }
        }
    }
    return {std::move(out), std::move(stats)};
}

TimeSeries denormalize(const TimeSeries& series, const NormStats& stats) {
    if (stats.mean.size() != series.channels || stats.std_dev.size() != series.channels) {
        throw std::invalid_argument("denormalize: stats do not match channel count");
    }
    TimeSeries out = series;
    for (std::size_t c = 0; c < series.channels; ++c) {
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            if (series.observed(c, t)) {
                out.at(c, t) = series.at(c, t) * stats.std_dev[c] + stats.mean[c];
            }
        }
    }
    return out;
}

Tensor3 denormalize_tensor(const Tensor3& normalized, const NormStats& stats) {
    if (stats.mean.size() != normalized.d1) {
        throw std::invalid_argument("denormalize_tensor: stats do not match channel count");
    }
    Tensor3 out = normalized;
    for (std::size_t b = 0; b < out.d0; ++b) {
        for (std::size_t c = 0; c < out.d1; ++c) {
            for (std::size_t t = 0; t < out.d2; ++t) {
                out.at(b, c, t) = normalized.at(b, c, t) * stats.std_dev[c] + stats.mean[c];
            }
        }
    }
    return out;
}

WindowBatch make_windows(const TimeSeries& series, std::size_t lookback,
                         std::size_t horizon, std::size_t stride) {
    if (lookback == 0 || horizon == 0) {
        throw std::invalid_argument("make_windows: lookback and horizon must be positive");
    }
    if (stride == 0) {
        throw std::invalid_argument("make_windows: stride must be >= 1");
    }
    const std::size_t span = lookback + horizon;
    if (series.timesteps < span) {
        throw std::invalid_argument("make_windows: series too short (T=" +
                                    std::to_string(series.timesteps) + ", need >= " +
                                    std::to_string(span) + ")");
    }
    const std::size_t count = (series.timesteps - span) / stride + 1;

    WindowBatch batch;
    batch.inputs = Tensor3(count, series.channels, lookback);
    batch.targets = Tensor3(count, series.channels, horizon);
    batch.origin_indices.resize(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = w * stride;
        batch.origin_indices[w] = start;
        for (std::size_t c = 0; c < series.channels; ++c) {
            for (std::size_t t = 0; t < lookback; ++t) {
                batch.inputs.at(w, c, t) = series.at(c, start + t);
            }
            for (std::size_t t = 0; t < horizon; ++t) {
                batch.targets.at(w, c, t) = series.at(c, start + lookback + t);
            }
        }
    }
    return batch;
}

WindowBatch drop_unobserved_target_windows(const WindowBatch& batch) {
    std::vector<std::size_t> keep;
    for (std::size_t w = 0; w < batch.size(); ++w) {
        bool ok = true;
        for (std::size_t c = 0; c < batch.channels() && ok; ++c) {
            for (std::size_t t = 0; t < batch.horizon(); ++t) {
                if (!std::isfinite(batch.targets.at(w, c, t))) {
                    ok = false;
                    break;
                }
            }
        }
        if (ok) keep.push_back(w);
    }

    WindowBatch out;
    out.inputs = Tensor3(keep.size(), batch.channels(), batch.lookback());
    out.targets = Tensor3(keep.size(), batch.channels(), batch.horizon());
    out.origin_indices.resize(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const std::size_t w = keep[i];
        out.origin_indices[i] = batch.origin_indices[w];
        for (std::size_t c = 0; c < batch.channels(); ++c) {
            for (std::size_t t = 0; t < batch.lookback(); ++t) {
                out.inputs.at(i, c, t) = batch.inputs.at(w, c, t);
            }
            for (std::size_t t = 0; t < batch.horizon(); ++t) {
                out.targets.at(i, c, t) = batch.targets.at(w, c, t);
            }
        }
    }
    return out;
}

}  // namespace idealtsf
