#include "idealtsf/augment.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace idealtsf {

void StableParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 2.0)) {
        throw std::invalid_argument("StableParams: alpha must be in (0, 2]");
    }
    if (alpha == 1.0) {
        throw std::invalid_argument("StableParams: alpha == 1 is excluded (magnitude singularity)");
    }
    if (!(gamma > 0.0)) {
        throw std::invalid_argument("StableParams: gamma must be positive");
    }
    if (beta < -1.0 || beta > 1.0) {
        throw std::invalid_argument("StableParams: beta must be in [-1, 1]");
    }
}

void NoiseScaleSpec::validate() const {
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i].window == 0) {
            throw std::invalid_argument("NoiseScaleSpec: window must be positive");
        }
        if (scales[i].sigma < 0.0) {
            throw std::invalid_argument("NoiseScaleSpec: sigma must be non-negative");
        }
        if (i > 0) {
            if (scales[i].window <= scales[i - 1].window) {
                throw std::invalid_argument("NoiseScaleSpec: windows must be strictly increasing");
            }
            if (scales[i].sigma < scales[i - 1].sigma) {
                throw std::invalid_argument(
                    "NoiseScaleSpec: longer scales must carry larger intensities");
            }
        }
    }
}

NoiseScaleSpec make_noise_scales(double noise, int n_scales) {
    if (noise < 0.0 || n_scales < 0) {
        throw std::invalid_argument("make_noise_scales: negative argument");
    }
    NoiseScaleSpec spec;
    std::size_t w_max = 1;
    for (int i = 1; i < n_scales; ++i) w_max *= 4;
    std::size_t w = 1;
    for (int i = 0; i < n_scales; ++i) {
        spec.scales.push_back({w, noise * static_cast<double>(w) / static_cast<double>(w_max)});
        w *= 4;
    }
    return spec;
}

void DeletionSpec::validate() const {
    if (l_min == 0 || l_max == 0) {
        throw std::invalid_argument("DeletionSpec: lengths must be positive");
    }
    if (l_min > l_max) {
        throw std::invalid_argument("DeletionSpec: l_min > l_max");
    }
    if (probability < 0.0 || probability > 1.0) {
        throw std::invalid_argument("DeletionSpec: probability must be in [0, 1]");
    }
}

DeletionSpec DeletionSpec::clamped(std::size_t sequence_length) const {
    DeletionSpec out = *this;
    out.l_max = std::min(out.l_max, sequence_length);
    out.l_min = std::min(out.l_min, out.l_max);
    return out;
}

void AugConfig::validate() const {
    stable.validate();
    noise.validate();
    deletion.validate();
}

std::string to_json_string(const AugConfig& cfg) {
    nlohmann::json j;
    j["noise"] = cfg.noise.scales.empty() ? 0.0 : cfg.noise.scales.back().sigma;
    j["noise_sc"] = cfg.noise.scales.size();
    j["erase_l_min"] = cfg.deletion.l_min;
    j["erase_l_max"] = cfg.deletion.l_max;
    j["erase_p"] = cfg.deletion.probability;
    j["alpha"] = cfg.stable.alpha;
    j["gamma"] = cfg.stable.gamma;
    j["seed"] = cfg.seed;
    return j.dump();
}

AugConfig aug_config_from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    AugConfig cfg;
    cfg.noise = make_noise_scales(j.value("noise", 0.03), j.value("noise_sc", 3));
    cfg.deletion.l_min = j.value("erase_l_min", std::size_t{4});
    cfg.deletion.l_max = j.value("erase_l_max", std::size_t{300});
    cfg.deletion.probability = j.value("erase_p", 0.3);
    cfg.stable.alpha = j.value("alpha", 1.5);
    cfg.stable.gamma = j.value("gamma", 0.05);
    cfg.seed = j.value("seed", std::uint64_t{42});
    cfg.validate();
    return cfg;
}

double increment_magnitude(const StableParams& params) {
    params.validate();
    const double base =
        (params.gamma / 2.0) * std::abs(std::tgamma(params.alpha)) / std::abs(1.0 - params.alpha);
    return std::pow(base, 1.0 / params.alpha);
}

double increment_from_angle(const StableParams& params, double theta) {
    return increment_magnitude(params) * std::cos(theta);
}

double sample_increment(const StableParams& params, RngStream& rng) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    return increment_from_angle(params, theta);
}

std::vector<double> apply_jumps(const std::vector<double>& x, const StableParams& params,
                                RngStream& rng) {
    params.validate();
    const double r = increment_magnitude(params);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
        out[i] = x[i] + r * std::cos(theta);
    }
    return out;
}

std::vector<double> apply_multiscale_noise(const std::vector<double>& x,
                                           const NoiseScaleSpec& spec, RngStream& rng) {
    spec.validate();
    const std::size_t n = x.size();
    for (const auto& scale : spec.scales) {
        if (scale.window > n) {
            throw std::invalid_argument("apply_multiscale_noise: window " +
                                        std::to_string(scale.window) +
                                        " exceeds sequence length " + std::to_string(n));
        }
    }

    std::vector<double> out = x;
    std::vector<double> draws(n);
    for (const auto& scale : spec.scales) {
        for (std::size_t t = 0; t < n; ++t) {
            draws[t] = rng.gaussian(0.0, scale.sigma);
        }
        // Trailing moving average, prefix-truncated at the left edge so the
        // output length matches the input.
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t from = t + 1 >= scale.window ? t + 1 - scale.window : 0;
            double sum = 0.0;
            for (std::size_t i = from; i <= t; ++i) sum += draws[i];
            out[t] += sum / static_cast<double>(t - from + 1);
        }
    }
    return out;
}

std::pair<std::vector<double>, std::optional<DeletionRange>> apply_structured_deletion(
    const std::vector<double>& x, const DeletionSpec& spec, RngStream& rng) {
    spec.validate();
    if (spec.l_max > x.size()) {
        throw std::invalid_argument("apply_structured_deletion: l_max exceeds sequence length");
    }

    const double u = rng.uniform01();
    if (u >= spec.probability) {
        return {x, std::nullopt};
    }
    const std::size_t length = rng.uniform_int(spec.l_min, spec.l_max);
    const std::size_t start = rng.uniform_int(0, x.size() - length);

    std::vector<double> out = x;
    for (std::size_t t = start; t < start + length; ++t) out[t] = 0.0;
    return {std::move(out), DeletionRange{start, start + length - 1}};
}

WindowBatch make_negative_batch(const WindowBatch& batch, const AugConfig& cfg) {
    cfg.validate();
    const std::size_t lookback = batch.lookback();
    const DeletionSpec deletion = cfg.deletion.clamped(lookback);

    WindowBatch out = batch;
    std::vector<double> seq(lookback);
    for (std::size_t w = 0; w < batch.size(); ++w) {
        for (std::size_t c = 0; c < batch.channels(); ++c) {
            RngStream rng(derive_stream_seed(cfg.seed, w, c));
            for (std::size_t t = 0; t < lookback; ++t) seq[t] = batch.inputs.at(w, c, t);
            seq = apply_jumps(seq, cfg.stable, rng);
            seq = apply_multiscale_noise(seq, cfg.noise, rng);
            auto [deleted, range] = apply_structured_deletion(seq, deletion, rng);
            for (std::size_t t = 0; t < lookback; ++t) out.inputs.at(w, c, t) = deleted[t];
        }
    }
    return out;
}

}  // namespace idealtsf
