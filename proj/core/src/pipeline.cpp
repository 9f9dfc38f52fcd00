#include "idealtsf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "idealtsf/rng.hpp"
#include "json.hpp"

namespace idealtsf {

namespace {

// Stream tags for deriving independent per-purpose seeds from the run seed.
constexpr std::uint64_t kSeedInit = 1;
constexpr std::uint64_t kSeedPretrainShuffle = 2;
constexpr std::uint64_t kSeedTrainShuffle = 3;
constexpr std::uint64_t kSeedAugEpoch = 4;

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    RngStream rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_int(0, i - 1);
        std::swap(idx[i - 1], idx[j]);
    }
    return idx;
}

Tensor3 gather_windows(const Tensor3& src, const std::vector<std::size_t>& which) {
    Tensor3 out(which.size(), src.d1, src.d2);
    for (std::size_t i = 0; i < which.size(); ++i) {
        const std::size_t w = which[i];
        for (std::size_t c = 0; c < src.d1; ++c) {
            for (std::size_t t = 0; t < src.d2; ++t) {
                out.at(i, c, t) = src.at(w, c, t);
            }
        }
    }
    return out;
}

/// Zeroes the gradients of selected tensors so the wrapped problem trains
/// with those parameters held fixed.
class GradMaskProblem final : public BatchProblem {
public:
    GradMaskProblem(const BatchProblem& inner, std::vector<std::string> frozen)
        : inner_(inner), frozen_(std::move(frozen)) {}

    EvalResult eval(const ParamSet& params) const override { return mask(inner_.eval(params)); }
    EvalResult eval_at(const ParamSet& params, const Tensor3& x) const override {
        return mask(inner_.eval_at(params, x));
    }
    Tensor3 input_grad(const ParamSet& params, const Tensor3& x) const override {
        return inner_.input_grad(params, x);
    }
    const Tensor3& clean_input() const override { return inner_.clean_input(); }

private:
    EvalResult mask(EvalResult eval) const {
        for (const auto& name : frozen_) {
            auto it = eval.grads.find(name);
            if (it != eval.grads.end()) {
                std::fill(it->second.data.begin(), it->second.data.end(), 0.0);
            }
        }
        return eval;
    }

    const BatchProblem& inner_;
    std::vector<std::string> frozen_;
};

struct StageData {
    Tensor3 z_orig;
    Tensor3 z_aug;
    Tensor3 targets;
};

/// Runs one epoch over shuffled batches; returns the window-weighted mean
/// clean loss.
double run_epoch(ParamSet& params, const StageData& data, const RunConfig& cfg, bool with_ecos,
                 bool freeze_attention, std::uint64_t shuffle_seed, EcosState& state,
                 std::ostream* steps_jsonl) {
    const std::size_t n = data.z_orig.d0;
    const auto order = shuffled_indices(n, shuffle_seed);

    double loss_sum = 0.0;
    std::size_t window_sum = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t stop = std::min(start + cfg.batch_size, n);
        const std::vector<std::size_t> slice(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(stop));
        AttentionBatchProblem problem(gather_windows(data.z_orig, slice),
                                      gather_windows(data.z_aug, slice),
                                      gather_windows(data.targets, slice));
        const GradMaskProblem frozen(problem, {"W_q", "W_k"});
        const BatchProblem& active = freeze_attention
                                         ? static_cast<const BatchProblem&>(frozen)
                                         : static_cast<const BatchProblem&>(problem);

        double batch_loss = 0.0;
        if (with_ecos) {
            auto [updated, diag] = ecos_step(params, active, cfg.ecos, state);
            params = std::move(updated);
            batch_loss = std::isfinite(diag.loss_clean) ? diag.loss_clean : 0.0;
            if (steps_jsonl) *steps_jsonl << to_json_string(diag) << "\n";
        } else {
            EvalResult eval = active.eval(params);
            batch_loss = eval.loss;
            params = adam_step(params, eval.grads, state, cfg.ecos.lr);
        }
        loss_sum += batch_loss * static_cast<double>(slice.size());
        window_sum += slice.size();
    }
    return window_sum > 0 ? loss_sum / static_cast<double>(window_sum) : 0.0;
}

}  // namespace

void RunConfig::validate() const {
    if (data_path.empty()) {
        throw std::invalid_argument("RunConfig: data path is empty");
    }
    if (lookback == 0 || horizon == 0 || batch_size == 0 || window_stride == 0 || d_model == 0) {
        throw std::invalid_argument("RunConfig: dimensions must be positive");
    }
    if (epochs < 0 || pretrain_epochs < -1) {
        throw std::invalid_argument("RunConfig: epoch counts must be non-negative");
    }
    if (split_train <= 0.0 || split_val < 0.0 || split_train + split_val >= 1.0) {
        throw std::invalid_argument("RunConfig: invalid split fractions");
    }
    aug.validate();
    clean.validate();
    ecos.validate();
}

int RunConfig::effective_pretrain_epochs() const {
    if (pretrain_epochs >= 0) return pretrain_epochs;
    return epochs / 3;
}

std::string to_json_string(const RunConfig& cfg) {
    nlohmann::json j;
    j["data"] = cfg.data_path;
    j["has_header"] = cfg.csv_has_header;
    j["lookback"] = cfg.lookback;
    j["horizon"] = cfg.horizon;
    j["batch_size"] = cfg.batch_size;
    j["stride"] = cfg.window_stride;
    j["epochs"] = cfg.epochs;
    j["pretrain_epochs"] = cfg.pretrain_epochs;
    j["d_model"] = cfg.d_model;
    j["seed"] = cfg.seed;
    j["use_neg_pretrain"] = cfg.toggles.use_neg_pretrain;
    j["use_pos_generation"] = cfg.toggles.use_pos_generation;
    j["use_ecos"] = cfg.toggles.use_ecos;
    j["ecos_in_pretrain"] = cfg.ecos_in_pretrain;
    j["ecos_in_train"] = cfg.ecos_in_train;
    j["freeze_attention_after_pretrain"] = cfg.freeze_attention_after_pretrain;
    j["split_train"] = cfg.split_train;
    j["split_val"] = cfg.split_val;
    j["aug"] = nlohmann::json::parse(to_json_string(cfg.aug));
    j["clean"] = {{"z_threshold", cfg.clean.z_threshold},
                  {"iqr_factor", cfg.clean.iqr_factor},
                  {"smooth_window", cfg.clean.smooth_window}};
    j["ecos"] = {{"rho", cfg.ecos.rho},
                 {"steps", cfg.ecos.n_steps},
                 {"lr", cfg.ecos.lr},
                 {"epsilon", cfg.ecos.epsilon},
                 {"fgsm_alpha", cfg.ecos.fgsm_alpha},
                 {"attack", to_string(cfg.ecos.attack)},
                 {"pgd_iters", cfg.ecos.pgd_iters},
                 {"base", to_string(cfg.ecos.base)}};
    return j.dump(2);
}

RunConfig run_config_from_json_string(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    RunConfig cfg;
    cfg.data_path = j.value("data", std::string{});
    cfg.csv_has_header = j.value("has_header", true);
    cfg.lookback = j.value("lookback", std::size_t{96});
    cfg.horizon = j.value("horizon", std::size_t{24});
    cfg.batch_size = j.value("batch_size", std::size_t{32});
    cfg.window_stride = j.value("stride", std::size_t{1});
    cfg.epochs = j.value("epochs", 30);
    cfg.pretrain_epochs = j.value("pretrain_epochs", -1);
    cfg.d_model = j.value("d_model", std::size_t{32});
    cfg.seed = j.value("seed", std::uint64_t{42});
    cfg.toggles.use_neg_pretrain = j.value("use_neg_pretrain", true);
    cfg.toggles.use_pos_generation = j.value("use_pos_generation", true);
    cfg.toggles.use_ecos = j.value("use_ecos", true);
    cfg.ecos_in_pretrain = j.value("ecos_in_pretrain", true);
    cfg.ecos_in_train = j.value("ecos_in_train", true);
    cfg.freeze_attention_after_pretrain = j.value("freeze_attention_after_pretrain", false);
    cfg.split_train = j.value("split_train", 0.7);
    cfg.split_val = j.value("split_val", 0.1);
    if (j.contains("aug")) {
        cfg.aug = aug_config_from_json_string(j.at("aug").dump());
    }
    if (j.contains("clean")) {
        const auto& c = j.at("clean");
        cfg.clean.z_threshold = c.value("z_threshold", 3.0);
        cfg.clean.iqr_factor = c.value("iqr_factor", 1.5);
        cfg.clean.smooth_window = c.value("smooth_window", std::size_t{5});
    }
    if (j.contains("ecos")) {
        const auto& e = j.at("ecos");
        cfg.ecos.rho = e.value("rho", 0.1);
        cfg.ecos.n_steps = e.value("steps", 3);
        cfg.ecos.lr = e.value("lr", 1e-3);
        cfg.ecos.epsilon = e.value("epsilon", 0.1);
        cfg.ecos.attack = attack_from_string(e.value("attack", std::string("pgd")));
        cfg.ecos.pgd_iters = e.value("pgd_iters", 3);
        cfg.ecos.base = base_from_string(e.value("base", std::string("adam")));
        if (e.contains("fgsm_alpha")) {
            cfg.ecos.fgsm_alpha = e.at("fgsm_alpha").get<double>();
        } else {
            // Hyperparameter-table style: "pgd" is the step as a fraction of
            // epsilon.
            cfg.ecos.fgsm_alpha = e.value("pgd", 0.5) * cfg.ecos.epsilon;
        }
    }
    return cfg;
}

RunConfig run_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("run_config_from_file: cannot open '" + path + "'");
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    return run_config_from_json_string(buffer.str());
}

std::string to_json_string(const RunReport& report) {
    nlohmann::json j;
    j["pretrain_epoch_loss"] = report.pretrain_epoch_loss;
    j["train_epoch_loss"] = report.train_epoch_loss;
    j["test_metrics"] = nlohmann::json::parse(to_json_string(report.test_metrics));
    j["checkpoint"] = report.checkpoint_path;
    j["attention"] = report.attention_path;
    j["steps"] = report.steps_path;
    return j.dump(2);
}

SplitIndices chronological_split(std::size_t timesteps, double train_frac, double val_frac) {
    SplitIndices split;
    split.train_end = static_cast<std::size_t>(std::floor(static_cast<double>(timesteps) * train_frac));
    split.val_end =
        split.train_end + static_cast<std::size_t>(std::floor(static_cast<double>(timesteps) * val_frac));
    return split;
}

TimeSeries slice_series(const TimeSeries& series, std::size_t from, std::size_t to) {
    if (from >= to || to > series.timesteps) {
        throw std::invalid_argument("slice_series: invalid range");
    }
    TimeSeries out(series.channels, to - from);
    out.channel_names = series.channel_names;
    out.step_seconds = series.step_seconds;
    for (std::size_t c = 0; c < series.channels; ++c) {
        for (std::size_t t = from; t < to; ++t) {
            out.at(c, t - from) = series.at(c, t);
            out.mask[c * out.timesteps + (t - from)] = series.mask[c * series.timesteps + t];
        }
    }
    return out;
}

TimeSeries normalize_with(const TimeSeries& series, const NormStats& stats) {
    if (stats.mean.size() != series.channels) {
        throw std::invalid_argument("normalize_with: stats do not match channel count");
    }
    TimeSeries out = series;
    for (std::size_t c = 0; c < series.channels; ++c) {
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            if (series.observed(c, t)) {
                out.at(c, t) = (series.at(c, t) - stats.mean[c]) / stats.std_dev[c];
            }
        }
    }
    return out;
}

PreparedData prepare_data(const TimeSeries& series, const RunConfig& cfg) {
    series.validate();
    const auto split = chronological_split(series.timesteps, cfg.split_train, cfg.split_val);
    const std::size_t span = cfg.lookback + cfg.horizon;
    if (split.train_end < span || series.timesteps - split.val_end < span) {
        throw std::invalid_argument("prepare_data: splits too short for lookback + horizon");
    }

    // Statistics from the training rows only; applied everywhere.
    const TimeSeries train_slice = slice_series(series, 0, split.train_end);
    const auto [train_norm, stats] = zscore_normalize(train_slice);

    PreparedData data;
    data.stats = stats;
    data.channels = series.channels;
    data.train = drop_unobserved_target_windows(
        make_windows(train_norm, cfg.lookback, cfg.horizon, cfg.window_stride));
    if (split.val_end - split.train_end >= span) {
        const TimeSeries val_norm =
            normalize_with(slice_series(series, split.train_end, split.val_end), stats);
        data.val = drop_unobserved_target_windows(
            make_windows(val_norm, cfg.lookback, cfg.horizon, cfg.window_stride));
    }
    const TimeSeries test_norm =
        normalize_with(slice_series(series, split.val_end, series.timesteps), stats);
    data.test = drop_unobserved_target_windows(
        make_windows(test_norm, cfg.lookback, cfg.horizon, cfg.window_stride));

    if (data.train.size() == 0) {
        throw std::invalid_argument("prepare_data: no usable training windows");
    }
    return data;
}

Tensor3 zero_fill_missing(const Tensor3& inputs) {
    Tensor3 out = inputs;
    for (double& v : out.data) {
        if (!std::isfinite(v)) v = 0.0;
    }
    return out;
}

Tensor3 positive_channel(const Tensor3& inputs, const CleanConfig& cfg) {
    Tensor3 out(inputs.d0, inputs.d1, inputs.d2);
    std::vector<double> seq(inputs.d2);
    for (std::size_t w = 0; w < inputs.d0; ++w) {
        for (std::size_t c = 0; c < inputs.d1; ++c) {
            for (std::size_t t = 0; t < inputs.d2; ++t) seq[t] = inputs.at(w, c, t);
            auto [cleaned, report] = make_positive(seq, cfg);
            for (std::size_t t = 0; t < inputs.d2; ++t) out.at(w, c, t) = cleaned[t];
        }
    }
    return out;
}

ParamSet stage_pretrain(ParamSet params, const PreparedData& data, const RunConfig& cfg,
                        std::vector<double>& epoch_losses, std::ostream* steps_jsonl) {
    const int epochs = cfg.effective_pretrain_epochs();
    const bool with_ecos = cfg.toggles.use_ecos && cfg.ecos_in_pretrain;

    // Negatives are synthesized from the zero-filled originals.
    WindowBatch base = data.train;
    base.inputs = zero_fill_missing(base.inputs);

    EcosState state;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        AugConfig aug = cfg.aug;
        aug.seed = derive_stream_seed(cfg.aug.seed, kSeedAugEpoch, static_cast<std::uint64_t>(epoch));
        const WindowBatch negatives = make_negative_batch(base, aug);

        StageData stage;
        stage.z_orig = negatives.inputs;
        stage.z_aug = negatives.inputs;  // duplicated into both channels
        stage.targets = negatives.targets;

        const std::uint64_t shuffle_seed =
            derive_stream_seed(cfg.seed, kSeedPretrainShuffle, static_cast<std::uint64_t>(epoch));
        epoch_losses.push_back(
            run_epoch(params, stage, cfg, with_ecos, false, shuffle_seed, state, steps_jsonl));
    }
    return params;
}

ParamSet stage_train(ParamSet params, const PreparedData& data, const RunConfig& cfg,
                     std::vector<double>& epoch_losses, std::ostream* steps_jsonl) {
    const bool with_ecos = cfg.toggles.use_ecos && cfg.ecos_in_train;

    StageData stage;
    stage.z_orig = zero_fill_missing(data.train.inputs);
    stage.z_aug = cfg.toggles.use_pos_generation ? positive_channel(data.train.inputs, cfg.clean)
                                                 : stage.z_orig;
    stage.targets = data.train.targets;

    EcosState state;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::uint64_t shuffle_seed =
            derive_stream_seed(cfg.seed, kSeedTrainShuffle, static_cast<std::uint64_t>(epoch));
        epoch_losses.push_back(run_epoch(params, stage, cfg, with_ecos,
                                         cfg.freeze_attention_after_pretrain, shuffle_seed, state,
                                         steps_jsonl));
    }
    return params;
}

std::pair<MetricReport, std::vector<double>> evaluate(const ParamSet& params,
                                                      const PreparedData& data,
                                                      const RunConfig& cfg) {
    if (data.test.size() == 0) {
        throw std::invalid_argument("evaluate: test split is empty");
    }

    const Tensor3 z_orig = zero_fill_missing(data.test.inputs);
    const Tensor3 z_aug = cfg.toggles.use_pos_generation
                              ? positive_channel(data.test.inputs, cfg.clean)
                              : z_orig;

    const std::size_t n = data.test.size();
    Tensor3 pred(n, data.test.channels(), data.test.horizon());
    std::vector<double> attention(cfg.lookback * cfg.lookback, 0.0);
    std::size_t pair_total = 0;

    std::vector<std::size_t> slice;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
        const std::size_t stop = std::min(start + cfg.batch_size, n);
        slice.resize(stop - start);
        std::iota(slice.begin(), slice.end(), start);

        auto [batch_pred, trace] =
            forward(params, gather_windows(z_orig, slice), gather_windows(z_aug, slice));
        for (std::size_t i = 0; i < slice.size(); ++i) {
            for (std::size_t c = 0; c < pred.d1; ++c) {
                for (std::size_t t = 0; t < pred.d2; ++t) {
                    pred.at(slice[i], c, t) = batch_pred.at(i, c, t);
                }
            }
        }
        const auto dump = dump_attention(trace);
        const std::size_t pairs = trace.pairs();
        for (std::size_t i = 0; i < dump.size(); ++i) {
            attention[i] += dump[i] * static_cast<double>(pairs);
        }
        pair_total += pairs;
    }
    for (double& v : attention) v /= static_cast<double>(pair_total);

    const Tensor3 pred_denorm = denormalize_tensor(pred, data.stats);
    const Tensor3 truth_denorm = denormalize_tensor(data.test.targets, data.stats);
    return {metric_suite(pred_denorm, truth_denorm), std::move(attention)};
}

RunReport run(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();

    RunReport report;
    std::ofstream steps_file;
    std::ostream* steps = nullptr;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        report.checkpoint_path = out_dir + "/checkpoint.json";
        report.attention_path = out_dir + "/attention.csv";
        report.steps_path = out_dir + "/steps.jsonl";
        steps_file.open(report.steps_path);
        if (!steps_file) {
            throw std::runtime_error("run: cannot open '" + report.steps_path + "'");
        }
        steps = &steps_file;
    }

    TimeSeries series;
    PreparedData data;
    try {
        series = load_csv(cfg.data_path, cfg.csv_has_header);
        data = prepare_data(series, cfg);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("data preparation: ") + e.what());
    }

    ModelConfig model{cfg.lookback, cfg.horizon, cfg.d_model, data.channels};
    ParamSet params = init_params(model, derive_stream_seed(cfg.seed, kSeedInit, 0));

    if (cfg.toggles.use_neg_pretrain) {
        try {
            params = stage_pretrain(std::move(params), data, cfg, report.pretrain_epoch_loss, steps);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string("stage_pretrain: ") + e.what());
        }
    }
    try {
        params = stage_train(std::move(params), data, cfg, report.train_epoch_loss, steps);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("stage_train: ") + e.what());
    }

    std::vector<double> attention;
    try {
        auto [metrics, attn] = evaluate(params, data, cfg);
        report.test_metrics = metrics;
        attention = std::move(attn);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("evaluate: ") + e.what());
    }

    if (!out_dir.empty()) {
        save_checkpoint(report.checkpoint_path, params);
        write_attention_csv(report.attention_path, attention, cfg.lookback);
        std::ofstream report_file(out_dir + "/report.json");
        if (!report_file) {
            throw std::runtime_error("run: cannot open '" + out_dir + "/report.json'");
        }
        report_file << to_json_string(report) << "\n";
    }
    return report;
}

std::vector<AblationVariant> ablation_variants() {
    return {
        {"IdealTSF", {true, true, true}},
        {"w/o Neg", {false, true, true}},
        {"w/o Pos", {true, false, true}},
        {"w/o ECOS", {true, true, false}},
        {"w/o Pos+ECOS", {true, false, false}},
        {"w/o Neg+ECOS", {false, true, false}},
    };
}

TimeSeries augment_series(const TimeSeries& series, const AugConfig& cfg) {
    cfg.validate();
    const DeletionSpec deletion = cfg.deletion.clamped(series.timesteps);

    TimeSeries out(series.channels, series.timesteps);
    out.channel_names = series.channel_names;
    out.step_seconds = series.step_seconds;

    std::vector<double> seq(series.timesteps);
    for (std::size_t c = 0; c < series.channels; ++c) {
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            seq[t] = series.observed(c, t) ? series.at(c, t) : 0.0;
        }
        RngStream rng(derive_stream_seed(cfg.seed, 0, c));
        seq = apply_jumps(seq, cfg.stable, rng);
        seq = apply_multiscale_noise(seq, cfg.noise, rng);
        auto [deleted, range] = apply_structured_deletion(seq, deletion, rng);
        for (std::size_t t = 0; t < series.timesteps; ++t) out.at(c, t) = deleted[t];
    }
    return out;
}

std::pair<TimeSeries, std::vector<CleanReport>> clean_series(const TimeSeries& series,
                                                             const CleanConfig& cfg) {
    TimeSeries out(series.channels, series.timesteps);
    out.channel_names = series.channel_names;
    out.step_seconds = series.step_seconds;

    std::vector<CleanReport> reports;
    std::vector<double> seq(series.timesteps);
    for (std::size_t c = 0; c < series.channels; ++c) {
        for (std::size_t t = 0; t < series.timesteps; ++t) {
            seq[t] = series.at(c, t);  // NaN marks missing
        }
        auto [cleaned, report] = make_positive(seq, cfg);
        for (std::size_t t = 0; t < series.timesteps; ++t) out.at(c, t) = cleaned[t];
        reports.push_back(std::move(report));
    }
    return {std::move(out), std::move(reports)};
}

}  // namespace idealtsf
