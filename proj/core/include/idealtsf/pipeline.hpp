#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "idealtsf/attention.hpp"
#include "idealtsf/augment.hpp"
#include "idealtsf/cleaning.hpp"
#include "idealtsf/ecos.hpp"
#include "idealtsf/metrics.hpp"
#include "idealtsf/time_series.hpp"

namespace idealtsf {

/// Ablation switches for the three progressive stages.
struct StageToggles {
    bool use_neg_pretrain = true;
    bool use_pos_generation = true;
    bool use_ecos = true;
};

/// Full run specification. Serializable as one JSON document.
struct RunConfig {
    std::string data_path;
    bool csv_has_header = true;

    std::size_t lookback = 96;
    std::size_t horizon = 24;
    std::size_t batch_size = 32;
    std::size_t window_stride = 1;
    int epochs = 30;
    int pretrain_epochs = -1;  // -1 = auto: one third of epochs
    std::size_t d_model = 32;
    std::uint64_t seed = 42;

    AugConfig aug;
    CleanConfig clean;
    EcosConfig ecos;

    StageToggles toggles;
    bool ecos_in_pretrain = true;  // per-stage overrides, ANDed with use_ecos
    bool ecos_in_train = true;
    bool freeze_attention_after_pretrain = false;

    double split_train = 0.7;
    double split_val = 0.1;

    void validate() const;
    int effective_pretrain_epochs() const;
};

std::string to_json_string(const RunConfig& cfg);
RunConfig run_config_from_json_string(const std::string& text);
RunConfig run_config_from_file(const std::string& path);

struct RunReport {
    std::vector<double> pretrain_epoch_loss;
    std::vector<double> train_epoch_loss;
    MetricReport test_metrics;
    std::string checkpoint_path;
    std::string attention_path;
    std::string steps_path;
};

std::string to_json_string(const RunReport& report);

/// [0, train_end) / [train_end, val_end) / [val_end, T), chronological.
struct SplitIndices {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
};

SplitIndices chronological_split(std::size_t timesteps, double train_frac, double val_frac);

/// Contiguous sub-series over [from, to).
TimeSeries slice_series(const TimeSeries& series, std::size_t from, std::size_t to);

/// (x - mean) / std per channel with externally supplied statistics.
TimeSeries normalize_with(const TimeSeries& series, const NormStats& stats);

/// Windowed, normalized splits. Statistics come from the training rows only.
struct PreparedData {
    NormStats stats;
    WindowBatch train, val, test;
    std::size_t channels = 0;
};

PreparedData prepare_data(const TimeSeries& series, const RunConfig& cfg);

/// NaN cells (masked-out input positions) replaced by zero, matching the
/// structured-deletion encoding the model sees during pretraining.
Tensor3 zero_fill_missing(const Tensor3& inputs);

/// Per-(window, channel) positive reconstruction of the inputs.
Tensor3 positive_channel(const Tensor3& inputs, const CleanConfig& cfg);

/// Pretraining on synthesized negative samples: the negative sequence is
/// duplicated into both model channels, targets stay original. Updates go
/// through ecos_step or plain Adam depending on the toggles.
ParamSet stage_pretrain(ParamSet params, const PreparedData& data, const RunConfig& cfg,
                        std::vector<double>& epoch_losses, std::ostream* steps_jsonl);

/// Dual-channel training: channel 1 is the original (zero-filled) sequence,
/// channel 2 the positive reconstruction (or a copy when toggled off).
ParamSet stage_train(ParamSet params, const PreparedData& data, const RunConfig& cfg,
                     std::vector<double>& epoch_losses, std::ostream* steps_jsonl);

/// Test-split metrics on denormalized predictions plus the averaged
/// attention matrix (row-major lookback x lookback).
std::pair<MetricReport, std::vector<double>> evaluate(const ParamSet& params,
                                                      const PreparedData& data,
                                                      const RunConfig& cfg);

/// Full three-stage run. When out_dir is non-empty, writes report.json,
/// checkpoint.json, attention.csv and steps.jsonl there.
RunReport run(const RunConfig& cfg, const std::string& out_dir = "");

/// The six ablation rows: all-on plus the five w/o combinations.
struct AblationVariant {
    std::string name;
    StageToggles toggles;
};

std::vector<AblationVariant> ablation_variants();

/// Whole-series helpers behind the `augment` and `clean` CLI subcommands.
TimeSeries augment_series(const TimeSeries& series, const AugConfig& cfg);
std::pair<TimeSeries, std::vector<CleanReport>> clean_series(const TimeSeries& series,
                                                             const CleanConfig& cfg);

}  // namespace idealtsf
