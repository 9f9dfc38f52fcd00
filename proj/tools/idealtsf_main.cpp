// Command-line front end for the IdealTSF pipeline: run the three-stage
// training, synthesize negative samples, clean series into positive samples,
// evaluate checkpoints and sweep the ablation grid.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "idealtsf/pipeline.hpp"

namespace {

using namespace idealtsf;

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<int> pretrain_epochs;
    std::optional<std::size_t> lookback, horizon, batch_size, stride, d_model;
    std::optional<bool> use_neg, use_pos, use_ecos;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON run configuration");
    cmd->add_option("--data", args.data_path, "input CSV (one column per channel)");
    cmd->add_option("--seed", args.seed, "master seed override");
    cmd->add_option("--epochs", args.epochs, "training epochs override");
    cmd->add_option("--pretrain-epochs", args.pretrain_epochs, "pretraining epochs override");
    cmd->add_option("--lookback", args.lookback, "input window length override");
    cmd->add_option("--horizon", args.horizon, "forecast length override");
    cmd->add_option("--batch-size", args.batch_size, "batch size override");
    cmd->add_option("--stride", args.stride, "window stride override");
    cmd->add_option("--d-model", args.d_model, "embedding width override");
    cmd->add_option("--use-neg-pretrain", args.use_neg, "toggle negative-sample pretraining");
    cmd->add_option("--use-pos-generation", args.use_pos, "toggle positive-sample channel");
    cmd->add_option("--use-ecos", args.use_ecos, "toggle the ECOS optimizer");
}

RunConfig resolve_config(const CommonArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) {
        cfg = run_config_from_file(args.config_path);
    }
    if (!args.data_path.empty()) cfg.data_path = args.data_path;
    if (args.seed) cfg.seed = *args.seed;
    if (args.epochs) cfg.epochs = *args.epochs;
    if (args.pretrain_epochs) cfg.pretrain_epochs = *args.pretrain_epochs;
    if (args.lookback) cfg.lookback = *args.lookback;
    if (args.horizon) cfg.horizon = *args.horizon;
    if (args.batch_size) cfg.batch_size = *args.batch_size;
    if (args.stride) cfg.window_stride = *args.stride;
    if (args.d_model) cfg.d_model = *args.d_model;
    if (args.use_neg) cfg.toggles.use_neg_pretrain = *args.use_neg;
    if (args.use_pos) cfg.toggles.use_pos_generation = *args.use_pos;
    if (args.use_ecos) cfg.toggles.use_ecos = *args.use_ecos;
    return cfg;
}

int cmd_run(const CommonArgs& args) {
    RunConfig cfg = resolve_config(args);
    const std::string out = args.out_dir.empty() ? "out" : args.out_dir;
    const RunReport report = run(cfg, out);
    std::cout << to_json_string(report) << "\n";
    return 0;
}

int cmd_augment(const CommonArgs& args, const std::string& out_csv) {
    RunConfig cfg = resolve_config(args);
    const TimeSeries series = load_csv(cfg.data_path, cfg.csv_has_header);
    const TimeSeries negative = augment_series(series, cfg.aug);
    const std::string path = out_csv.empty() ? "negative.csv" : out_csv;
    write_csv(path, negative);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_clean(const CommonArgs& args, const std::string& out_csv, const std::string& out_report) {
    RunConfig cfg = resolve_config(args);
    const TimeSeries series = load_csv(cfg.data_path, cfg.csv_has_header);
    const auto [positive, reports] = clean_series(series, cfg.clean);

    if (!out_csv.empty()) {
        write_csv(out_csv, positive);
    }
    nlohmann::json j = nlohmann::json::array();
    for (std::size_t c = 0; c < reports.size(); ++c) {
        nlohmann::json entry = nlohmann::json::parse(to_json_string(reports[c]));
        entry["channel"] = series.channel_names[c];
        j.push_back(std::move(entry));
    }
    if (!out_report.empty()) {
        std::ofstream out(out_report);
        if (!out) throw std::runtime_error("clean: cannot open '" + out_report + "'");
        out << j.dump(2) << "\n";
    } else {
        std::cout << j.dump(2) << "\n";
    }
    return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             const std::string& out_path) {
    RunConfig cfg = resolve_config(args);
    cfg.validate();
    const TimeSeries series = load_csv(cfg.data_path, cfg.csv_has_header);
    const PreparedData data = prepare_data(series, cfg);
    const ParamSet params = load_checkpoint(checkpoint_path);
    const auto [metrics, attention] = evaluate(params, data, cfg);

    const std::string text = to_json_string(metrics);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("eval: cannot open '" + out_path + "'");
        out << text << "\n";
    }
    std::cout << text << "\n";
    return 0;
}

int cmd_ablate(const CommonArgs& args) {
    RunConfig base = resolve_config(args);

    std::cout << std::left << std::setw(16) << "config" << std::right << std::setw(12) << "mse"
              << std::setw(12) << "mae" << "\n";
    for (const auto& variant : ablation_variants()) {
        RunConfig cfg = base;
        cfg.toggles = variant.toggles;
        std::string out;
        if (!args.out_dir.empty()) {
            std::string slug = variant.name;
            for (char& ch : slug) {
                if (ch == '/' || ch == ' ' || ch == '+') ch = '_';
            }
            out = args.out_dir + "/" + slug;
        }
        const RunReport report = run(cfg, out);
        std::cout << std::left << std::setw(16) << variant.name << std::right << std::fixed
                  << std::setprecision(6) << std::setw(12) << report.test_metrics.mse
                  << std::setw(12) << report.test_metrics.mae << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"IdealTSF: three-stage time-series forecasting pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string out_csv, out_report, checkpoint_path, eval_out;

    auto* run_cmd = app.add_subcommand("run", "run the full pipeline");
    add_common_options(run_cmd, args);
    run_cmd->add_option("--out", args.out_dir, "output directory (default: out/)");

    auto* augment_cmd = app.add_subcommand("augment", "emit a negative-sample CSV");
    add_common_options(augment_cmd, args);
    augment_cmd->add_option("--out", out_csv, "output CSV path");

    auto* clean_cmd = app.add_subcommand("clean", "emit a positive-sample CSV and clean report");
    add_common_options(clean_cmd, args);
    clean_cmd->add_option("--out-csv", out_csv, "cleaned CSV path");
    clean_cmd->add_option("--out-report", out_report, "clean report JSON path");

    auto* eval_cmd = app.add_subcommand("eval", "metrics from a checkpoint");
    add_common_options(eval_cmd, args);
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
    eval_cmd->add_option("--out", eval_out, "metrics JSON path");

    auto* ablate_cmd = app.add_subcommand("ablate", "run the six ablation configurations");
    add_common_options(ablate_cmd, args);
    ablate_cmd->add_option("--out", args.out_dir, "output directory for per-config artifacts");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (run_cmd->parsed()) return cmd_run(args);
        if (augment_cmd->parsed()) return cmd_augment(args, out_csv);
        if (clean_cmd->parsed()) return cmd_clean(args, out_csv, out_report);
        if (eval_cmd->parsed()) return cmd_eval(args, checkpoint_path, eval_out);
        if (ablate_cmd->parsed()) return cmd_ablate(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
