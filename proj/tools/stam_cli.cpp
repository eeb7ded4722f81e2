#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stam/errors.hpp"
#include "stam/experiment.hpp"
#include "stam/grad_check.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitCheckFailed = 4;

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<uint64_t> seed;
    std::optional<int> layers;
    std::optional<std::string> init;
    std::optional<int> clips;
    std::optional<std::string> lambda_list;
    std::optional<int> epochs;
    std::optional<std::string> baseline;
    std::string layer_counts = "0,1,2";
    std::string seeds = "7,8,9";
    std::string sample_ids;
    int trace_samples = 8;
    int draws = 200000;
    double fd_step = stam::GradCheckOptions{}.step;
    double fd_tolerance = 1e-4;
    int fd_samples = 0;
};

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t comma = text.find(',', pos);
        std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
        try {
            size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw stam::ConfigError("cannot parse '" + item + "' in list '" + text + "'");
        }
        if (comma == std::string::npos) {
            break;
        }
        pos = comma + 1;
    }
    return values;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> values;
    for (double v : parse_double_list(text)) {
        int i = static_cast<int>(v);
        if (static_cast<double>(i) != v) {
            throw stam::ConfigError("expected integers in list '" + text + "'");
        }
        values.push_back(i);
    }
    return values;
}

std::vector<uint64_t> parse_u64_list(const std::string& text) {
    std::vector<uint64_t> values;
    for (int v : parse_int_list(text)) {
        if (v < 0) {
            throw stam::ConfigError("expected nonnegative seeds in list '" + text + "'");
        }
        values.push_back(static_cast<uint64_t>(v));
    }
    return values;
}

stam::ExperimentConfig build_config(const CliOptions& options) {
    stam::ExperimentConfig config;
    if (!options.config_path.empty()) {
        config = stam::load_config(options.config_path);
    }
    if (options.seed) {
        config.train.seed = *options.seed;
    }
    if (options.layers) {
        config.model.layers = *options.layers;
    }
    if (options.init) {
        config.model.init = stam::parse_init_kind(*options.init);
    }
    if (options.clips) {
        config.task.clip_count = *options.clips;
    }
    if (options.lambda_list) {
        config.train.lambdas = parse_double_list(*options.lambda_list);
    }
    if (options.epochs) {
        config.train.epochs = *options.epochs;
    }
    if (options.baseline) {
        config.baseline = stam::parse_baseline(*options.baseline);
    }
    return config;
}

fs::path ensure_out_dir(const CliOptions& options) {
    fs::path dir(options.out_dir);
    fs::create_directories(dir);
    return dir;
}

void print_report(const stam::RunReport& report) {
    std::printf("run %s variant=%s init=%s layers=%d seed=%llu\n", report.config_hash.c_str(),
                report.variant.c_str(), report.init.c_str(), report.layers,
                static_cast<unsigned long long>(report.seed));
    std::printf("  test accuracy %.4f\n", report.test_accuracy);
    for (size_t h = 0; h < report.head_accuracy.size(); ++h) {
        std::printf("  head %zu accuracy %.4f\n", h, report.head_accuracy[h]);
    }
    for (size_t w = 0; w < report.weight_stages.size(); ++w) {
        std::printf("  layer %d signal mass %.4f entropy %.4f\n", report.weight_stages[w],
                    report.attention_mass_mean[w], report.attention_entropy_mean[w]);
    }
    if (!report.epoch_loss.empty()) {
        std::printf("  loss %.6f -> %.6f over %zu epochs\n", report.epoch_loss.front(),
                    report.epoch_loss.back(), report.epoch_loss.size());
    }
    std::printf("  wall %.2f s\n", report.wall_seconds);
}

int cmd_train(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    stam::NeedleDataset dataset = stam::generate(config.task);
    stam::TrainResult result = stam::train_model(config, dataset);
    stam::write_metrics_csv((out / "metrics.csv").string(), {result.report});
    print_report(result.report);
    std::printf("wrote %s\n", (out / "metrics.csv").string().c_str());
    return 0;
}

int cmd_sweep_layers(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    std::vector<int> layer_counts = parse_int_list(options.layer_counts);
    std::vector<uint64_t> seeds = parse_u64_list(options.seeds);
    stam::NeedleDataset dataset = stam::generate(config.task);
    std::vector<stam::RunReport> reports =
        stam::sweep_layers(config, layer_counts, seeds, dataset);
    stam::write_metrics_csv((out / "metrics.csv").string(), reports);
    size_t row = 0;
    for (int layers : layer_counts) {
        std::vector<double> accs;
        for (size_t s = 0; s < seeds.size(); ++s) {
            accs.push_back(reports[row++].test_accuracy);
        }
        std::sort(accs.begin(), accs.end());
        double median = accs.size() % 2 == 1
                            ? accs[accs.size() / 2]
                            : 0.5 * (accs[accs.size() / 2 - 1] + accs[accs.size() / 2]);
        std::printf("layers %d: median accuracy %.4f over %zu seeds\n", layers, median,
                    seeds.size());
    }
    std::printf("wrote %s\n", (out / "metrics.csv").string().c_str());
    return 0;
}

int cmd_compare_baselines(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    std::vector<uint64_t> seeds = parse_u64_list(options.seeds);
    stam::NeedleDataset dataset = stam::generate(config.task);
    std::vector<stam::RunReport> reports;
    for (stam::BaselineKind kind : {stam::BaselineKind::None, stam::BaselineKind::VanillaStack,
                                    stam::BaselineKind::AvgConsensus}) {
        std::vector<double> accs;
        for (uint64_t seed : seeds) {
            stam::ExperimentConfig run = config;
            run.baseline = kind;
            run.train.seed = seed;
            reports.push_back(stam::train_model(run, dataset).report);
            accs.push_back(reports.back().test_accuracy);
        }
        std::sort(accs.begin(), accs.end());
        double median = accs.size() % 2 == 1
                            ? accs[accs.size() / 2]
                            : 0.5 * (accs[accs.size() / 2 - 1] + accs[accs.size() / 2]);
        std::printf("%s: median accuracy %.4f over %zu seeds\n",
                    kind == stam::BaselineKind::None ? "stam" : stam::baseline_name(kind).c_str(),
                    median, seeds.size());
    }
    stam::write_metrics_csv((out / "metrics.csv").string(), reports);
    std::printf("wrote %s\n", (out / "metrics.csv").string().c_str());
    return 0;
}

int cmd_export_trace(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    stam::NeedleDataset dataset = stam::generate(config.task);
    stam::TrainResult result = stam::train_model(config, dataset);
    std::vector<int> ids;
    if (!options.sample_ids.empty()) {
        ids = parse_int_list(options.sample_ids);
    } else {
        int count = std::min<int>(options.trace_samples, dataset.test.size());
        for (int i = 0; i < count; ++i) {
            ids.push_back(i);
        }
    }
    nlohmann::ordered_json trace = stam::attention_trace_json(*result.model, dataset, ids);
    stam::write_text_file((out / "trace.json").string(), trace.dump(2) + "\n");
    stam::write_metrics_csv((out / "metrics.csv").string(), {result.report});
    print_report(result.report);
    std::printf("wrote %s with %zu samples\n", (out / "trace.json").string().c_str(), ids.size());
    return 0;
}

int cmd_check_grads(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    stam::NeedleTaskSpec probe_task = config.task;
    probe_task.train_size = 1;
    probe_task.test_size = 0;
    stam::NeedleDataset dataset = stam::generate(probe_task);
    stam::SplitRng run_rng(config.train.seed);
    std::unique_ptr<stam::Model> model = stam::make_model(config, run_rng.split("params"));
    std::vector<double> lambdas(model->stages(), 1.0);
    if (!config.train.lambdas.empty()) {
        lambdas = config.train.lambdas;
    }
    stam::Tensor clips = stam::clips_tensor(dataset.train[0], probe_task);
    int label = dataset.train[0].label;
    auto build_loss = [&]() {
        return stam::model_loss(model->forward(clips), label, lambdas);
    };
    stam::GradCheckOptions gc;
    gc.step = options.fd_step;
    gc.tolerance = options.fd_tolerance;
    gc.max_entries_per_tensor = options.fd_samples;
    stam::GradCheckReport report = stam::check_gradients(model->params(), build_loss, gc);
    std::printf("checked %d entries across %d tensors\n", report.entries_checked,
                model->params().tensor_count());
    std::printf("max relative error %.3e at %s[%d] (analytic %.6e, numeric %.6e)\n",
                report.max_rel_error, report.worst_parameter.c_str(), report.worst_index,
                report.worst_analytic, report.worst_numeric);
    if (!report.passed) {
        std::printf("FAIL: tolerance %.1e exceeded\n", gc.tolerance);
        return kExitCheckFailed;
    }
    std::printf("PASS: within tolerance %.1e\n", gc.tolerance);
    return 0;
}

int cmd_gen_data(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    stam::NeedleDataset dataset = stam::generate(config.task);
    fs::path path = out / "dataset.stamds";
    stam::save_dataset(dataset, path.string());
    std::printf("wrote %s: %d train, %d test, %d classes, %d clips x %d features\n",
                path.string().c_str(), config.task.train_size, config.task.test_size,
                config.task.num_classes, config.task.clip_count, config.task.feature_dim);
    return 0;
}

int cmd_oracle(const CliOptions& options) {
    stam::ExperimentConfig config = build_config(options);
    fs::path out = ensure_out_dir(options);
    double signal = stam::oracle_signal_accuracy(config.task, options.draws);
    double avg = stam::oracle_avg_accuracy(config.task, options.draws);
    double masked = stam::oracle_masked_avg_accuracy(config.task, options.draws);
    nlohmann::ordered_json calibration;
    calibration["draws"] = options.draws;
    calibration["oracle_signal_accuracy"] = signal;
    calibration["oracle_avg_accuracy"] = avg;
    calibration["oracle_masked_avg_accuracy"] = masked;
    calibration["oracle_gap"] = signal - avg;
    stam::write_text_file((out / "calibration.json").string(), calibration.dump(2) + "\n");
    std::printf("oracle accuracy: signal %.4f, avg %.4f, masked avg %.4f, gap %.4f\n", signal,
                avg, masked, signal - avg);
    std::printf("wrote %s\n", (out / "calibration.json").string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stacked temporal attention: synthetic training and analysis"};
    app.require_subcommand(1);

    CliOptions options;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", options.config_path, "JSON experiment config");
        cmd->add_option("--out", options.out_dir, "output directory");
        cmd->add_option("--seed", options.seed, "training seed override");
        cmd->add_option("--layers", options.layers, "global attention layer count override");
        cmd->add_option("--init", options.init, "initializer: avg|max|bigru|tconv|selfatt");
        cmd->add_option("--clips", options.clips, "clips per sample override");
        cmd->add_option("--lambda", options.lambda_list, "loss weights, e.g. 1,1,1");
        cmd->add_option("--epochs", options.epochs, "training epoch override");
    };

    CLI::App* train = app.add_subcommand("train", "train one model and write metrics.csv");
    add_common(train);
    train->add_option("--baseline", options.baseline,
                      "model variant: none|avg_consensus|vanilla_stack");

    CLI::App* sweep = app.add_subcommand("sweep-layers", "train across layer counts and seeds");
    add_common(sweep);
    sweep->add_option("--layer-counts", options.layer_counts, "comma list of layer counts");
    sweep->add_option("--seeds", options.seeds, "comma list of seeds");

    CLI::App* compare =
        app.add_subcommand("compare-baselines", "train stam, vanilla stack, and avg consensus");
    add_common(compare);
    compare->add_option("--seeds", options.seeds, "comma list of seeds");

    CLI::App* trace = app.add_subcommand("export-trace", "train and export attention traces");
    add_common(trace);
    trace->add_option("--sample-ids", options.sample_ids, "comma list of test sample ids");
    trace->add_option("--samples", options.trace_samples,
                      "number of leading test samples when --sample-ids is absent");

    CLI::App* grads = app.add_subcommand("check-grads", "finite-difference gradient check");
    add_common(grads);
    grads->add_option("--step", options.fd_step, "finite-difference step");
    grads->add_option("--tolerance", options.fd_tolerance, "max relative error allowed");
    grads->add_option("--samples", options.fd_samples,
                      "entries checked per tensor, 0 for all");

    CLI::App* gen = app.add_subcommand("gen-data", "write the synthetic dataset to disk");
    add_common(gen);

    CLI::App* oracle = app.add_subcommand("oracle", "Monte-Carlo oracle accuracies");
    add_common(oracle);
    oracle->add_option("--draws", options.draws, "Monte-Carlo draws");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(train)) return cmd_train(options);
        if (app.got_subcommand(sweep)) return cmd_sweep_layers(options);
        if (app.got_subcommand(compare)) return cmd_compare_baselines(options);
        if (app.got_subcommand(trace)) return cmd_export_trace(options);
        if (app.got_subcommand(grads)) return cmd_check_grads(options);
        if (app.got_subcommand(gen)) return cmd_gen_data(options);
        if (app.got_subcommand(oracle)) return cmd_oracle(options);
        std::fprintf(stderr, "no subcommand selected\n");
        return kExitConfig;
    } catch (const stam::NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
}
