#include "stam/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "stam/adam.hpp"
#include "stam/errors.hpp"

namespace stam {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, const std::string& scope,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
        throw ConfigError("config: '" + scope + "' must be a JSON object");
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* key : allowed) {
            if (it.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw ConfigError("config: unknown key '" + scope + "." + it.key() + "'");
        }
    }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).template get<T>();
    }
}

std::string join_doubles(const std::vector<double>& values) {
    if (values.empty()) {
        return "-";
    }
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ';';
        }
        out += format_double(values[i]);
    }
    return out;
}

std::string join_ints(const std::vector<int>& values) {
    if (values.empty()) {
        return "-";
    }
    std::string out;
    for (size_t i = 0; i < values.size(); ++i) {
        if (i > 0) {
            out += ';';
        }
        out += std::to_string(values[i]);
    }
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) {
        return 0.0;
    }
    std::sort(values.begin(), values.end());
    size_t half = values.size() / 2;
    if (values.size() % 2 == 1) {
        return values[half];
    }
    return 0.5 * (values[half - 1] + values[half]);
}

std::vector<double> resolve_lambdas(const TrainSettings& train, int stages) {
    if (train.lambdas.empty()) {
        return std::vector<double>(stages, 1.0);
    }
    if (static_cast<int>(train.lambdas.size()) != stages) {
        throw ConfigError("config: " + std::to_string(train.lambdas.size()) +
                          " loss weights for a model with " + std::to_string(stages) + " stages");
    }
    return train.lambdas;
}

}  // namespace

BaselineKind parse_baseline(const std::string& name) {
    if (name == "none") return BaselineKind::None;
    if (name == "avg_consensus") return BaselineKind::AvgConsensus;
    if (name == "vanilla_stack") return BaselineKind::VanillaStack;
    throw ConfigError("unknown baseline '" + name +
                      "' (expected none | avg_consensus | vanilla_stack)");
}

std::string baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::None: return "none";
        case BaselineKind::AvgConsensus: return "avg_consensus";
        case BaselineKind::VanillaStack: return "vanilla_stack";
    }
    throw ConfigError("unknown baseline kind");
}

ExperimentConfig config_from_json(const json& j) {
    try {
        ExperimentConfig config;
        check_keys(j, "config", {"task", "model", "baseline", "train"});
        if (j.contains("task")) {
            const json& t = j.at("task");
            check_keys(t, "task",
                       {"classes", "clips", "feature_dim", "signal_clips", "signal_strength",
                        "noise_std", "distractor_std", "train_size", "test_size", "seed"});
            read_field(t, "classes", config.task.num_classes);
            read_field(t, "clips", config.task.clip_count);
            read_field(t, "feature_dim", config.task.feature_dim);
            read_field(t, "signal_clips", config.task.signal_clips);
            read_field(t, "signal_strength", config.task.signal_strength);
            read_field(t, "noise_std", config.task.noise_std);
            read_field(t, "distractor_std", config.task.distractor_std);
            read_field(t, "train_size", config.task.train_size);
            read_field(t, "test_size", config.task.test_size);
            read_field(t, "seed", config.task.seed);
        }
        if (j.contains("model")) {
            const json& m = j.at("model");
            check_keys(m, "model", {"init", "layers", "attention_dim", "normalize_global"});
            if (m.contains("init")) {
                config.model.init = parse_init_kind(m.at("init").get<std::string>());
            }
            read_field(m, "layers", config.model.layers);
            read_field(m, "attention_dim", config.model.attention_dim);
            read_field(m, "normalize_global", config.model.normalize_global);
        }
        if (j.contains("baseline")) {
            config.baseline = parse_baseline(j.at("baseline").get<std::string>());
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            check_keys(t, "train",
                       {"epochs", "batch_size", "learning_rate", "lambdas", "seed"});
            read_field(t, "epochs", config.train.epochs);
            read_field(t, "batch_size", config.train.batch_size);
            read_field(t, "learning_rate", config.train.learning_rate);
            read_field(t, "lambdas", config.train.lambdas);
            read_field(t, "seed", config.train.seed);
        }
        return config;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

ordered_json config_to_json(const ExperimentConfig& config) {
    ordered_json j;
    j["task"] = {{"classes", config.task.num_classes},
                 {"clips", config.task.clip_count},
                 {"feature_dim", config.task.feature_dim},
                 {"signal_clips", config.task.signal_clips},
                 {"signal_strength", config.task.signal_strength},
                 {"noise_std", config.task.noise_std},
                 {"distractor_std", config.task.distractor_std},
                 {"train_size", config.task.train_size},
                 {"test_size", config.task.test_size},
                 {"seed", config.task.seed}};
    j["model"] = {{"init", init_kind_name(config.model.init)},
                  {"layers", config.model.layers},
                  {"attention_dim", config.model.attention_dim},
                  {"normalize_global", config.model.normalize_global}};
    j["baseline"] = baseline_name(config.baseline);
    j["train"] = {{"epochs", config.train.epochs},
                  {"batch_size", config.train.batch_size},
                  {"learning_rate", config.train.learning_rate},
                  {"lambdas", config.train.lambdas},
                  {"seed", config.train.seed}};
    return j;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config file '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& config) {
    uint64_t hash = fnv1a64(config_to_json(config).dump());
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(hash));
    return out;
}

std::unique_ptr<Model> make_model(const ExperimentConfig& config, const SplitRng& init_rng) {
    ModelConfig mc = config.model;
    mc.clip_count = config.task.clip_count;
    mc.feature_dim = config.task.feature_dim;
    mc.classes = config.task.num_classes;
    switch (config.baseline) {
        case BaselineKind::None:
            return std::make_unique<StamModel>(mc, init_rng);
        case BaselineKind::AvgConsensus:
            return std::make_unique<AvgConsensusModel>(mc.classes, mc.feature_dim, init_rng);
        case BaselineKind::VanillaStack: {
            // Fairness rule: the baseline gets one extra self-attention layer
            // in place of the initializer, matching total attention depth.
            VanillaConfig vc;
            vc.layers = mc.layers + 1;
            vc.clip_count = mc.clip_count;
            vc.feature_dim = mc.feature_dim;
            vc.attention_dim = mc.attention_dim;
            vc.classes = mc.classes;
            return std::make_unique<VanillaStackModel>(vc, init_rng);
        }
    }
    throw ConfigError("unknown baseline kind");
}

Evaluation evaluate_model(const Model& model, const NeedleDataset& dataset) {
    Evaluation eval;
    int stages = model.stages();
    eval.head_accuracy.assign(stages, 0.0);
    std::vector<std::vector<double>> mass_samples;
    std::vector<std::vector<double>> entropy_samples;
    long long correct = 0;
    for (const LabeledSample& sample : dataset.test) {
        ForwardTrace trace = model.forward(clips_tensor(sample, dataset.spec));
        if (model_predict(trace) == sample.label) {
            ++correct;
        }
        for (int h = 0; h < stages; ++h) {
            if (predict(trace.logits[h]) == sample.label) {
                eval.head_accuracy[h] += 1.0;
            }
        }
        if (eval.weight_stages.empty()) {
            for (const StageWeights& stage : trace.attention) {
                eval.weight_stages.push_back(stage.stage);
            }
            mass_samples.resize(trace.attention.size());
            entropy_samples.resize(trace.attention.size());
        }
        for (size_t w = 0; w < trace.attention.size(); ++w) {
            const std::vector<double>& weights = trace.attention[w].weights.values();
            double mass = 0.0;
            double entropy = 0.0;
            for (size_t i = 0; i < weights.size(); ++i) {
                if (sample.signal_mask[i]) {
                    mass += weights[i];
                }
                if (weights[i] > 0.0) {
                    entropy -= weights[i] * std::log(weights[i]);
                }
            }
            mass_samples[w].push_back(mass);
            entropy_samples[w].push_back(entropy);
        }
    }
    size_t count = dataset.test.size();
    if (count > 0) {
        eval.accuracy = static_cast<double>(correct) / count;
        for (double& acc : eval.head_accuracy) {
            acc /= count;
        }
        for (size_t w = 0; w < mass_samples.size(); ++w) {
            double mass_total = 0.0;
            double entropy_total = 0.0;
            for (double v : mass_samples[w]) {
                mass_total += v;
            }
            for (double v : entropy_samples[w]) {
                entropy_total += v;
            }
            eval.mass_mean.push_back(mass_total / count);
            eval.mass_median.push_back(median(mass_samples[w]));
            eval.entropy_mean.push_back(entropy_total / count);
        }
    }
    return eval;
}

TrainResult train_model(const ExperimentConfig& config, const NeedleDataset& dataset) {
    validate(config.task);
    if (config.train.epochs < 0) {
        throw ConfigError("config: epochs must be nonnegative");
    }
    if (config.train.batch_size < 1) {
        throw ConfigError("config: batch size must be positive");
    }
    auto started = std::chrono::steady_clock::now();

    SplitRng run_rng(config.train.seed);
    std::unique_ptr<Model> model = make_model(config, run_rng.split("params"));
    std::vector<double> lambdas = resolve_lambdas(config.train, model->stages());

    Adam optimizer(model->params(), AdamConfig{config.train.learning_rate, 0.9, 0.999, 1e-8});
    SplitRng shuffle_base = run_rng.split("shuffle");

    RunReport report;
    report.config_hash = config_hash(config);
    report.variant = config.baseline == BaselineKind::None ? "stam" : baseline_name(config.baseline);
    report.init = config.baseline == BaselineKind::None ? init_kind_name(config.model.init) : "-";
    switch (config.baseline) {
        case BaselineKind::None: report.layers = config.model.layers; break;
        case BaselineKind::VanillaStack: report.layers = config.model.layers + 1; break;
        case BaselineKind::AvgConsensus: report.layers = 0; break;
    }
    report.seed = config.train.seed;

    std::vector<int> order(dataset.train.size());
    for (size_t i = 0; i < order.size(); ++i) {
        order[i] = static_cast<int>(i);
    }
    for (int epoch = 0; epoch < config.train.epochs; ++epoch) {
        SplitRng epoch_rng = shuffle_base.split(std::to_string(epoch));
        epoch_rng.shuffle(order);
        double loss_total = 0.0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += config.train.batch_size) {
            size_t stop = std::min(order.size(), start + config.train.batch_size);
            model->params().zero_grads();
            Tensor batch_loss;
            for (size_t k = start; k < stop; ++k) {
                const LabeledSample& sample = dataset.train[order[k]];
                ForwardTrace trace = model->forward(clips_tensor(sample, dataset.spec));
                Tensor loss = model_loss(trace, sample.label, lambdas);
                batch_loss = batch_loss.defined() ? add(batch_loss, loss) : loss;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(stop - start));
            double loss_value = batch_loss.scalar_value();
            if (!std::isfinite(loss_value)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     " batch " + std::to_string(batches));
            }
            backward(batch_loss);
            optimizer.step();
            loss_total += loss_value;
            ++batches;
        }
        report.epoch_loss.push_back(batches > 0 ? loss_total / batches : 0.0);
    }

    Evaluation eval = evaluate_model(*model, dataset);
    report.test_accuracy = eval.accuracy;
    report.head_accuracy = eval.head_accuracy;
    report.weight_stages = eval.weight_stages;
    report.attention_mass_mean = eval.mass_mean;
    report.attention_mass_median = eval.mass_median;
    report.attention_entropy_mean = eval.entropy_mean;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return {std::move(report), std::move(model)};
}

std::vector<RunReport> sweep_layers(const ExperimentConfig& config,
                                    const std::vector<int>& layer_counts,
                                    const std::vector<uint64_t>& seeds,
                                    const NeedleDataset& dataset) {
    if (layer_counts.empty() || seeds.empty()) {
        throw ConfigError("sweep: need at least one layer count and one seed");
    }
    std::vector<RunReport> reports;
    reports.reserve(layer_counts.size() * seeds.size());
    for (int layers : layer_counts) {
        for (uint64_t seed : seeds) {
            ExperimentConfig run = config;
            run.model.layers = layers;
            run.train.seed = seed;
            reports.push_back(train_model(run, dataset).report);
        }
    }
    return reports;
}

nlohmann::ordered_json attention_trace_json(const Model& model, const NeedleDataset& dataset,
                                            const std::vector<int>& sample_ids) {
    ordered_json samples = ordered_json::array();
    for (int id : sample_ids) {
        if (id < 0 || id >= static_cast<int>(dataset.test.size())) {
            throw DomainError("export-trace: unknown sample id " + std::to_string(id) +
                              " (test split has " + std::to_string(dataset.test.size()) +
                              " samples)");
        }
        const LabeledSample& sample = dataset.test[id];
        ForwardTrace trace = model.forward(clips_tensor(sample, dataset.spec));
        ordered_json entry;
        entry["id"] = id;
        entry["true_label"] = sample.label;
        entry["predicted_label"] = model_predict(trace);
        entry["signal_mask"] = ordered_json::array();
        for (uint8_t bit : sample.signal_mask) {
            entry["signal_mask"].push_back(static_cast<int>(bit));
        }
        entry["layers"] = ordered_json::array();
        for (const StageWeights& stage : trace.attention) {
            ordered_json layer;
            layer["layer"] = stage.stage;
            layer["weights"] = stage.weights.values();
            entry["layers"].push_back(std::move(layer));
        }
        samples.push_back(std::move(entry));
    }
    ordered_json root;
    root["samples"] = std::move(samples);
    return root;
}

ordered_json report_to_json(const RunReport& report) {
    ordered_json j;
    j["config_hash"] = report.config_hash;
    j["variant"] = report.variant;
    j["init"] = report.init;
    j["layers"] = report.layers;
    j["seed"] = report.seed;
    j["epoch_loss"] = report.epoch_loss;
    j["test_accuracy"] = report.test_accuracy;
    j["head_accuracy"] = report.head_accuracy;
    j["weight_stages"] = report.weight_stages;
    j["attention_mass_mean"] = report.attention_mass_mean;
    j["attention_mass_median"] = report.attention_mass_median;
    j["attention_entropy_mean"] = report.attention_entropy_mean;
    j["wall_seconds"] = report.wall_seconds;
    return j;
}

RunReport report_from_json(const json& j) {
    try {
        RunReport report;
        report.config_hash = j.at("config_hash").get<std::string>();
        report.variant = j.at("variant").get<std::string>();
        report.init = j.at("init").get<std::string>();
        report.layers = j.at("layers").get<int>();
        report.seed = j.at("seed").get<uint64_t>();
        report.epoch_loss = j.at("epoch_loss").get<std::vector<double>>();
        report.test_accuracy = j.at("test_accuracy").get<double>();
        report.head_accuracy = j.at("head_accuracy").get<std::vector<double>>();
        report.weight_stages = j.at("weight_stages").get<std::vector<int>>();
        report.attention_mass_mean = j.at("attention_mass_mean").get<std::vector<double>>();
        report.attention_mass_median = j.at("attention_mass_median").get<std::vector<double>>();
        report.attention_entropy_mean = j.at("attention_entropy_mean").get<std::vector<double>>();
        report.wall_seconds = j.at("wall_seconds").get<double>();
        return report;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("run report: ") + e.what());
    }
}

std::string format_double(double value) {
    char out[64];
    std::snprintf(out, sizeof(out), "%.17g", value);
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<RunReport>& reports) {
    std::ostringstream out;
    out << "config_hash,variant,init,layers,seed,test_accuracy,head_accuracy,attention_stages,"
        << "attention_mass,attention_mass_median,attention_entropy,loss_first,loss_min,loss_last\n";
    for (const RunReport& r : reports) {
        out << r.config_hash << ',' << r.variant << ',' << r.init << ',' << r.layers << ','
            << r.seed << ',' << format_double(r.test_accuracy) << ','
            << join_doubles(r.head_accuracy) << ',' << join_ints(r.weight_stages) << ','
            << join_doubles(r.attention_mass_mean) << ','
            << join_doubles(r.attention_mass_median) << ','
            << join_doubles(r.attention_entropy_mean) << ',';
        if (r.epoch_loss.empty()) {
            out << "-,-,-";
        } else {
            double min_loss = *std::min_element(r.epoch_loss.begin(), r.epoch_loss.end());
            out << format_double(r.epoch_loss.front()) << ',' << format_double(min_loss) << ','
                << format_double(r.epoch_loss.back());
        }
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw IoError("write to '" + path + "' failed");
    }
}

}  // namespace stam
