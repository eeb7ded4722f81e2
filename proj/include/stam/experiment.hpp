#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "stam/model.hpp"
#include "stam/synthetic.hpp"

namespace stam {

struct TrainSettings {
    int epochs = 30;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::vector<double> lambdas;  // empty means all ones, sized to the model
    uint64_t seed = 7;
};

enum class BaselineKind { None, AvgConsensus, VanillaStack };

BaselineKind parse_baseline(const std::string& name);
std::string baseline_name(BaselineKind kind);

/// Everything one run depends on. Two equal configs (same seed included)
/// produce bit-identical reports and output files.
struct ExperimentConfig {
    NeedleTaskSpec task;
    ModelConfig model;
    BaselineKind baseline = BaselineKind::None;
    TrainSettings train;
};

/// Strict JSON binding: unknown keys are configuration errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

struct RunReport {
    std::string config_hash;
    std::string variant;  // "stam" | "avg_consensus" | "vanilla_stack"
    std::string init;     // initializer name, "-" for baselines
    int layers = 0;       // attention layers on top of the feature extractor
    uint64_t seed = 0;
    std::vector<double> epoch_loss;
    double test_accuracy = 0.0;
    std::vector<double> head_accuracy;        // per classifier stage
    std::vector<int> weight_stages;           // stage ids of the rows below
    std::vector<double> attention_mass_mean;  // signal mass per stage, test mean
    std::vector<double> attention_mass_median;
    std::vector<double> attention_entropy_mean;
    double wall_seconds = 0.0;  // timing only; kept out of csv/trace/calibration files
};

nlohmann::ordered_json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);

/// Builds the model a config describes; model dimensions come from the task.
std::unique_ptr<Model> make_model(const ExperimentConfig& config, const SplitRng& init_rng);

struct TrainResult {
    RunReport report;
    std::unique_ptr<Model> model;
};

/// Mini-batch training of the combined loss over all parameters, then test
/// evaluation. Aborts with a NumericalError naming epoch and batch if the
/// loss leaves the finite range.
TrainResult train_model(const ExperimentConfig& config, const NeedleDataset& dataset);

struct Evaluation {
    double accuracy = 0.0;
    std::vector<double> head_accuracy;
    std::vector<int> weight_stages;
    std::vector<double> mass_mean;
    std::vector<double> mass_median;
    std::vector<double> entropy_mean;
};

Evaluation evaluate_model(const Model& model, const NeedleDataset& dataset);

/// One run per (layer count, seed); every run shares the dataset.
std::vector<RunReport> sweep_layers(const ExperimentConfig& config,
                                    const std::vector<int>& layer_counts,
                                    const std::vector<uint64_t>& seeds,
                                    const NeedleDataset& dataset);

/// Per-sample, per-layer attention weights with ground truth, for test-split
/// sample ids. Key order is fixed so equal runs serialize to equal bytes.
nlohmann::ordered_json attention_trace_json(const Model& model, const NeedleDataset& dataset,
                                            const std::vector<int>& sample_ids);

void write_metrics_csv(const std::string& path, const std::vector<RunReport>& reports);
void write_text_file(const std::string& path, const std::string& text);

/// %.17g, enough digits to round-trip a double.
std::string format_double(double value);

}  // namespace stam
