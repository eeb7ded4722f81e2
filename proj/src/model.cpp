#include "stam/model.hpp"

#include <string>

#include "stam/errors.hpp"

namespace stam {

namespace {

int resolved_attention_dim(int requested, int feature_dim) {
    return requested > 0 ? requested : default_attention_dim(feature_dim);
}

ModelConfig resolved(ModelConfig config) {
    config.attention_dim = resolved_attention_dim(config.attention_dim, config.feature_dim);
    return config;
}

std::vector<ClassifierHead> make_heads(ParamStore& store, const SplitRng& init_rng, int count,
                                       int classes, int feature_dim) {
    std::vector<ClassifierHead> heads;
    heads.reserve(count);
    for (int i = 0; i < count; ++i) {
        heads.emplace_back(store, init_rng, "head." + std::to_string(i), classes, feature_dim);
    }
    return heads;
}

}  // namespace

Tensor model_loss(const ForwardTrace& trace, int label, const std::vector<double>& lambdas) {
    return combined_loss(trace.logits, label, lambdas);
}

int model_predict(const ForwardTrace& trace) {
    if (trace.logits.empty()) {
        throw DomainError("model_predict: trace has no classifier stages");
    }
    return predict(trace.logits.back());
}

StamModel::StamModel(ModelConfig config, const SplitRng& init_rng)
    : config_(resolved(config)),
      initializer_(config_.init, store_, init_rng, config_.clip_count, config_.feature_dim,
                   config_.attention_dim),
      stack_(store_, init_rng, "stam",
             StamStackConfig{config_.feature_dim, config_.attention_dim, config_.layers,
                             config_.normalize_global}),
      heads_(make_heads(store_, init_rng, config_.layers + 1, config_.classes,
                        config_.feature_dim)) {}

ForwardTrace StamModel::forward(const Tensor& clips) const {
    InitResult init = initializer_.forward(clips);
    StackTrace stack = stack_.forward(init.global, clips);

    ForwardTrace trace;
    trace.globals = stack.globals;
    if (init.weights.defined()) {
        trace.attention.push_back({0, init.weights});
    }
    for (size_t l = 0; l < stack.weights.size(); ++l) {
        trace.attention.push_back({static_cast<int>(l) + 1, stack.weights[l]});
    }
    trace.logits.reserve(heads_.size());
    for (size_t i = 0; i < heads_.size(); ++i) {
        trace.logits.push_back(heads_[i].logits(trace.globals[i]));
    }
    return trace;
}

VanillaStackModel::VanillaStackModel(VanillaConfig config, const SplitRng& init_rng)
    : config_(config) {
    if (config_.layers < 1) {
        throw ConfigError("vanilla stack needs at least one layer");
    }
    config_.attention_dim = resolved_attention_dim(config_.attention_dim, config_.feature_dim);
    layers_.reserve(config_.layers);
    for (int i = 0; i < config_.layers; ++i) {
        layers_.emplace_back(store_, init_rng, "selfatt." + std::to_string(i),
                             config_.feature_dim, config_.attention_dim);
    }
    heads_ = make_heads(store_, init_rng, config_.layers, config_.classes, config_.feature_dim);
}

ForwardTrace VanillaStackModel::forward(const Tensor& clips) const {
    ForwardTrace trace;
    Tensor features = clips;
    for (size_t l = 0; l < layers_.size(); ++l) {
        SelfAttentionResult result = layers_[l].forward(features);
        features = result.features;
        trace.globals.push_back(mean_rows(features));
        trace.attention.push_back({static_cast<int>(l) + 1, mean_rows(result.attention)});
    }
    trace.logits.reserve(heads_.size());
    for (size_t i = 0; i < heads_.size(); ++i) {
        trace.logits.push_back(heads_[i].logits(trace.globals[i]));
    }
    return trace;
}

AvgConsensusModel::AvgConsensusModel(int classes, int feature_dim, const SplitRng& init_rng)
    : feature_dim_(feature_dim), head_(store_, init_rng, "head.0", classes, feature_dim) {}

ForwardTrace AvgConsensusModel::forward(const Tensor& clips) const {
    if (clips.rank() != 2 || clips.dim(1) != feature_dim_) {
        throw DimensionError("avg consensus: expected clips [N x " + std::to_string(feature_dim_) +
                             "], got " + shape_string(clips));
    }
    ForwardTrace trace;
    trace.globals.push_back(mean_rows(clips));
    trace.logits.push_back(head_.logits(trace.globals[0]));
    return trace;
}

}  // namespace stam
