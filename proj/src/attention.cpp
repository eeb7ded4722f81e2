#include "stam/attention.hpp"

#include <cmath>

#include "stam/errors.hpp"

namespace stam {

namespace {

void check_clips(const Tensor& clips, int feature_dim, const char* who) {
    if (clips.rank() != 2 || clips.dim(1) != feature_dim) {
        throw DimensionError(std::string(who) + ": expected clips [N x " +
                             std::to_string(feature_dim) + "], got " + shape_string(clips));
    }
}

void check_global(const Tensor& global, int feature_dim, const char* who) {
    if (global.rank() != 1 || global.dim(0) != feature_dim) {
        throw DimensionError(std::string(who) + ": expected global feature [" +
                             std::to_string(feature_dim) + "], got " + shape_string(global));
    }
}

}  // namespace

int default_attention_dim(int feature_dim) {
    return feature_dim >= 512 ? 512 : feature_dim;
}

GlobalAttentionLayer::GlobalAttentionLayer(ParamStore& store, const SplitRng& init_rng,
                                           const std::string& prefix, int feature_dim,
                                           int attention_dim, bool normalize_global)
    : feature_dim_(feature_dim),
      attention_dim_(attention_dim),
      normalize_global_(normalize_global) {
    if (feature_dim < 1 || attention_dim < 1) {
        throw ConfigError("attention layer '" + prefix + "' needs positive dimensions");
    }
    w_q_ = store.add_uniform(prefix + ".w_q", {attention_dim, feature_dim}, init_rng, feature_dim);
    w_k_ = store.add_uniform(prefix + ".w_k", {attention_dim, feature_dim}, init_rng, feature_dim);
    w_v_ = store.add_uniform(prefix + ".w_v", {feature_dim, feature_dim}, init_rng, feature_dim);
    if (normalize_global_) {
        ln_gain_ = store.add_constant(prefix + ".ln_gain", {feature_dim}, 1.0);
        ln_bias_ = store.add_zeros(prefix + ".ln_bias", {feature_dim});
    }
}

Tensor GlobalAttentionLayer::scores(const Tensor& global, const Tensor& clips) const {
    check_global(global, feature_dim_, "attention_scores");
    check_clips(clips, feature_dim_, "attention_scores");
    Tensor g_in = normalize_global_ ? layer_norm(global, ln_gain_, ln_bias_) : global;
    Tensor query = matvec(w_q_, g_in);                    // [d]
    Tensor keys = matmul(clips, transpose(w_k_));         // [N x d]
    return scale(matvec(keys, query), 1.0 / std::sqrt(static_cast<double>(attention_dim_)));
}

LayerResult GlobalAttentionLayer::forward(const Tensor& global, const Tensor& clips) const {
    Tensor weights = softmax(scores(global, clips));      // [N]
    Tensor values = matmul(clips, transpose(w_v_));       // [N x D_f]
    return {vecmat(weights, values), weights};
}

StamStack::StamStack(ParamStore& store, const SplitRng& init_rng, const std::string& prefix,
                     StamStackConfig config)
    : config_(config) {
    if (config_.layers < 0) {
        throw ConfigError("stack '" + prefix + "' needs a nonnegative layer count");
    }
    layers_.reserve(config_.layers);
    for (int i = 0; i < config_.layers; ++i) {
        layers_.emplace_back(store, init_rng, prefix + "." + std::to_string(i),
                             config_.feature_dim, config_.attention_dim,
                             config_.normalize_global);
    }
}

const GlobalAttentionLayer& StamStack::layer(int index) const {
    if (index < 0 || index >= static_cast<int>(layers_.size())) {
        throw ConfigError("stack layer index " + std::to_string(index) + " out of range");
    }
    return layers_[index];
}

StackTrace StamStack::forward(const Tensor& g0, const Tensor& clips) const {
    check_global(g0, config_.feature_dim, "stack_forward");
    check_clips(clips, config_.feature_dim, "stack_forward");
    StackTrace trace;
    trace.globals.push_back(g0);
    trace.weights.reserve(layers_.size());
    Tensor g = g0;
    for (const GlobalAttentionLayer& layer : layers_) {
        LayerResult result = layer.forward(g, clips);
        g = result.global;
        trace.globals.push_back(result.global);
        trace.weights.push_back(result.weights);
    }
    return trace;
}

SelfAttentionLayer::SelfAttentionLayer(ParamStore& store, const SplitRng& init_rng,
                                       const std::string& prefix, int feature_dim,
                                       int attention_dim)
    : feature_dim_(feature_dim), attention_dim_(attention_dim) {
    if (feature_dim < 1 || attention_dim < 1) {
        throw ConfigError("self-attention layer '" + prefix + "' needs positive dimensions");
    }
    w_q_ = store.add_uniform(prefix + ".w_q", {attention_dim, feature_dim}, init_rng, feature_dim);
    w_k_ = store.add_uniform(prefix + ".w_k", {attention_dim, feature_dim}, init_rng, feature_dim);
    w_v_ = store.add_uniform(prefix + ".w_v", {feature_dim, feature_dim}, init_rng, feature_dim);
}

SelfAttentionResult SelfAttentionLayer::forward(const Tensor& clips) const {
    check_clips(clips, feature_dim_, "self_attention");
    Tensor queries = matmul(clips, transpose(w_q_));  // [N x d]
    Tensor keys = matmul(clips, transpose(w_k_));     // [N x d]
    Tensor values = matmul(clips, transpose(w_v_));   // [N x D_f]
    Tensor scores = scale(matmul(queries, transpose(keys)),
                          1.0 / std::sqrt(static_cast<double>(attention_dim_)));
    Tensor attention = row_softmax(scores);           // [N x N]
    return {matmul(attention, values), attention};
}

}  // namespace stam
