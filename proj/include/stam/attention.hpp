#pragma once

#include <string>
#include <vector>

#include "stam/param_store.hpp"
#include "stam/tensor.hpp"

namespace stam {

/// Hidden dimension rule: 512 once features are that wide, otherwise match
/// the feature dimension so small problems stay small.
int default_attention_dim(int feature_dim);

struct LayerResult {
    Tensor global;   // [D_f]
    Tensor weights;  // [N], probability vector
};

/// One global attention layer: a single query projected from the incoming
/// global feature attends over per-clip keys, and the output is the
/// attention-weighted sum of per-clip values.
class GlobalAttentionLayer {
public:
    GlobalAttentionLayer(ParamStore& store, const SplitRng& init_rng, const std::string& prefix,
                         int feature_dim, int attention_dim, bool normalize_global);

    /// Pre-softmax scores c_i = (q . k_i) / sqrt(d), one per clip.
    Tensor scores(const Tensor& global, const Tensor& clips) const;
    LayerResult forward(const Tensor& global, const Tensor& clips) const;

    int feature_dim() const { return feature_dim_; }
    int attention_dim() const { return attention_dim_; }

private:
    int feature_dim_;
    int attention_dim_;
    bool normalize_global_;
    Tensor w_q_;      // [d x D_f]
    Tensor w_k_;      // [d x D_f]
    Tensor w_v_;      // [D_f x D_f]
    Tensor ln_gain_;  // [D_f], only when normalize_global
    Tensor ln_bias_;  // [D_f]
};

struct StamStackConfig {
    int feature_dim = 32;
    int attention_dim = 32;
    int layers = 1;  // M; 0 degenerates to the initializer alone
    bool normalize_global = true;
};

struct StackTrace {
    std::vector<Tensor> globals;  // g^0 .. g^M
    std::vector<Tensor> weights;  // a^1 .. a^M
};

/// M independent global attention layers applied in sequence; each layer
/// refines the previous global feature against the same clips.
class StamStack {
public:
    StamStack(ParamStore& store, const SplitRng& init_rng, const std::string& prefix,
              StamStackConfig config);

    StackTrace forward(const Tensor& g0, const Tensor& clips) const;

    const StamStackConfig& config() const { return config_; }
    const GlobalAttentionLayer& layer(int index) const;

private:
    StamStackConfig config_;
    std::vector<GlobalAttentionLayer> layers_;
};

struct SelfAttentionResult {
    Tensor features;   // [N x D_f], attended clip features
    Tensor attention;  // [N x N], row-stochastic
};

/// Standard single-head scaled dot-product self-attention over clips, with
/// queries, keys and values all projected from the clip features.
class SelfAttentionLayer {
public:
    SelfAttentionLayer(ParamStore& store, const SplitRng& init_rng, const std::string& prefix,
                       int feature_dim, int attention_dim);

    SelfAttentionResult forward(const Tensor& clips) const;

private:
    int feature_dim_;
    int attention_dim_;
    Tensor w_q_;  // [d x D_f]
    Tensor w_k_;  // [d x D_f]
    Tensor w_v_;  // [D_f x D_f]
};

}  // namespace stam
