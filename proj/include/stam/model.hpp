#pragma once

#include <vector>

#include "stam/attention.hpp"
#include "stam/heads.hpp"
#include "stam/initializers.hpp"
#include "stam/param_store.hpp"
#include "stam/tensor.hpp"

namespace stam {

struct ModelConfig {
    InitKind init = InitKind::SelfAttention;
    int layers = 1;          // M global attention layers on top of the initializer
    int clip_count = 6;      // N
    int feature_dim = 32;    // D_f
    int attention_dim = 0;   // d; 0 picks the default rule
    int classes = 4;
    bool normalize_global = true;
};

/// One attention stage's clip weights: stage 0 belongs to the initializer,
/// stages 1..M to the global attention layers (for the vanilla baseline,
/// stages 1..L to its self-attention layers).
struct StageWeights {
    int stage;
    Tensor weights;  // [N] probability vector
};

struct ForwardTrace {
    std::vector<Tensor> globals;         // classifier inputs, one per head
    std::vector<StageWeights> attention;
    std::vector<Tensor> logits;          // one per head, aligned with globals
};

class Model {
public:
    virtual ~Model() = default;
    virtual ForwardTrace forward(const Tensor& clips) const = 0;
    virtual int stages() const = 0;  // number of classifier heads

    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }

protected:
    ParamStore store_;
};

Tensor model_loss(const ForwardTrace& trace, int label, const std::vector<double>& lambdas);
/// Prediction comes from the final head only.
int model_predict(const ForwardTrace& trace);

/// Initializer -> M global attention layers -> M+1 classifier heads.
class StamModel : public Model {
public:
    StamModel(ModelConfig config, const SplitRng& init_rng);

    ForwardTrace forward(const Tensor& clips) const override;
    int stages() const override { return config_.layers + 1; }
    const ModelConfig& config() const { return config_; }

private:
    ModelConfig config_;
    GlobalInitializer initializer_;
    StamStack stack_;
    std::vector<ClassifierHead> heads_;
};

struct VanillaConfig {
    int layers = 1;  // total self-attention layers
    int clip_count = 6;
    int feature_dim = 32;
    int attention_dim = 0;
    int classes = 4;
};

/// Baseline: a plain stack of self-attention layers over clip features with a
/// mean-aggregated classifier per layer. Its first layer shares parameter
/// names with the self-attention initializer, so one vanilla layer is the
/// same model as an initializer-only stack.
class VanillaStackModel : public Model {
public:
    VanillaStackModel(VanillaConfig config, const SplitRng& init_rng);

    ForwardTrace forward(const Tensor& clips) const override;
    int stages() const override { return config_.layers; }
    const VanillaConfig& config() const { return config_; }

private:
    VanillaConfig config_;
    std::vector<SelfAttentionLayer> layers_;
    std::vector<ClassifierHead> heads_;
};

/// Baseline: linear classifier on the mean clip feature, the no-attention floor.
class AvgConsensusModel : public Model {
public:
    AvgConsensusModel(int classes, int feature_dim, const SplitRng& init_rng);

    ForwardTrace forward(const Tensor& clips) const override;
    int stages() const override { return 1; }

private:
    int feature_dim_;
    ClassifierHead head_;
};

}  // namespace stam
