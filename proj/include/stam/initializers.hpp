#pragma once

#include <optional>
#include <string>

#include "stam/attention.hpp"
#include "stam/param_store.hpp"
#include "stam/tensor.hpp"

namespace stam {

enum class InitKind { AvgPool, MaxPool, BiGru, TemporalConv, SelfAttention };

/// Config strings: "avg" | "max" | "bigru" | "tconv" | "selfatt".
InitKind parse_init_kind(const std::string& name);
std::string init_kind_name(InitKind kind);

struct InitResult {
    Tensor global;   // [D_f]
    // Clip mixing weights, defined only when the initializer itself produces
    // them (self-attention: column means of its attention matrix).
    Tensor weights;
};

/// Produces the initial global feature from clip features. Pooling kinds are
/// parameter-free; the others register their parameters under fixed names so
/// runs are reproducible regardless of construction order.
class GlobalInitializer {
public:
    GlobalInitializer(InitKind kind, ParamStore& store, const SplitRng& init_rng, int clip_count,
                      int feature_dim, int attention_dim);

    InitResult forward(const Tensor& clips) const;

    InitKind kind() const { return kind_; }

private:
    Tensor gru_direction(const Tensor& clips, bool reversed) const;

    InitKind kind_;
    int clip_count_;
    int feature_dim_;

    // BiGru: per-direction gate weights in r,z,n block order, hidden size D_f.
    Tensor gru_fwd_w_ih_, gru_fwd_w_hh_, gru_fwd_b_ih_, gru_fwd_b_hh_;
    Tensor gru_bwd_w_ih_, gru_bwd_w_hh_, gru_bwd_b_ih_, gru_bwd_b_hh_;
    Tensor gru_proj_w_, gru_proj_b_;  // [D_f x 2D_f], [D_f]

    // TemporalConv: one full-span kernel, output length 1.
    Tensor tconv_kernel_;  // [N x D_f x D_f]
    Tensor tconv_bias_;    // [D_f]

    std::optional<SelfAttentionLayer> selfatt_;
};

}  // namespace stam
