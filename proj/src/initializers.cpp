#include "stam/initializers.hpp"

#include "stam/errors.hpp"

namespace stam {

InitKind parse_init_kind(const std::string& name) {
    if (name == "avg") return InitKind::AvgPool;
    if (name == "max") return InitKind::MaxPool;
    if (name == "bigru") return InitKind::BiGru;
    if (name == "tconv") return InitKind::TemporalConv;
    if (name == "selfatt") return InitKind::SelfAttention;
    throw ConfigError("unknown initializer '" + name +
                      "' (expected avg | max | bigru | tconv | selfatt)");
}

std::string init_kind_name(InitKind kind) {
    switch (kind) {
        case InitKind::AvgPool: return "avg";
        case InitKind::MaxPool: return "max";
        case InitKind::BiGru: return "bigru";
        case InitKind::TemporalConv: return "tconv";
        case InitKind::SelfAttention: return "selfatt";
    }
    throw ConfigError("unknown initializer kind");
}

GlobalInitializer::GlobalInitializer(InitKind kind, ParamStore& store, const SplitRng& init_rng,
                                     int clip_count, int feature_dim, int attention_dim)
    : kind_(kind), clip_count_(clip_count), feature_dim_(feature_dim) {
    if (clip_count < 1 || feature_dim < 1) {
        throw ConfigError("initializer needs positive clip count and feature dimension");
    }
    int h = feature_dim;  // hidden size per GRU direction
    switch (kind_) {
        case InitKind::AvgPool:
        case InitKind::MaxPool:
            break;
        case InitKind::BiGru:
            gru_fwd_w_ih_ = store.add_uniform("bigru.fwd.w_ih", {3 * h, feature_dim}, init_rng,
                                              feature_dim);
            gru_fwd_w_hh_ = store.add_uniform("bigru.fwd.w_hh", {3 * h, h}, init_rng, h);
            gru_fwd_b_ih_ = store.add_uniform("bigru.fwd.b_ih", {3 * h}, init_rng, feature_dim);
            gru_fwd_b_hh_ = store.add_uniform("bigru.fwd.b_hh", {3 * h}, init_rng, h);
            gru_bwd_w_ih_ = store.add_uniform("bigru.bwd.w_ih", {3 * h, feature_dim}, init_rng,
                                              feature_dim);
            gru_bwd_w_hh_ = store.add_uniform("bigru.bwd.w_hh", {3 * h, h}, init_rng, h);
            gru_bwd_b_ih_ = store.add_uniform("bigru.bwd.b_ih", {3 * h}, init_rng, feature_dim);
            gru_bwd_b_hh_ = store.add_uniform("bigru.bwd.b_hh", {3 * h}, init_rng, h);
            gru_proj_w_ = store.add_uniform("bigru.proj.w", {feature_dim, 2 * h}, init_rng, 2 * h);
            gru_proj_b_ = store.add_uniform("bigru.proj.b", {feature_dim}, init_rng, 2 * h);
            break;
        case InitKind::TemporalConv:
            tconv_kernel_ = store.add_uniform("tconv.kernel", {clip_count, feature_dim, feature_dim},
                                              init_rng, clip_count * feature_dim);
            tconv_bias_ = store.add_uniform("tconv.bias", {feature_dim}, init_rng,
                                            clip_count * feature_dim);
            break;
        case InitKind::SelfAttention:
            selfatt_.emplace(store, init_rng, "selfatt.0", feature_dim, attention_dim);
            break;
    }
}

Tensor GlobalInitializer::gru_direction(const Tensor& clips, bool reversed) const {
    const Tensor& w_ih = reversed ? gru_bwd_w_ih_ : gru_fwd_w_ih_;
    const Tensor& w_hh = reversed ? gru_bwd_w_hh_ : gru_fwd_w_hh_;
    const Tensor& b_ih = reversed ? gru_bwd_b_ih_ : gru_fwd_b_ih_;
    const Tensor& b_hh = reversed ? gru_bwd_b_hh_ : gru_fwd_b_hh_;
    int n = clips.dim(0);
    int h = feature_dim_;
    Tensor ones = Tensor::constant({h}, 1.0);
    Tensor hidden = Tensor::zeros({h});
    for (int step = 0; step < n; ++step) {
        int t = reversed ? n - 1 - step : step;
        Tensor x = row(clips, t);
        Tensor gates_x = add(matvec(w_ih, x), b_ih);       // [3h], blocks r,z,n
        Tensor gates_h = add(matvec(w_hh, hidden), b_hh);  // [3h]
        Tensor reset = sigmoid(add(slice(gates_x, 0, h), slice(gates_h, 0, h)));
        Tensor update = sigmoid(add(slice(gates_x, h, h), slice(gates_h, h, h)));
        Tensor candidate =
            tanh(add(slice(gates_x, 2 * h, h), mul(reset, slice(gates_h, 2 * h, h))));
        hidden = add(mul(sub(ones, update), candidate), mul(update, hidden));
    }
    return hidden;
}

InitResult GlobalInitializer::forward(const Tensor& clips) const {
    if (clips.rank() != 2 || clips.dim(1) != feature_dim_) {
        throw DimensionError("initializer: expected clips [N x " + std::to_string(feature_dim_) +
                             "], got " + shape_string(clips));
    }
    switch (kind_) {
        case InitKind::AvgPool:
            return {mean_rows(clips), Tensor()};
        case InitKind::MaxPool:
            return {max_rows(clips), Tensor()};
        case InitKind::BiGru: {
            Tensor both = concat(gru_direction(clips, false), gru_direction(clips, true));
            return {add(matvec(gru_proj_w_, both), gru_proj_b_), Tensor()};
        }
        case InitKind::TemporalConv:
            if (clips.dim(0) != clip_count_) {
                throw DimensionError("tconv initializer built for " + std::to_string(clip_count_) +
                                     " clips, got " + shape_string(clips));
            }
            return {temporal_conv_full(tconv_kernel_, clips, tconv_bias_), Tensor()};
        case InitKind::SelfAttention: {
            SelfAttentionResult result = selfatt_->forward(clips);
            return {mean_rows(result.features), mean_rows(result.attention)};
        }
    }
    throw ConfigError("unknown initializer kind");
}

}  // namespace stam
