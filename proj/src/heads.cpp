#include "stam/heads.hpp"

#include "stam/errors.hpp"

namespace stam {

ClassifierHead::ClassifierHead(ParamStore& store, const SplitRng& init_rng,
                               const std::string& prefix, int classes, int feature_dim)
    : classes_(classes), feature_dim_(feature_dim) {
    if (classes < 2) {
        throw ConfigError("classifier '" + prefix + "' needs at least two classes");
    }
    w_ = store.add_uniform(prefix + ".w", {classes, feature_dim}, init_rng, feature_dim);
    b_ = store.add_uniform(prefix + ".b", {classes}, init_rng, feature_dim);
}

Tensor ClassifierHead::logits(const Tensor& global) const {
    if (global.rank() != 1 || global.dim(0) != feature_dim_) {
        throw DimensionError("classify: expected global feature [" + std::to_string(feature_dim_) +
                             "], got " + shape_string(global));
    }
    return add(matvec(w_, global), b_);
}

Tensor cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1) {
        throw DimensionError("cross_entropy: expected logits vector, got " + shape_string(logits));
    }
    if (label < 0 || label >= logits.dim(0)) {
        throw DomainError("cross_entropy: label " + std::to_string(label) +
                          " out of range for logits " + shape_string(logits));
    }
    return sub(logsumexp(logits), pick(logits, label));
}

Tensor combined_loss(const std::vector<Tensor>& stage_logits, int label,
                     const std::vector<double>& lambdas) {
    if (stage_logits.empty()) {
        throw ConfigError("combined_loss: no classifier stages");
    }
    if (lambdas.size() != stage_logits.size()) {
        throw ConfigError("combined_loss: " + std::to_string(lambdas.size()) +
                          " loss weights for " + std::to_string(stage_logits.size()) + " stages");
    }
    for (double lambda : lambdas) {
        if (!(lambda >= 0.0)) {
            throw ConfigError("combined_loss: loss weights must be nonnegative");
        }
    }
    Tensor total;
    for (size_t i = 0; i < stage_logits.size(); ++i) {
        if (lambdas[i] == 0.0) {
            continue;
        }
        Tensor term = cross_entropy(stage_logits[i], label);
        if (lambdas[i] != 1.0) {
            term = scale(term, lambdas[i]);
        }
        total = total.defined() ? add(total, term) : term;
    }
    if (!total.defined()) {
        throw ConfigError("combined_loss: at least one loss weight must be positive");
    }
    return total;
}

int predict(const Tensor& logits) {
    if (logits.rank() != 1) {
        throw DimensionError("predict: expected logits vector, got " + shape_string(logits));
    }
    int best = 0;
    for (int c = 1; c < logits.dim(0); ++c) {
        if (logits.values()[c] > logits.values()[best]) {
            best = c;
        }
    }
    return best;
}

}  // namespace stam
