#pragma once

#include <string>
#include <vector>

#include "stam/param_store.hpp"
#include "stam/tensor.hpp"

namespace stam {

/// Linear classifier over a global feature: logits = W g + b.
class ClassifierHead {
public:
    ClassifierHead(ParamStore& store, const SplitRng& init_rng, const std::string& prefix,
                   int classes, int feature_dim);

    Tensor logits(const Tensor& global) const;

    int classes() const { return classes_; }

private:
    int classes_;
    int feature_dim_;
    Tensor w_;  // [C x D_f]
    Tensor b_;  // [C]
};

/// -log softmax(logits)[label], evaluated in log space.
Tensor cross_entropy(const Tensor& logits, int label);

/// Deep-supervision loss: sum of lambda_i * cross_entropy(stage i). Stages
/// with lambda_i == 0 are skipped entirely, so masking them is bit-identical
/// to a model that never computed those heads.
Tensor combined_loss(const std::vector<Tensor>& stage_logits, int label,
                     const std::vector<double>& lambdas);

/// Argmax class from a logits vector; ties go to the lowest index.
int predict(const Tensor& logits);

}  // namespace stam
