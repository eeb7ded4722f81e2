#pragma once

#include <vector>

#include "stam/param_store.hpp"

namespace stam {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are laid out in the store's
/// insertion order and sized on first step.
class Adam {
public:
    Adam(ParamStore& store, AdamConfig config);

    /// Applies one update from the gradients currently accumulated in the
    /// store. Parameters registered after construction are rejected.
    void step();

    long long steps_taken() const { return steps_; }

private:
    ParamStore& store_;
    AdamConfig config_;
    long long steps_ = 0;
    std::vector<std::vector<double>> first_moment_;
    std::vector<std::vector<double>> second_moment_;
};

}  // namespace stam
