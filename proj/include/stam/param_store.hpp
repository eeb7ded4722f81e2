#pragma once

#include <string>
#include <utility>
#include <vector>

#include "stam/rng.hpp"
#include "stam/tensor.hpp"

namespace stam {

/// Insertion-ordered registry of named trainable tensors. Random
/// initialization is keyed by parameter name, never by creation order, so two
/// models that share a name prefix materialize identical weights.
class ParamStore {
public:
    Tensor add(const std::string& name, Tensor tensor);
    Tensor add_zeros(const std::string& name, std::vector<int> shape);
    Tensor add_constant(const std::string& name, std::vector<int> shape, double value);
    /// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the stream derived
    /// off `base` by this parameter's name.
    Tensor add_uniform(const std::string& name, std::vector<int> shape, const SplitRng& base,
                       int fan_in);

    bool contains(const std::string& name) const;
    Tensor get(const std::string& name) const;

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
    int tensor_count() const { return static_cast<int>(entries_.size()); }
    int value_count() const;

    void zero_grads();

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace stam
