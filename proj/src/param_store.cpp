#include "stam/param_store.hpp"

#include <algorithm>
#include <cmath>

#include "stam/errors.hpp"

namespace stam {

Tensor ParamStore::add(const std::string& name, Tensor tensor) {
    if (contains(name)) {
        throw ConfigError("parameter '" + name + "' registered twice");
    }
    if (!tensor.requires_grad()) {
        throw ConfigError("parameter '" + name + "' must require gradients");
    }
    entries_.emplace_back(name, tensor);
    return tensor;
}

Tensor ParamStore::add_zeros(const std::string& name, std::vector<int> shape) {
    return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor ParamStore::add_constant(const std::string& name, std::vector<int> shape, double value) {
    return add(name, Tensor::constant(std::move(shape), value, true));
}

Tensor ParamStore::add_uniform(const std::string& name, std::vector<int> shape,
                               const SplitRng& base, int fan_in) {
    if (fan_in < 1) {
        throw ConfigError("parameter '" + name + "' needs positive fan_in");
    }
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor tensor = Tensor::zeros(std::move(shape), true);
    SplitRng rng = base.split(name);
    for (double& v : tensor.values()) {
        v = rng.next_uniform(-bound, bound);
    }
    return add(name, tensor);
}

bool ParamStore::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(),
                       [&](const auto& entry) { return entry.first == name; });
}

Tensor ParamStore::get(const std::string& name) const {
    for (const auto& [key, tensor] : entries_) {
        if (key == name) {
            return tensor;
        }
    }
    throw ConfigError("parameter '" + name + "' not found");
}

int ParamStore::value_count() const {
    int total = 0;
    for (const auto& [key, tensor] : entries_) {
        total += tensor.size();
    }
    return total;
}

void ParamStore::zero_grads() {
    for (auto& [key, tensor] : entries_) {
        tensor.zero_grad();
    }
}

}  // namespace stam
