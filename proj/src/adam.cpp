#include "stam/adam.hpp"

#include <cmath>

#include "stam/errors.hpp"

namespace stam {

Adam::Adam(ParamStore& store, AdamConfig config) : store_(store), config_(config) {
    if (config_.learning_rate <= 0.0) {
        throw ConfigError("adam: learning rate must be positive");
    }
    for (const auto& [name, tensor] : store_.entries()) {
        first_moment_.emplace_back(tensor.size(), 0.0);
        second_moment_.emplace_back(tensor.size(), 0.0);
    }
}

void Adam::step() {
    if (store_.entries().size() != first_moment_.size()) {
        throw ConfigError("adam: parameter store changed size after optimizer construction");
    }
    ++steps_;
    double correction1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    double correction2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (size_t p = 0; p < store_.entries().size(); ++p) {
        const std::string& name = store_.entries()[p].first;
        Tensor tensor = store_.entries()[p].second;
        if (!tensor.has_grad()) {
            throw DomainError("adam: parameter '" + name + "' has no gradient");
        }
        const std::vector<double>& grad = tensor.grad();
        std::vector<double>& m = first_moment_[p];
        std::vector<double>& v = second_moment_[p];
        std::vector<double>& values = tensor.values();
        for (size_t i = 0; i < values.size(); ++i) {
            m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * grad[i];
            v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * grad[i] * grad[i];
            double m_hat = m[i] / correction1;
            double v_hat = v[i] / correction2;
            values[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
        }
    }
}

}  // namespace stam
