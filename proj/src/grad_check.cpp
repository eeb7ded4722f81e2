#include "stam/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "stam/errors.hpp"
#include "stam/rng.hpp"
#include "stam/tensor.hpp"

namespace stam {

namespace {

double evaluate(const std::function<Tensor()>& build_loss) {
    Tensor loss = build_loss();
    return loss.scalar_value();
}

std::vector<int> entry_indices(int size, int limit, SplitRng& rng) {
    std::vector<int> indices(size);
    for (int i = 0; i < size; ++i) {
        indices[i] = i;
    }
    if (limit > 0 && limit < size) {
        rng.shuffle(indices);
        indices.resize(limit);
        std::sort(indices.begin(), indices.end());
    }
    return indices;
}

}  // namespace

GradCheckReport check_gradients(ParamStore& store, const std::function<Tensor()>& build_loss,
                                const GradCheckOptions& options) {
    if (options.step <= 0.0) {
        throw DomainError("check_gradients: step must be positive");
    }
    if (options.scale_floor < 0.0) {
        throw DomainError("check_gradients: scale_floor must be nonnegative");
    }

    // The comparison assumes f is a pure function of the parameters.
    double probe1 = evaluate(build_loss);
    double probe2 = evaluate(build_loss);
    if (probe1 != probe2) {
        throw NumericalError("check_gradients: loss is not deterministic across evaluations");
    }

    store.zero_grads();
    backward(build_loss());
    std::vector<std::vector<double>> analytic;
    analytic.reserve(store.entries().size());
    for (const auto& [name, tensor] : store.entries()) {
        analytic.push_back(tensor.grad());
    }

    GradCheckReport report;
    SplitRng sample_rng(0xC0FFEE);
    for (size_t p = 0; p < store.entries().size(); ++p) {
        const std::string& name = store.entries()[p].first;
        Tensor tensor = store.entries()[p].second;
        SplitRng tensor_rng = sample_rng.split(name);
        std::vector<int> indices =
            entry_indices(tensor.size(), options.max_entries_per_tensor, tensor_rng);
        for (int i : indices) {
            double original = tensor.values()[i];
            tensor.values()[i] = original + options.step;
            double plus = evaluate(build_loss);
            tensor.values()[i] = original - options.step;
            double minus = evaluate(build_loss);
            tensor.values()[i] = original;

            double numeric = (plus - minus) / (2.0 * options.step);
            double exact = analytic[p][i];
            double denom = options.scale_floor + std::abs(exact) + std::abs(numeric);
            double rel = denom == 0.0 ? 0.0 : std::abs(exact - numeric) / denom;
            ++report.entries_checked;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_parameter = name;
                report.worst_index = i;
                report.worst_analytic = exact;
                report.worst_numeric = numeric;
            }
        }
    }
    report.passed = report.max_rel_error <= options.tolerance;
    return report;
}

}  // namespace stam
