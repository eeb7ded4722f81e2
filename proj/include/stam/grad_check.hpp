#pragma once

#include <functional>
#include <string>

#include "stam/param_store.hpp"

namespace stam {

struct GradCheckOptions {
    // Central differences in double precision are best conditioned near
    // cbrt(machine epsilon); smaller steps sit in the cancellation regime.
    double step = 1e-5;
    double tolerance = 1e-4;
    // Gradient magnitude below which a difference reads as finite-difference
    // noise rather than disagreement: an entry passes when
    // |analytic - numeric| <= tolerance * (scale_floor + |analytic| + |numeric|).
    double scale_floor = 1e-4;
    // 0 checks every entry; otherwise a deterministic subsample per tensor.
    int max_entries_per_tensor = 0;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::string worst_parameter;
    int worst_index = -1;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    int entries_checked = 0;
};

/// Compares reverse-mode gradients against central finite differences for
/// every parameter in the store. `build_loss` must rebuild the scalar loss
/// from the store's current values; it is evaluated twice up front and must
/// reproduce the same bits, otherwise the comparison is meaningless and a
/// NumericalError is raised. Entries whose gradients sit below the
/// finite-difference noise floor (loss magnitude times machine epsilon over
/// the step) cannot be certified by any step size, so the relative error is
/// computed against scale_floor + |analytic| + |numeric|.
GradCheckReport check_gradients(ParamStore& store, const std::function<Tensor()>& build_loss,
                                const GradCheckOptions& options = {});

}  // namespace stam
