// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "ghr/params.hpp"
#include "ghr/tensor.hpp"

namespace ghr {

struct GradCheckOptions {
    double step = 1e-3;
    /// Denominators below this are clamped, so gradients that are zero up to
    /// truncation error compare absolutely.
    double denominator_floor = 1e-6;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t elements_checked = 0;

    bool passed(double tolerance) const { return max_rel_error < tolerance; }
};

double relative_error(double analytic, double numeric, double floor);

/// Compares reverse-mode gradients of the scalar `loss_fn` against central
/// differences (f(x+h) - f(x-h)) / 2h for every element of `params`. The
/// function is re-evaluated with each element perturbed in place, so it must
/// read the parameters each call and be deterministic.
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           ParamStore<double>& params, const GradCheckOptions& options = {});

/// Same, for loose tensors named "p0", "p1", ...
GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           std::vector<Tensor<double>>& inputs,
                           const GradCheckOptions& options = {});

}  // namespace ghr
