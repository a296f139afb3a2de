// SPDX-License-Identifier: Apache-2.0
#include "ghr/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace ghr {

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

GradCheckReport check_impl(const std::function<Tensor<double>()>& loss_fn,
                           const std::vector<std::string>& names,
                           std::vector<Tensor<double>>& tensors, const GradCheckOptions& opt) {
    std::vector<std::vector<double>> analytic;
    {
        GradTape<double> tape;
        TapeScope<double> scope(&tape);
        Tensor<double> loss = loss_fn();
        tape.backward(loss);
        for (const auto& t : tensors) {
            const auto* g = tape.grad(t);
            analytic.push_back(g ? *g : std::vector<double>(t.numel(), 0.0));
        }
    }

    GradCheckReport report;
    TapeScope<double> no_grad(nullptr);
    for (std::size_t p = 0; p < tensors.size(); ++p) {
        auto data = tensors[p].mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + opt.step;
            const double up = loss_fn().item();
            data[i] = saved - opt.step;
            const double down = loss_fn().item();
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * opt.step);
            const double err = relative_error(analytic[p][i], numeric, opt.denominator_floor);
            ++report.elements_checked;
            if (report.worst_param.empty() || err > report.max_rel_error) {
                report.max_rel_error = err;
                report.worst_param = names[p];
                report.worst_index = i;
                report.worst_analytic = analytic[p][i];
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           ParamStore<double>& params, const GradCheckOptions& options) {
    return check_impl(loss_fn, params.names(), params.tensors(), options);
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& loss_fn,
                           std::vector<Tensor<double>>& inputs, const GradCheckOptions& options) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < inputs.size(); ++i) names.push_back("p" + std::to_string(i));
    for (auto& t : inputs) t.set_requires_grad(true);
    return check_impl(loss_fn, names, inputs, options);
}

}  // namespace ghr
