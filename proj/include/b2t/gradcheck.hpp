#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "b2t/tensor.hpp"

namespace b2t {

struct GradCheckReport {
    double max_rel_err = 0.0;
    bool finite = true;
    std::size_t params_checked = 0;
    bool pass = false;
};

// Central-difference check of analytic gradients. `fn` must rebuild the graph
// from the current values of `inputs` and return a scalar. Relative error is
// |analytic - numeric| / max(|analytic|, |numeric|, 1); the floor keeps
// near-zero gradients from amplifying finite-difference noise.
template <class F>
GradCheckReport grad_check(F&& fn, std::vector<Tensor<double>>& inputs, double eps = 1e-5,
                           double tol = 1e-4) {
    GradCheckReport report;

    for (auto& t : inputs) t.zero_grad();
    Tensor<double> loss = fn();
    if (!std::isfinite(loss.item())) {
        report.finite = false;
        return report;
    }
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& t : inputs) analytic.push_back(t.grad());

    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& vals = inputs[ti].value();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + eps;
            const double f_plus = fn().item();
            vals[i] = saved - eps;
            const double f_minus = fn().item();
            vals[i] = saved;

            const double numeric = (f_plus - f_minus) / (2.0 * eps);
            const double a = analytic[ti][i];
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                report.finite = false;
                return report;
            }
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1.0});
            report.max_rel_err = std::max(report.max_rel_err, std::fabs(a - numeric) / denom);
            ++report.params_checked;
        }
    }
    report.pass = report.finite && report.max_rel_err < tol;
    return report;
}

}  // namespace b2t
