#pragma once

#include <functional>
#include <vector>

namespace vstar {

struct GradCheckResult {
    std::vector<double> relative_errors;  // one per coordinate
    double max_relative_error = 0.0;
};

/// Compares an analytic gradient against central differences of f at x0.
/// Relative error per coordinate: |g_fd - g|/max(|g_fd|, |g|, 1e-12).
/// Throws if f evaluates to a non-finite value, naming the coordinate.
GradCheckResult fd_gradient_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0,
    const std::vector<double>& analytic_grad,
    double h = 1e-5);

}  // namespace vstar
