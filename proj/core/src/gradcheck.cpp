#include "vstar/gradcheck.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vstar {

GradCheckResult fd_gradient_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0,
    const std::vector<double>& analytic_grad,
    double h) {
    if (x0.size() != analytic_grad.size())
        throw std::invalid_argument("fd_gradient_check: gradient length mismatch");
    if (!(h > 0.0) || h > 1e-2)
        throw std::invalid_argument("fd_gradient_check: h must be in (0, 1e-2]");

    GradCheckResult res;
    res.relative_errors.resize(x0.size());
    std::vector<double> x = x0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        x[i] = x0[i] + h;
        double fp = f(x);
        x[i] = x0[i] - h;
        double fm = f(x);
        x[i] = x0[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("fd_gradient_check: non-finite f at coordinate " +
                                     std::to_string(i));
        double g_fd = (fp - fm) / (2.0 * h);
        double denom = std::max({std::abs(g_fd), std::abs(analytic_grad[i]), 1e-12});
        double rel = std::abs(g_fd - analytic_grad[i]) / denom;
        res.relative_errors[i] = rel;
        res.max_relative_error = std::max(res.max_relative_error, rel);
    }
    return res;
}

}  // namespace vstar
