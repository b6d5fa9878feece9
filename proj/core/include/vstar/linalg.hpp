#pragma once

#include <optional>

#include "vstar/tensor.hpp"

namespace vstar {

/// Row-wise numerically-stable softmax. Rejects non-finite input; each output
/// row sums to 1 and entries lie in (0,1). Shift-invariant per row.
Matrix softmax_rows(const Matrix& m);

/// Lower-triangular L with m = L*L^T. Returns nullopt when m is not positive
/// definite (a testable outcome, not an error). Throws on asymmetry beyond
/// 1e-10 relative to the largest entry.
std::optional<Matrix> cholesky_factor(const Matrix& m);

/// Solves L * y = b for lower-triangular L (forward substitution).
std::vector<double> solve_lower(const Matrix& l, const std::vector<double>& b);

/// log(det(m)) for SPD m via its Cholesky factor.
double log_det_spd(const Matrix& l_factor);

Matrix matmul(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& m);
double trace(const Matrix& m);

}  // namespace vstar
