#include "vstar/tensor.hpp"

#include <cmath>
#include <limits>

namespace vstar {

std::size_t Tensor::checked_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape");
        if (d > std::numeric_limits<std::size_t>::max() / n)
            throw std::invalid_argument("Tensor: shape product overflows");
        n *= d;
    }
    return n;
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t.at(c, r) = at(r, c);
    return t;
}

bool Matrix::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

double Matrix::max_entry() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : data_) m = std::max(m, x);
    return m;
}

double Matrix::min_entry() const {
    double m = std::numeric_limits<double>::infinity();
    for (double x : data_) m = std::min(m, x);
    return m;
}

}  // namespace vstar
