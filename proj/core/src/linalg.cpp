#include "vstar/linalg.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace vstar {

Matrix softmax_rows(const Matrix& m) {
    if (!m.all_finite()) throw std::invalid_argument("softmax_rows: non-finite input entry");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double rowmax = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m.cols(); ++c) rowmax = std::max(rowmax, m.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double e = std::exp(m.at(r, c) - rowmax);
            out.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < m.cols(); ++c) out.at(r, c) /= sum;
    }
    return out;
}

std::optional<Matrix> cholesky_factor(const Matrix& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("cholesky_factor: matrix not square");
    if (!m.all_finite()) throw std::invalid_argument("cholesky_factor: non-finite entry");
    const std::size_t n = m.rows();
    double scale = 0.0;
    for (std::size_t i = 0; i < n * n; ++i) scale = std::max(scale, std::abs(m.data()[i]));
    const double sym_tol = 1e-10 * std::max(scale, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m.at(i, j) - m.at(j, i)) > sym_tol)
                throw std::invalid_argument("cholesky_factor: matrix not symmetric");

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = m.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
        if (d <= 0.0 || !std::isfinite(d)) return std::nullopt;  // not PD
        l.at(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = m.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            l.at(i, j) = s / l.at(j, j);
        }
    }
    return l;
}

std::vector<double> solve_lower(const Matrix& l, const std::vector<double>& b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw std::invalid_argument("solve_lower: size mismatch");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    return y;
}

double log_det_spd(const Matrix& l_factor) {
    double s = 0.0;
    for (std::size_t i = 0; i < l_factor.rows(); ++i) s += std::log(l_factor.at(i, i));
    return 2.0 * s;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            double aik = a.at(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) out.at(i, j) += aik * b.at(k, j);
        }
    return out;
}

double frobenius_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.values()) s += x * x;
    return std::sqrt(s);
}

double trace(const Matrix& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(m.rows(), m.cols()); ++i) s += m.at(i, i);
    return s;
}

}  // namespace vstar
