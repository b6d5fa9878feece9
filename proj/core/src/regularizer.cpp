#include "vstar/regularizer.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace vstar {

std::string to_string(RegularizerKind kind) {
    switch (kind) {
        case RegularizerKind::gaussian_toeplitz: return "gaussian_toeplitz";
        case RegularizerKind::reference: return "reference";
        case RegularizerKind::identity: return "identity";
        case RegularizerKind::uniform: return "uniform";
    }
    return "unknown";
}

RegularizerMatrix build_gaussian_toeplitz(std::size_t n, double sigma) {
    if (n == 0) throw std::invalid_argument("build_gaussian_toeplitz: n must be >= 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("build_gaussian_toeplitz: sigma must be > 0");
    Matrix m(n, n);
    // One evaluation per offset keeps diagonals exactly constant.
    std::vector<double> by_offset(n);
    for (std::size_t k = 0; k < n; ++k) {
        double z = static_cast<double>(k) / sigma;
        by_offset[k] = std::exp(-0.5 * z * z);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m.at(i, j) = by_offset[i > j ? i - j : j - i];
    return RegularizerMatrix{n, std::move(m), RegularizerKind::gaussian_toeplitz};
}

Matrix regularize_logits(const Matrix& logits, const RegularizerMatrix& delta) {
    if (!logits.all_finite()) throw std::invalid_argument("regularize_logits: non-finite logits");
    if (logits.rows() != logits.cols())
        throw std::invalid_argument("regularize_logits: logits must be square");
    if (delta.values.rows() != logits.rows() || delta.values.cols() != logits.cols())
        throw std::invalid_argument("regularize_logits: dimension mismatch with delta");

    const double m = logits.max_entry();
    if (m <= 0.0)
        std::fprintf(stderr,
                     "[vstar] warning: regularize_logits max(logits)=%g <= 0, "
                     "the added term inverts the intended boost\n",
                     m);
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.numel(); ++i)
        out.data()[i] = logits.data()[i] + m * delta.values.data()[i];
    return out;
}

RegularizerMatrix build_reference_delta(const Matrix& similarity) {
    if (similarity.rows() != similarity.cols())
        throw std::invalid_argument("build_reference_delta: similarity must be square");
    if (!similarity.all_finite())
        throw std::invalid_argument("build_reference_delta: non-finite entry");
    const std::size_t n = similarity.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(similarity.at(i, j) - similarity.at(j, i)) > 1e-6)
                throw std::invalid_argument("build_reference_delta: similarity not symmetric");

    Matrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            sym.at(i, j) = 0.5 * (similarity.at(i, j) + similarity.at(j, i));

    double mn = sym.min_entry();
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += sym.at(i, i);
    diag /= static_cast<double>(n);
    if (diag - mn < 1e-12)
        throw std::invalid_argument("build_reference_delta: no contrast (diagonal equals minimum)");

    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = (sym.at(i, j) - mn) / (diag - mn);
            out.at(i, j) = std::min(1.0, std::max(0.0, v));
        }
    for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
    return RegularizerMatrix{n, std::move(out), RegularizerKind::reference};
}

RegularizerMatrix extreme_matrix(std::size_t n, ExtremeKind kind) {
    if (n == 0) throw std::invalid_argument("extreme_matrix: n must be >= 1");
    if (kind == ExtremeKind::identity)
        return RegularizerMatrix{n, Matrix::identity(n), RegularizerKind::identity};
    return RegularizerMatrix{n, Matrix::constant(n, n, 1.0 / static_cast<double>(n)),
                             RegularizerKind::uniform};
}

}  // namespace vstar
