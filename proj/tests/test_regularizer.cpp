#include <doctest.h>

#include <cmath>

#include "vstar/linalg.hpp"
#include "vstar/regularizer.hpp"
#include "vstar/rng.hpp"

using namespace vstar;

namespace {

// Scalar oracle for the logit regularization: find the max, add max * delta.
Matrix regularize_oracle(const Matrix& logits, const Matrix& delta) {
    double m = logits.data()[0];
    for (std::size_t i = 0; i < logits.numel(); ++i) m = std::max(m, logits.data()[i]);
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.numel(); ++i)
        out.data()[i] = logits.data()[i] + m * delta.data()[i];
    return out;
}

}  // namespace

TEST_CASE("gaussian toeplitz diagonal is exactly one") {
    for (std::size_t n : {1u, 4u, 16u})
        for (double sigma : {0.25, 1.0, 8.0}) {
            auto d = build_gaussian_toeplitz(n, sigma);
            for (std::size_t i = 0; i < n; ++i) CHECK(d.values.at(i, i) == 1.0);
        }
}

TEST_CASE("gaussian toeplitz matches high-precision evaluation at n=4 sigma=1") {
    auto d = build_gaussian_toeplitz(4, 1.0);
    CHECK(std::abs(d.values.at(0, 1) - 0.60653065971263342) < 1e-12);
    CHECK(std::abs(d.values.at(0, 2) - 0.13533528323661270) < 1e-12);
    CHECK(std::abs(d.values.at(0, 3) - 0.011108996538242306) < 1e-12);
}

TEST_CASE("gaussian toeplitz approaches all-ones for huge sigma") {
    auto d = build_gaussian_toeplitz(16, 1e6);
    CHECK(d.values.max_entry() - d.values.min_entry() < 1e-6);
}

TEST_CASE("gaussian toeplitz is exactly symmetric and Toeplitz") {
    auto d = build_gaussian_toeplitz(9, 0.7);
    for (std::size_t i = 0; i < 9; ++i)
        for (std::size_t j = 0; j < 9; ++j) {
            CHECK(d.values.at(i, j) == d.values.at(j, i));
            if (i + 1 < 9 && j + 1 < 9) CHECK(d.values.at(i, j) == d.values.at(i + 1, j + 1));
        }
}

TEST_CASE("gaussian toeplitz rejects bad arguments") {
    CHECK_THROWS_AS(build_gaussian_toeplitz(0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_gaussian_toeplitz(4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_gaussian_toeplitz(4, -1.0), std::invalid_argument);
}

TEST_CASE("regularize_logits with zero delta is the identity") {
    SeededRng rng(3);
    Matrix logits(4, 4);
    rng.fill_normal(logits);
    RegularizerMatrix zero{4, Matrix(4, 4), RegularizerKind::gaussian_toeplitz};
    auto out = regularize_logits(logits, zero);
    CHECK(out == logits);
    // and downstream softmax is bit-identical
    CHECK(softmax_rows(out) == softmax_rows(logits));
}

TEST_CASE("regularize_logits near-identity delta boosts the diagonal") {
    const std::size_t n = 4;
    Matrix logits = Matrix::constant(n, n, 0.5);
    auto delta = build_gaussian_toeplitz(n, 1e-6);  // numerically I_N
    auto a = softmax_rows(regularize_logits(logits, delta));
    for (std::size_t i = 0; i < n; ++i) CHECK(a.at(i, i) > 1.0 / static_cast<double>(n));
}

TEST_CASE("regularize_logits matches the scalar oracle exactly") {
    SeededRng rng(17);
    Matrix logits(5, 5);
    rng.fill_normal(logits);
    auto delta = build_gaussian_toeplitz(5, 1.0);
    auto got = regularize_logits(logits, delta);
    auto want = regularize_oracle(logits, delta.values);
    for (std::size_t i = 0; i < got.numel(); ++i) CHECK(got.data()[i] == want.data()[i]);
}

TEST_CASE("regularize_logits rejects dimension mismatch") {
    Matrix logits(3, 3);
    auto delta = build_gaussian_toeplitz(4, 1.0);
    CHECK_THROWS_AS(regularize_logits(logits, delta), std::invalid_argument);
}

TEST_CASE("adding the sigma->infinity limit barely changes softmax") {
    SeededRng rng(23);
    Matrix logits(6, 6);
    rng.fill_normal(logits);
    auto base = softmax_rows(logits);
    RegularizerMatrix ones{6, Matrix::constant(6, 6, 1.0), RegularizerKind::gaussian_toeplitz};
    auto out = softmax_rows(regularize_logits(logits, ones));
    for (std::size_t i = 0; i < 36; ++i) CHECK(std::abs(out.data()[i] - base.data()[i]) < 1e-6);
}

TEST_CASE("diagonal attention mass is non-increasing in sigma") {
    SeededRng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.next_below(7);
        Matrix logits(n, n);
        for (double& x : logits.values()) x = rng.next_normal() + 0.5;
        if (logits.max_entry() <= 0.0) continue;
        double prev = 1e300;
        for (double sigma : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
            auto a = softmax_rows(regularize_logits(logits, build_gaussian_toeplitz(n, sigma)));
            double tr = trace(a);
            CHECK(tr <= prev + 1e-9);
            prev = tr;
        }
    }
}

TEST_CASE("build_reference_delta fixed point") {
    Matrix s(3, 3, {1.0, 0.5, 0.0, 0.5, 1.0, 0.5, 0.0, 0.5, 1.0});
    auto d = build_reference_delta(s);
    CHECK(d.kind == RegularizerKind::reference);
    for (std::size_t i = 0; i < 9; ++i) CHECK(d.values.data()[i] == doctest::Approx(s.data()[i]));
}

TEST_CASE("build_reference_delta rejects contrast-free input") {
    CHECK_THROWS_AS(build_reference_delta(Matrix::constant(4, 4, 1.0)), std::invalid_argument);
}

TEST_CASE("build_reference_delta from a toy cosine similarity matrix") {
    // Three 4-pixel "frames" drifting apart; cosine matrix by brute force.
    std::vector<std::vector<double>> frames = {
        {1.0, 0.0, 1.0, 0.5}, {0.8, 0.3, 0.9, 0.4}, {0.1, 0.9, 0.2, 0.8}};
    Matrix s(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0, ni = 0, nj = 0;
            for (int e = 0; e < 4; ++e) {
                dot += frames[i][e] * frames[j][e];
                ni += frames[i][e] * frames[i][e];
                nj += frames[j][e] * frames[j][e];
            }
            s.at(i, j) = dot / std::sqrt(ni * nj);
        }
    auto d = build_reference_delta(s);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(d.values.at(i, i) == 1.0);
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(d.values.at(i, j) == d.values.at(j, i));
            CHECK(d.values.at(i, j) >= 0.0);
            if (i != j) CHECK(d.values.at(i, j) < 1.0);
        }
    }
}

TEST_CASE("extreme matrices") {
    auto id = extreme_matrix(3, ExtremeKind::identity);
    CHECK(id.values == Matrix::identity(3));
    auto un = extreme_matrix(4, ExtremeKind::uniform);
    for (std::size_t i = 0; i < 16; ++i) CHECK(un.values.data()[i] == 0.25);
    for (std::size_t n : {1u, 3u, 8u})
        for (auto kind : {ExtremeKind::identity, ExtremeKind::uniform}) {
            auto m = extreme_matrix(n, kind);
            for (std::size_t r = 0; r < n; ++r) {
                double sum = 0.0;
                for (std::size_t c = 0; c < n; ++c) sum += m.values.at(r, c);
                CHECK(sum == 1.0);
            }
        }
    CHECK_THROWS_AS(extreme_matrix(0, ExtremeKind::identity), std::invalid_argument);
}
