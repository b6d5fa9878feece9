#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>

#include "vstar/tensor.hpp"

namespace vstar {

enum class RegularizerKind { gaussian_toeplitz, reference, identity, uniform };

std::string to_string(RegularizerKind kind);

/// N x N regularization matrix added to temporal-attention logits (or, for
/// the extreme kinds, substituted for the post-softmax map).
struct RegularizerMatrix {
    std::size_t n = 0;
    Matrix values;
    RegularizerKind kind = RegularizerKind::gaussian_toeplitz;
};

/// Per-resolution-level regularization strengths. Levels are identified by
/// their spatial resolution; apply_levels must be a subset of the model's
/// temporal-attention levels.
struct RegularizerConfig {
    std::map<int, double> per_level_sigma;
    std::set<int> apply_levels;
};

/// Symmetric Toeplitz matrix with a Gaussian fall-off by frame offset:
/// delta[i][j] = exp(-((j-i)/sigma)^2 / 2). Diagonal is exactly 1.
RegularizerMatrix build_gaussian_toeplitz(std::size_t n, double sigma);

/// Adds max(logits) * delta to the logit map. The max is the scalar maximum
/// over the whole N x N map, recomputed per call. A non-positive max inverts
/// the intended boost; it is applied literally and a warning is emitted.
Matrix regularize_logits(const Matrix& logits, const RegularizerMatrix& delta);

/// Symmetrizes a similarity matrix and rescales it affinely so the minimum
/// maps to 0 and the diagonal to 1. Rejects contrast-free input.
RegularizerMatrix build_reference_delta(const Matrix& similarity);

enum class ExtremeKind { identity, uniform };

/// identity -> I_N; uniform -> J_N / N. Both are valid row-stochastic
/// replacements for a post-softmax attention map.
RegularizerMatrix extreme_matrix(std::size_t n, ExtremeKind kind);

}  // namespace vstar
