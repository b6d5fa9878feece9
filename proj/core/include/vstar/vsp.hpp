#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vstar/tensor.hpp"

namespace vstar {

/// One prompt decomposed into an ordered sequence of visual stages.
struct Synopsis {
    std::string original_prompt;
    std::vector<std::string> stages;  // K >= 1 non-empty sub-prompts
};

/// Per-frame conditioning embeddings. Each row is a convex combination of at
/// most two consecutive stage embeddings; row 0 equals stage 1 and row N-1
/// equals stage K.
struct FrameConditioningSchedule {
    Matrix embeddings;                              // N x D
    std::vector<std::pair<int, int>> anchors;       // (frame, stage)
};

enum class InterpolationKind { linear, spherical };

/// Anchors evenly at round((k-1)*(N-1)/(K-1)); frames between anchors are
/// interpolated. K = 1 repeats the single embedding for every frame.
FrameConditioningSchedule build_schedule(const Matrix& stage_embeddings, std::size_t n_frames,
                                         InterpolationKind kind = InterpolationKind::linear);

/// Deterministic stand-in for a pretrained text encoder: mean of learned
/// token embeddings through one learned affine map. Weights live in the model
/// checkpoint so train-time and sample-time conditioning agree.
struct TextEncoder {
    std::vector<std::string> vocab;  // index = token id; vocab[0] is UNK
    Matrix token_embeddings;         // V x E
    Matrix proj_weight;              // D x E
    std::vector<double> proj_bias;   // D

    static TextEncoder seeded(std::vector<std::string> vocab, std::size_t embed_dim,
                              std::size_t out_dim, std::uint64_t seed);

    std::size_t out_dim() const { return proj_bias.size(); }
    int token_id(const std::string& token) const;
};

std::vector<std::string> tokenize_whitespace(const std::string& text);

/// Encodes one prompt into a D-vector. Throws on an empty prompt.
std::vector<double> toy_text_encode(const std::string& prompt, const TextEncoder& encoder);

/// Encodes every stage of a synopsis into a K x D matrix.
Matrix encode_stages(const Synopsis& synopsis, const TextEncoder& encoder);

}  // namespace vstar
