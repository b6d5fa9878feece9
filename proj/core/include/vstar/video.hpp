#pragma once

#include <cstddef>

#include "vstar/tensor.hpp"

namespace vstar {

/// Latent video of N frames, stored as an (N, C, H, W) tensor. Dataset videos
/// are normalized to [-1, 1]; sampled videos are whatever the model produced.
struct ToyLatentVideo {
    Tensor data;  // (N, C, H, W)

    ToyLatentVideo() = default;
    explicit ToyLatentVideo(Tensor t);

    std::size_t frames() const { return data.dim(0); }
    std::size_t channels() const { return data.dim(1); }
    std::size_t height() const { return data.dim(2); }
    std::size_t width() const { return data.dim(3); }
    std::size_t frame_size() const { return channels() * height() * width(); }

    const double* frame(std::size_t t) const { return data.data() + t * frame_size(); }
    double* frame(std::size_t t) { return data.data() + t * frame_size(); }
};

}  // namespace vstar
