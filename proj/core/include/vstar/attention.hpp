#pragma once

#include <optional>
#include <set>
#include <vector>

#include "vstar/regularizer.hpp"
#include "vstar/tensor.hpp"

namespace vstar {

/// Frame-to-frame attention captured inside a temporal self-attention layer.
/// Rows sum to 1; level is the spatial resolution of the layer, head is -1
/// for maps already averaged over heads, timestep is -1 when averaged or
/// captured outside sampling.
struct TemporalAttentionMap {
    int level = 0;
    int head = -1;
    int timestep = -1;
    Matrix values;
};

enum class HookMode { none, capture, regularize, replace };

/// Controls what happens inside temporal self-attention at the levels listed.
/// regularize adds max-scaled delta to the logits before softmax; replace
/// substitutes a row-stochastic map for the post-softmax result. Any mode may
/// additionally request capture of the effective (final) map.
struct AttentionHook {
    HookMode mode = HookMode::none;
    std::optional<RegularizerMatrix> matrix;  // for regularize / replace
    std::set<int> levels;                     // empty set = all levels
    bool also_capture = false;

    bool applies_to(int level) const { return levels.empty() || levels.count(level) > 0; }
    bool wants_capture() const { return mode == HookMode::capture || also_capture; }

    static AttentionHook none() { return {}; }
    static AttentionHook capture(std::set<int> levels = {}) {
        return {HookMode::capture, std::nullopt, std::move(levels), true};
    }
    static AttentionHook regularize(RegularizerMatrix m, std::set<int> levels = {},
                                    bool capture = false) {
        return {HookMode::regularize, std::move(m), std::move(levels), capture};
    }
    static AttentionHook replace(RegularizerMatrix m, std::set<int> levels = {},
                                 bool capture = false) {
        return {HookMode::replace, std::move(m), std::move(levels), capture};
    }
};

enum class PositionalEncodingVariant { none, absolute_sinusoidal, rotary_relative };

/// In-place PE transform of q and k, both shaped (S, N, d). frame_indices
/// must be strictly increasing; rotary requires even d.
void apply_positional_encoding(Tensor& q, Tensor& k, const std::vector<int>& frame_indices,
                               PositionalEncodingVariant variant);

struct AttentionResult {
    Tensor output;  // (S, N, d)
    std::vector<TemporalAttentionMap> captured;
};

/// Temporal self-attention over the frame axis. q, k, v are (S, N, d) where S
/// is the spatial-batch axis. Per spatial row and head: logits = QK^T/sqrt(dh)
/// after the PE transform, hook applied, output = A*V. The captured map (one
/// per call, when requested) is averaged over heads and the spatial axis.
/// d must be divisible by n_heads.
AttentionResult temporal_self_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                        const AttentionHook& hook,
                                        PositionalEncodingVariant pe, int n_heads = 1,
                                        int level = 0);

}  // namespace vstar
