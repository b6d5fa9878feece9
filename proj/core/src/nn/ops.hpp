#pragma once

#include <optional>
#include <vector>

#include "vstar/attention.hpp"
#include "nn/tape.hpp"

namespace vstar::nn {

// All activations are (N, C, H, W) with N the frame axis. Weight layouts:
//   conv2d       w: (Co, Ci, K, K), b: (Co)
//   temporal     w: (C, 3)            depthwise over frames, zero padded
//   frame_norm   gamma, beta: (C)     statistics per frame over (C,H,W)
//   linear       w: (O, I), b: (O)    for 1-D vectors (time embedding)
//   attention    wq/wk/wv/wo: (C, C)  channel-space projections

NodePtr conv2d(Tape* tape, const NodePtr& x, const NodePtr& w, const NodePtr& b, int stride,
               int pad);

NodePtr temporal_conv(Tape* tape, const NodePtr& x, const NodePtr& w);

NodePtr frame_norm(Tape* tape, const NodePtr& x, const NodePtr& gamma, const NodePtr& beta);

NodePtr silu(Tape* tape, const NodePtr& x);

NodePtr add(Tape* tape, const NodePtr& a, const NodePtr& b);

/// x + bias[c] broadcast over frames and space; bias is a 1-D (C) node.
NodePtr add_channel_bias(Tape* tape, const NodePtr& x, const NodePtr& bias);

NodePtr concat_channels(Tape* tape, const NodePtr& a, const NodePtr& b);

NodePtr upsample_nearest2x(Tape* tape, const NodePtr& x);

NodePtr linear(Tape* tape, const NodePtr& x, const NodePtr& w, const NodePtr& b);

NodePtr silu_vec(Tape* tape, const NodePtr& x);  // 1-D activation

/// Temporal self-attention block over the frame axis, non-residual: the
/// output replaces the input features. The hook (inference only) may
/// regularize logits, replace the post-softmax map, or capture the final
/// head/spatial-averaged map into `captured`.
NodePtr temporal_attention_block(Tape* tape, const NodePtr& x, const NodePtr& wq,
                                 const NodePtr& wk, const NodePtr& wv, const NodePtr& wo,
                                 int n_heads, PositionalEncodingVariant pe,
                                 const AttentionHook& hook, int level,
                                 std::vector<TemporalAttentionMap>* captured);

/// Spatial cross-attention to per-frame context tokens ctx (N, n_ctx, d_tok).
/// Queries come from the spatial positions of each frame; output has the same
/// shape as x. Single head. ctx carries no gradient.
NodePtr cross_attention_block(Tape* tape, const NodePtr& x, const Tensor& ctx, const NodePtr& wq,
                              const NodePtr& wk, const NodePtr& wv, const NodePtr& wo);

}  // namespace vstar::nn
