#pragma once

#include <map>
#include <string>
#include <vector>

#include "nn/ops.hpp"
#include "vstar/denoiser.hpp"

namespace vstar::nn {

/// Named parameter registry; registration order fixes the flat layout used by
/// the optimizer and the seeded initialization stream.
struct ParamStore {
    std::vector<std::string> names;
    std::vector<NodePtr> nodes;
    std::map<std::string, std::size_t> index;

    NodePtr add(const std::string& name, std::vector<std::size_t> shape);
    const NodePtr& get(const std::string& name) const;
    void zero_grad();
    std::size_t total_size() const;
    std::vector<double> flat_values() const;
    void set_flat_values(const std::vector<double>& flat);
    std::vector<double> flat_grads() const;
};

/// Three-level UNet over (N, C, H, W) video latents: pseudo-3D convolutions,
/// non-residual temporal self-attention per level, spatial cross-attention to
/// per-frame context tokens, timestep conditioning. Predicts x0.
class UNet {
public:
    UNet(const ModelConfig& config, std::uint64_t init_seed);

    NodePtr forward(Tape* tape, const Tensor& x, int timestep, const Matrix& cond,
                    const std::vector<AttentionHook>& hooks,
                    std::vector<TemporalAttentionMap>* captured, bool temporal_conv_enabled);

    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const ModelConfig& config() const { return config_; }

private:
    NodePtr res_block(Tape* tape, const std::string& prefix, const NodePtr& h, const NodePtr& temb,
                      bool temporal_conv_enabled);
    NodePtr attn_blocks(Tape* tape, const std::string& prefix, NodePtr h, const Tensor& ctx,
                        int level, const std::vector<AttentionHook>& hooks,
                        std::vector<TemporalAttentionMap>* captured);

    ModelConfig config_;
    ParamStore params_;
};

/// Sinusoidal timestep features of dimension dim.
Tensor timestep_features(int t, std::size_t dim);

/// First hook in the list that applies at `level` and does something there.
const AttentionHook& select_hook(const std::vector<AttentionHook>& hooks, int level);

}  // namespace vstar::nn
