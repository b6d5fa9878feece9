#include "nn/unet.hpp"

#include <cmath>
#include <stdexcept>

#include "vstar/rng.hpp"

namespace vstar::nn {

namespace {

const AttentionHook kNoHook{};

void fill_scaled_normal(Tensor& t, SeededRng& rng, double scale) {
    for (double& x : t.values()) x = rng.next_normal() * scale;
}

}  // namespace

NodePtr ParamStore::add(const std::string& name, std::vector<std::size_t> shape) {
    if (index.count(name)) throw std::logic_error("ParamStore: duplicate param " + name);
    auto node = make_node(Tensor(std::move(shape)));
    index[name] = nodes.size();
    names.push_back(name);
    nodes.push_back(node);
    return node;
}

const NodePtr& ParamStore::get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::logic_error("ParamStore: unknown param " + name);
    return nodes[it->second];
}

void ParamStore::zero_grad() {
    for (auto& n : nodes)
        for (double& g : n->grad.values()) g = 0.0;
}

std::size_t ParamStore::total_size() const {
    std::size_t s = 0;
    for (const auto& n : nodes) s += n->value.numel();
    return s;
}

std::vector<double> ParamStore::flat_values() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& n : nodes)
        out.insert(out.end(), n->value.values().begin(), n->value.values().end());
    return out;
}

void ParamStore::set_flat_values(const std::vector<double>& flat) {
    if (flat.size() != total_size()) throw std::invalid_argument("set_flat_values: size mismatch");
    std::size_t off = 0;
    for (auto& n : nodes) {
        std::copy(flat.begin() + static_cast<long>(off),
                  flat.begin() + static_cast<long>(off + n->value.numel()),
                  n->value.values().begin());
        off += n->value.numel();
    }
}

std::vector<double> ParamStore::flat_grads() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& n : nodes)
        out.insert(out.end(), n->grad.values().begin(), n->grad.values().end());
    return out;
}

Tensor timestep_features(int t, std::size_t dim) {
    Tensor out({dim});
    for (std::size_t j = 0; j < dim; ++j) {
        std::size_t pair = j / 2;
        double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(dim));
        double ang = static_cast<double>(t) * freq;
        out.data()[j] = (j % 2 == 0) ? std::sin(ang) : std::cos(ang);
    }
    return out;
}

const AttentionHook& select_hook(const std::vector<AttentionHook>& hooks, int level) {
    for (const auto& h : hooks)
        if (h.applies_to(level) && (h.mode != HookMode::none || h.also_capture)) return h;
    return kNoHook;
}

UNet::UNet(const ModelConfig& config, std::uint64_t init_seed) : config_(config) {
    config_.validate();
    const std::size_t nl = config_.n_levels();
    const std::size_t dt = config_.cond_dim / config_.ctx_tokens;
    const std::size_t td = config_.time_dim;

    // Registration order is the initialization order; do not reshuffle.
    auto reg_attn = [&](const std::string& p, std::size_t c) {
        params_.add(p + ".norm.g", {c});
        params_.add(p + ".norm.b", {c});
        params_.add(p + ".wq", {c, c});
        params_.add(p + ".wk", {c, c});
        params_.add(p + ".wv", {c, c});
        params_.add(p + ".wo", {c, c});
    };
    auto reg_cross = [&](const std::string& p, std::size_t c) {
        params_.add(p + ".norm.g", {c});
        params_.add(p + ".norm.b", {c});
        params_.add(p + ".wq", {c, c});
        params_.add(p + ".wk", {c, dt});
        params_.add(p + ".wv", {c, dt});
        params_.add(p + ".wo", {c, c});
    };
    auto reg_res = [&](const std::string& p, std::size_t c) {
        params_.add(p + ".norm.g", {c});
        params_.add(p + ".norm.b", {c});
        params_.add(p + ".conv.w", {c, c, 3, 3});
        params_.add(p + ".conv.b", {c});
        params_.add(p + ".tconv.w", {c, 3});
        params_.add(p + ".temb.w", {c, td});
        params_.add(p + ".temb.b", {c});
    };

    params_.add("stem.w", {config_.channels[0], config_.in_channels, 3, 3});
    params_.add("stem.b", {config_.channels[0]});
    params_.add("time.mlp1.w", {td, td});
    params_.add("time.mlp1.b", {td});
    params_.add("time.mlp2.w", {td, td});
    params_.add("time.mlp2.b", {td});

    for (std::size_t l = 0; l < nl; ++l) {
        const std::string el = "enc" + std::to_string(l);
        reg_res(el + ".res", config_.channels[l]);
        reg_attn(el + ".ta", config_.channels[l]);
        reg_cross(el + ".ca", config_.channels[l]);
        if (l + 1 < nl) {
            params_.add("down" + std::to_string(l) + ".w",
                        {config_.channels[l + 1], config_.channels[l], 3, 3});
            params_.add("down" + std::to_string(l) + ".b", {config_.channels[l + 1]});
        }
    }
    for (std::size_t li = nl - 1; li-- > 0;) {
        const std::string dl = "dec" + std::to_string(li);
        params_.add(dl + ".reduce.w", {config_.channels[li], config_.channels[li + 1], 1, 1});
        params_.add(dl + ".reduce.b", {config_.channels[li]});
        params_.add(dl + ".merge.w", {config_.channels[li], 2 * config_.channels[li], 1, 1});
        params_.add(dl + ".merge.b", {config_.channels[li]});
        reg_res(dl + ".res", config_.channels[li]);
        reg_attn(dl + ".ta", config_.channels[li]);
        reg_cross(dl + ".ca", config_.channels[li]);
    }
    params_.add("head.norm.g", {config_.channels[0]});
    params_.add("head.norm.b", {config_.channels[0]});
    params_.add("head.conv.w", {config_.in_channels, config_.channels[0], 3, 3});
    params_.add("head.conv.b", {config_.in_channels});

    // Seeded initialization, one stream consumed in registration order.
    SeededRng rng(init_seed);
    for (std::size_t i = 0; i < params_.names.size(); ++i) {
        const std::string& name = params_.names[i];
        Tensor& w = params_.nodes[i]->value;
        auto ends_with = [&](const char* suffix) {
            std::string s(suffix);
            return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
        };
        if (ends_with(".norm.g")) {
            for (double& x : w.values()) x = 1.0;
        } else if (ends_with(".norm.b") || ends_with(".conv.b") || ends_with(".b")) {
            // biases zero (covers mlp/temb/down/reduce/merge/head biases)
        } else if (name == "head.conv.w") {
            // zero-initialized head: the model starts by predicting zeros
        } else if (ends_with(".tconv.w")) {
            const std::size_t c = w.dim(0);
            for (std::size_t ch = 0; ch < c; ++ch) {
                w.data()[ch * 3 + 0] = 0.02 * rng.next_normal();
                w.data()[ch * 3 + 1] = 1.0 + 0.02 * rng.next_normal();
                w.data()[ch * 3 + 2] = 0.02 * rng.next_normal();
            }
        } else if (ends_with(".temb.w")) {
            // zero: timestep modulation fades in during training
        } else if (ends_with(".ta.wq")) {
            fill_scaled_normal(w, rng, 0.5 / std::sqrt(static_cast<double>(w.dim(1))));
        } else if (ends_with(".ta.wk")) {
            // tied to wq at initialization: the query/key form starts positive
            // semidefinite, so attention begins in the content-similarity
            // regime instead of the mirror (anti-similarity) basin
            const auto& wq = params_.get(name.substr(0, name.size() - 2) + "wq");
            w = wq->value;
        } else if (ends_with(".ta.wv") || ends_with(".ta.wo")) {
            const std::size_t c = w.dim(0);
            fill_scaled_normal(w, rng, 0.02);
            for (std::size_t d = 0; d < c; ++d) w.data()[d * c + d] += 1.0;
        } else if (ends_with(".ca.wo")) {
            // zero: cross-attention fades in as a residual branch
        } else if (w.rank() == 4) {
            const std::size_t fan_in = w.dim(1) * w.dim(2) * w.dim(3);
            fill_scaled_normal(w, rng, std::sqrt(2.0 / static_cast<double>(fan_in)));
        } else if (w.rank() == 2) {
            fill_scaled_normal(w, rng, std::sqrt(1.0 / static_cast<double>(w.dim(1))));
        }
    }
}

NodePtr UNet::res_block(Tape* tape, const std::string& p, const NodePtr& h, const NodePtr& temb,
                        bool temporal_conv_enabled) {
    auto r = frame_norm(tape, h, params_.get(p + ".norm.g"), params_.get(p + ".norm.b"));
    r = silu(tape, r);
    r = conv2d(tape, r, params_.get(p + ".conv.w"), params_.get(p + ".conv.b"), 1, 1);
    auto tb = linear(tape, temb, params_.get(p + ".temb.w"), params_.get(p + ".temb.b"));
    r = add_channel_bias(tape, r, tb);
    if (temporal_conv_enabled && config_.temporal_conv)
        r = temporal_conv(tape, r, params_.get(p + ".tconv.w"));
    return add(tape, h, r);
}

NodePtr UNet::attn_blocks(Tape* tape, const std::string& p, NodePtr h, const Tensor& ctx,
                          int level, const std::vector<AttentionHook>& hooks,
                          std::vector<TemporalAttentionMap>* captured) {
    const AttentionHook& hook = select_hook(hooks, level);
    auto ta_in = frame_norm(tape, h, params_.get(p + ".ta.norm.g"), params_.get(p + ".ta.norm.b"));
    // Non-residual: the attended features replace the input.
    h = temporal_attention_block(tape, ta_in, params_.get(p + ".ta.wq"), params_.get(p + ".ta.wk"),
                                 params_.get(p + ".ta.wv"), params_.get(p + ".ta.wo"),
                                 config_.heads, config_.pe, hook, level, captured);
    auto ca_in = frame_norm(tape, h, params_.get(p + ".ca.norm.g"), params_.get(p + ".ca.norm.b"));
    auto ca = cross_attention_block(tape, ca_in, ctx, params_.get(p + ".ca.wq"),
                                    params_.get(p + ".ca.wk"), params_.get(p + ".ca.wv"),
                                    params_.get(p + ".ca.wo"));
    return add(tape, h, ca);
}

NodePtr UNet::forward(Tape* tape, const Tensor& x, int timestep, const Matrix& cond,
                      const std::vector<AttentionHook>& hooks,
                      std::vector<TemporalAttentionMap>* captured, bool temporal_conv_enabled) {
    if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != config_.height ||
        x.dim(3) != config_.width)
        throw std::invalid_argument("UNet::forward: latent shape mismatch");
    const std::size_t n = x.dim(0);
    if (cond.rows() != n || cond.cols() != config_.cond_dim)
        throw std::invalid_argument("UNet::forward: conditioning shape mismatch");

    // Per-frame context tokens: each conditioning row split into ctx_tokens.
    const std::size_t dt = config_.cond_dim / config_.ctx_tokens;
    Tensor ctx({n, config_.ctx_tokens, dt}, std::vector<double>(cond.values()));

    auto temb0 = make_node(timestep_features(timestep, config_.time_dim));
    auto te = linear(tape, temb0, params_.get("time.mlp1.w"), params_.get("time.mlp1.b"));
    te = silu_vec(tape, te);
    te = linear(tape, te, params_.get("time.mlp2.w"), params_.get("time.mlp2.b"));

    auto h = conv2d(tape, make_node(x), params_.get("stem.w"), params_.get("stem.b"), 1, 1);

    const std::size_t nl = config_.n_levels();
    std::vector<NodePtr> skips;
    for (std::size_t l = 0; l < nl; ++l) {
        const std::string el = "enc" + std::to_string(l);
        const int level = config_.level_resolution(l);
        h = res_block(tape, el + ".res", h, te, temporal_conv_enabled);
        h = attn_blocks(tape, el, h, ctx, level, hooks, captured);
        if (l + 1 < nl) {
            skips.push_back(h);
            h = conv2d(tape, h, params_.get("down" + std::to_string(l) + ".w"),
                       params_.get("down" + std::to_string(l) + ".b"), 2, 1);
        }
    }
    for (std::size_t li = nl - 1; li-- > 0;) {
        const std::string dl = "dec" + std::to_string(li);
        const int level = config_.level_resolution(li);
        h = upsample_nearest2x(tape, h);
        h = conv2d(tape, h, params_.get(dl + ".reduce.w"), params_.get(dl + ".reduce.b"), 1, 0);
        h = concat_channels(tape, h, skips[li]);
        h = conv2d(tape, h, params_.get(dl + ".merge.w"), params_.get(dl + ".merge.b"), 1, 0);
        h = res_block(tape, dl + ".res", h, te, temporal_conv_enabled);
        h = attn_blocks(tape, dl, h, ctx, level, hooks, captured);
    }

    h = frame_norm(tape, h, params_.get("head.norm.g"), params_.get("head.norm.b"));
    h = silu(tape, h);
    return conv2d(tape, h, params_.get("head.conv.w"), params_.get("head.conv.b"), 1, 1);
}

}  // namespace vstar::nn
