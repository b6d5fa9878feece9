#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vstar/attention.hpp"
#include "vstar/dataset.hpp"
#include "vstar/diffusion.hpp"
#include "vstar/vsp.hpp"

namespace vstar {

/// Architecture and diffusion hyperparameters. Resolution levels are
/// identified by their spatial size: level i lives at height >> i.
struct ModelConfig {
    std::size_t in_channels = 3;
    std::size_t height = 16;
    std::size_t width = 16;
    std::vector<std::size_t> channels = {16, 32, 32};  // per level
    int heads = 2;
    std::size_t cond_dim = 32;    // text embedding dim D
    std::size_t ctx_tokens = 4;   // cross-attention context tokens per frame
    std::size_t embed_dim = 16;   // text encoder token embedding dim
    std::size_t time_dim = 64;
    std::size_t n_train_frames = 16;
    bool temporal_conv = true;
    PositionalEncodingVariant pe = PositionalEncodingVariant::none;
    int diffusion_steps = 1000;
    double beta_lo = 1e-4;
    double beta_hi = 0.02;
    std::vector<std::string> vocab;       // defaults to default_vocab()
    std::uint64_t encoder_seed = 1234;

    std::size_t n_levels() const { return channels.size(); }
    int level_resolution(std::size_t i) const { return static_cast<int>(height >> i); }
    int top_level() const { return static_cast<int>(height); }
    std::set<int> attention_levels() const;

    void validate() const;
};

struct TrainMeta {
    std::uint64_t seed = 0;
    int steps = 0;
    double final_loss = 0.0;
};

namespace nn {
class UNet;
}

/// The small latent video denoiser. Holds the UNet weights, the frozen text
/// encoder, and the diffusion schedule; predicts x0 from a noised latent.
class ToyDenoiser {
public:
    ToyDenoiser(const ModelConfig& config, std::uint64_t init_seed);
    ~ToyDenoiser();
    ToyDenoiser(ToyDenoiser&&) noexcept;
    ToyDenoiser& operator=(ToyDenoiser&&) noexcept;

    static ToyDenoiser load(const std::filesystem::path& dir);
    void save(const std::filesystem::path& dir) const;

    const ModelConfig& config() const { return config_; }
    const TextEncoder& text_encoder() const { return encoder_; }
    const DiffusionSchedule& schedule() const { return schedule_; }

    /// One denoiser pass: predicted x0 for x_t at timestep t, conditioned on
    /// per-frame embeddings cond (N x D). Hooks apply per resolution level;
    /// captured maps come back averaged per level when capture is requested.
    Tensor predict_x0(const Tensor& x_t, int t, const Matrix& cond,
                      const std::vector<AttentionHook>& hooks = {},
                      std::vector<TemporalAttentionMap>* captured = nullptr,
                      bool temporal_conv_override = true) const;

    /// Noise-prediction MSE for one (x0, t, eps) draw; equals the SNR-weighted
    /// x0 reconstruction error. Accumulates parameter gradients when with_grad
    /// is set.
    double training_loss(const ToyLatentVideo& x0, const Matrix& cond, int t, const Tensor& eps,
                         bool with_grad);

    std::vector<double> parameters_flat() const;
    void set_parameters_flat(const std::vector<double>& flat);
    std::vector<double> gradients_flat() const;
    void zero_grad();
    std::size_t parameter_count() const;

    /// K=1 conditioning: the caption embedding repeated for every frame.
    Matrix caption_schedule(const std::string& caption, std::size_t n_frames) const;

    TrainMeta meta;

private:
    ModelConfig config_;
    TextEncoder encoder_;
    DiffusionSchedule schedule_;
    std::unique_ptr<nn::UNet> net_;
};

struct TrainConfig {
    int steps = 400;
    double learning_rate = 2e-3;
    std::uint64_t seed = 0;
    int min_timestep = 20;  // epsilon-MSE is ill-conditioned near t = 0
};

/// Trains a fresh model with Adam on the epsilon-prediction MSE objective.
/// Deterministic given the seed; throws on divergence (NaN loss).
ToyDenoiser train(const std::vector<DatasetItem>& dataset, const ModelConfig& config,
                  const TrainConfig& train_config);

struct SampleOptions {
    std::size_t n_frames = 16;
    int steps = 50;
    std::uint64_t seed = 0;
    bool capture = false;                       // dump attention per (level, timestep)
    std::vector<AttentionHook> hooks;
    std::optional<Tensor> initial_noise;        // overrides the seeded draw
    bool temporal_conv = true;                  // off for frame-decoupling runs
};

struct SampleResult {
    ToyLatentVideo video;
    // (level, timestep) -> head/spatial-averaged attention map
    std::map<std::pair<int, int>, Matrix> attention;
};

/// Deterministic DDIM trajectory; the final step returns the predicted x0.
SampleResult sample(const ToyDenoiser& model, const FrameConditioningSchedule& schedule,
                    const SampleOptions& options);

/// Per-timestep attention of a real video: add noise at each t, run one
/// denoiser pass with capture. Key: (level, t).
std::map<std::pair<int, int>, Matrix> extract_attention_per_t(
    const ToyDenoiser& model, const ToyLatentVideo& video, const Matrix& cond,
    const std::vector<int>& t_set, std::uint64_t seed);

/// Same, averaged over t_set: one map per level.
std::map<int, TemporalAttentionMap> extract_attention(const ToyDenoiser& model,
                                                      const ToyLatentVideo& video,
                                                      const Matrix& cond,
                                                      const std::vector<int>& t_set,
                                                      std::uint64_t seed);

/// Default extraction timesteps {0.2T, 0.5T, 0.8T}.
std::vector<int> default_extraction_timesteps(const DiffusionSchedule& schedule);

}  // namespace vstar
