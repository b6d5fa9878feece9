#include "vstar/denoiser.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "nn/unet.hpp"
#include "vstar/tensor_io.hpp"

namespace vstar {

namespace {

std::string pe_to_string(PositionalEncodingVariant pe) {
    switch (pe) {
        case PositionalEncodingVariant::none: return "none";
        case PositionalEncodingVariant::absolute_sinusoidal: return "absolute_sinusoidal";
        case PositionalEncodingVariant::rotary_relative: return "rotary_relative";
    }
    return "none";
}

PositionalEncodingVariant pe_from_string(const std::string& s) {
    if (s == "none") return PositionalEncodingVariant::none;
    if (s == "absolute_sinusoidal") return PositionalEncodingVariant::absolute_sinusoidal;
    if (s == "rotary_relative") return PositionalEncodingVariant::rotary_relative;
    throw std::invalid_argument("unknown positional encoding variant: " + s);
}

std::string weight_filename(const std::string& param_name) {
    std::string s = param_name;
    for (char& c : s)
        if (c == '.') c = '_';
    return s + ".vstr";
}

}  // namespace

std::set<int> ModelConfig::attention_levels() const {
    std::set<int> out;
    for (std::size_t l = 0; l < n_levels(); ++l) out.insert(level_resolution(l));
    return out;
}

void ModelConfig::validate() const {
    if (channels.empty()) throw std::invalid_argument("ModelConfig: need at least one level");
    if (height != width) throw std::invalid_argument("ModelConfig: square latents only");
    if (height >> (channels.size() - 1) < 2)
        throw std::invalid_argument("ModelConfig: too many levels for this resolution");
    if (height % (1u << (channels.size() - 1)) != 0)
        throw std::invalid_argument("ModelConfig: height must be divisible by 2^(levels-1)");
    for (std::size_t c : channels)
        if (c % static_cast<std::size_t>(heads) != 0)
            throw std::invalid_argument("ModelConfig: channels must be divisible by heads");
    if (cond_dim % ctx_tokens != 0)
        throw std::invalid_argument("ModelConfig: cond_dim must be divisible by ctx_tokens");
    if (time_dim % 2 != 0) throw std::invalid_argument("ModelConfig: time_dim must be even");
    if (pe == PositionalEncodingVariant::rotary_relative)
        for (std::size_t c : channels)
            if ((c / static_cast<std::size_t>(heads)) % 2 != 0)
                throw std::invalid_argument("ModelConfig: rotary needs even head dim");
}

ToyDenoiser::ToyDenoiser(const ModelConfig& config, std::uint64_t init_seed)
    : config_(config),
      encoder_(TextEncoder::seeded(config.vocab.empty() ? default_vocab() : config.vocab,
                                   config.embed_dim, config.cond_dim, config.encoder_seed)),
      schedule_(DiffusionSchedule::linear(config.diffusion_steps, config.beta_lo, config.beta_hi)),
      net_(std::make_unique<nn::UNet>(config, init_seed)) {
    if (config_.vocab.empty()) config_.vocab = default_vocab();
}

ToyDenoiser::~ToyDenoiser() = default;
ToyDenoiser::ToyDenoiser(ToyDenoiser&&) noexcept = default;
ToyDenoiser& ToyDenoiser::operator=(ToyDenoiser&&) noexcept = default;

Tensor ToyDenoiser::predict_x0(const Tensor& x_t, int t, const Matrix& cond,
                               const std::vector<AttentionHook>& hooks,
                               std::vector<TemporalAttentionMap>* captured,
                               bool temporal_conv_override) const {
    std::vector<TemporalAttentionMap> raw;
    auto out = net_->forward(nullptr, x_t, t, cond, hooks, captured ? &raw : nullptr,
                             temporal_conv_override);
    if (captured) {
        // Average the encoder/decoder instances per level.
        std::map<int, std::pair<Matrix, int>> acc;
        for (auto& m : raw) {
            auto it = acc.find(m.level);
            if (it == acc.end()) {
                acc.emplace(m.level, std::make_pair(m.values, 1));
            } else {
                for (std::size_t i = 0; i < m.values.numel(); ++i)
                    it->second.first.data()[i] += m.values.data()[i];
                it->second.second += 1;
            }
        }
        for (auto& [level, pair] : acc) {
            for (double& v : pair.first.values()) v /= static_cast<double>(pair.second);
            captured->push_back(TemporalAttentionMap{level, -1, t, std::move(pair.first)});
        }
    }
    return out->value;
}

double ToyDenoiser::training_loss(const ToyLatentVideo& x0, const Matrix& cond, int t,
                                  const Tensor& eps, bool with_grad) {
    if (t < 0 || t >= schedule_.steps) throw std::invalid_argument("training_loss: t out of range");
    if (!eps.same_shape(x0.data)) throw std::invalid_argument("training_loss: eps shape mismatch");
    const double abar = schedule_.alpha_bars[static_cast<std::size_t>(t)];
    const double sa = std::sqrt(abar), sn = std::sqrt(1.0 - abar);

    Tensor x_t = x0.data;
    for (std::size_t i = 0; i < x_t.numel(); ++i)
        x_t.data()[i] = sa * x_t.data()[i] + sn * eps.data()[i];

    // || eps_hat - eps ||^2 == (abar / (1-abar)) * || x0_hat - x0 ||^2
    const double weight = abar / (1.0 - abar);

    nn::Tape tape;
    auto out = net_->forward(with_grad ? &tape : nullptr, x_t, t, cond, {}, nullptr, true);

    const std::size_t numel = out->value.numel();
    double loss = 0.0;
    for (std::size_t i = 0; i < numel; ++i) {
        const double d = out->value.data()[i] - x0.data.data()[i];
        loss += d * d;
    }
    loss = weight * loss / static_cast<double>(numel);

    if (with_grad) {
        const double g = 2.0 * weight / static_cast<double>(numel);
        for (std::size_t i = 0; i < numel; ++i)
            out->grad.data()[i] = g * (out->value.data()[i] - x0.data.data()[i]);
        tape.backward();
    }
    return loss;
}

std::vector<double> ToyDenoiser::parameters_flat() const { return net_->params().flat_values(); }
void ToyDenoiser::set_parameters_flat(const std::vector<double>& flat) {
    net_->params().set_flat_values(flat);
}
std::vector<double> ToyDenoiser::gradients_flat() const { return net_->params().flat_grads(); }
void ToyDenoiser::zero_grad() { net_->params().zero_grad(); }
std::size_t ToyDenoiser::parameter_count() const { return net_->params().total_size(); }

Matrix ToyDenoiser::caption_schedule(const std::string& caption, std::size_t n_frames) const {
    auto vec = toy_text_encode(caption, encoder_);
    Matrix stages(1, vec.size(), vec);
    return build_schedule(stages, n_frames).embeddings;
}

void ToyDenoiser::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir / "weights");
    nlohmann::json j;
    j["arch"] = {{"in_channels", config_.in_channels},
                 {"height", config_.height},
                 {"width", config_.width},
                 {"channels", config_.channels},
                 {"heads", config_.heads},
                 {"cond_dim", config_.cond_dim},
                 {"ctx_tokens", config_.ctx_tokens},
                 {"embed_dim", config_.embed_dim},
                 {"time_dim", config_.time_dim},
                 {"n_train_frames", config_.n_train_frames},
                 {"temporal_conv", config_.temporal_conv},
                 {"pe", pe_to_string(config_.pe)},
                 {"diffusion_steps", config_.diffusion_steps},
                 {"beta_lo", config_.beta_lo},
                 {"beta_hi", config_.beta_hi},
                 {"encoder_seed", config_.encoder_seed}};
    j["vocab"] = config_.vocab;
    j["training"] = {{"seed", meta.seed}, {"steps", meta.steps}, {"final_loss", meta.final_loss}};
    std::ofstream out(dir / "config.json", std::ios::trunc);
    if (!out) throw std::runtime_error("ToyDenoiser::save: cannot write config.json");
    out << j.dump(2) << "\n";

    const auto& ps = net_->params();
    for (std::size_t i = 0; i < ps.names.size(); ++i)
        tensor_write(ps.nodes[i]->value, dir / "weights" / weight_filename(ps.names[i]));
}

ToyDenoiser ToyDenoiser::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "config.json");
    if (!in) throw std::runtime_error("ToyDenoiser::load: missing config.json in " + dir.string());
    nlohmann::json j;
    in >> j;
    const auto& a = j.at("arch");
    ModelConfig cfg;
    cfg.in_channels = a.at("in_channels").get<std::size_t>();
    cfg.height = a.at("height").get<std::size_t>();
    cfg.width = a.at("width").get<std::size_t>();
    cfg.channels = a.at("channels").get<std::vector<std::size_t>>();
    cfg.heads = a.at("heads").get<int>();
    cfg.cond_dim = a.at("cond_dim").get<std::size_t>();
    cfg.ctx_tokens = a.at("ctx_tokens").get<std::size_t>();
    cfg.embed_dim = a.at("embed_dim").get<std::size_t>();
    cfg.time_dim = a.at("time_dim").get<std::size_t>();
    cfg.n_train_frames = a.at("n_train_frames").get<std::size_t>();
    cfg.temporal_conv = a.at("temporal_conv").get<bool>();
    cfg.pe = pe_from_string(a.at("pe").get<std::string>());
    cfg.diffusion_steps = a.at("diffusion_steps").get<int>();
    cfg.beta_lo = a.at("beta_lo").get<double>();
    cfg.beta_hi = a.at("beta_hi").get<double>();
    cfg.encoder_seed = a.at("encoder_seed").get<std::uint64_t>();
    cfg.vocab = j.at("vocab").get<std::vector<std::string>>();

    ToyDenoiser model(cfg, 0);
    auto& ps = model.net_->params();
    for (std::size_t i = 0; i < ps.names.size(); ++i) {
        Tensor t = tensor_read(dir / "weights" / weight_filename(ps.names[i]));
        if (!(t.shape() == ps.nodes[i]->value.shape()))
            throw std::runtime_error("ToyDenoiser::load: shape mismatch for " + ps.names[i]);
        ps.nodes[i]->value = std::move(t);
    }
    if (j.contains("training")) {
        model.meta.seed = j["training"].value("seed", 0ull);
        model.meta.steps = j["training"].value("steps", 0);
        model.meta.final_loss = j["training"].value("final_loss", 0.0);
    }
    return model;
}

ToyDenoiser train(const std::vector<DatasetItem>& dataset, const ModelConfig& config,
                  const TrainConfig& tc) {
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    for (const auto& item : dataset)
        if (item.video.frames() != config.n_train_frames)
            throw std::invalid_argument("train: dataset frame count != n_train_frames");
    if (tc.min_timestep < 0 || tc.min_timestep >= config.diffusion_steps)
        throw std::invalid_argument("train: min_timestep out of range");

    ToyDenoiser model(config, SeededRng(tc.seed).split(0).seed());
    SeededRng order_rng = SeededRng(tc.seed).split(1);
    SeededRng noise_rng = SeededRng(tc.seed).split(2);

    // Caption embeddings are fixed; precompute the K=1 schedules.
    std::vector<Matrix> conds;
    conds.reserve(dataset.size());
    for (const auto& item : dataset)
        conds.push_back(model.caption_schedule(item.caption, config.n_train_frames));

    // Adam
    const std::size_t psize = model.parameter_count();
    std::vector<double> m(psize, 0.0), v(psize, 0.0);
    const double b1 = 0.9, b2 = 0.999, eps_adam = 1e-8;

    double loss = 0.0;
    for (int step = 0; step < tc.steps; ++step) {
        const std::size_t idx = order_rng.next_below(dataset.size());
        const int t = tc.min_timestep +
                      static_cast<int>(noise_rng.next_below(
                          static_cast<std::uint64_t>(config.diffusion_steps - tc.min_timestep)));
        Tensor eps(dataset[idx].video.data.shape());
        noise_rng.fill_normal(eps);

        model.zero_grad();
        loss = model.training_loss(dataset[idx].video, conds[idx], t, eps, true);
        if (!std::isfinite(loss) || loss > 1e12)
            throw std::runtime_error("train: loss diverged (" + std::to_string(loss) +
                                     ") at step " + std::to_string(step));

        auto grads = model.gradients_flat();
        auto paramv = model.parameters_flat();
        const double bc1 = 1.0 - std::pow(b1, step + 1);
        const double bc2 = 1.0 - std::pow(b2, step + 1);
        for (std::size_t i = 0; i < psize; ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grads[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grads[i] * grads[i];
            paramv[i] -= tc.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_adam);
        }
        model.set_parameters_flat(paramv);
    }
    model.meta.seed = tc.seed;
    model.meta.steps = tc.steps;
    model.meta.final_loss = loss;
    return model;
}

SampleResult sample(const ToyDenoiser& model, const FrameConditioningSchedule& schedule,
                    const SampleOptions& opts) {
    const auto& cfg = model.config();
    const std::size_t n = opts.n_frames;
    if (n < 1) throw std::invalid_argument("sample: n_frames must be >= 1");
    if (schedule.embeddings.rows() != n)
        throw std::invalid_argument("sample: schedule length != n_frames");
    if (opts.steps < 1) throw std::invalid_argument("sample: steps must be >= 1");
    for (const auto& h : opts.hooks)
        for (int lvl : h.levels)
            if (!cfg.attention_levels().count(lvl))
                throw std::invalid_argument("sample: hook level " + std::to_string(lvl) +
                                            " not present in model");

    const auto& ds = model.schedule();
    std::vector<int> taus(static_cast<std::size_t>(opts.steps));
    for (int i = 0; i < opts.steps; ++i)
        taus[static_cast<std::size_t>(i)] =
            static_cast<int>((static_cast<long>(i + 1) * ds.steps) / opts.steps) - 1;

    Tensor x({n, cfg.in_channels, cfg.height, cfg.width});
    if (opts.initial_noise) {
        if (!opts.initial_noise->same_shape(x))
            throw std::invalid_argument("sample: initial noise shape mismatch");
        x = *opts.initial_noise;
    } else {
        SeededRng rng(opts.seed);
        rng.fill_normal(x);
    }

    std::vector<AttentionHook> hooks = opts.hooks;
    if (opts.capture) {
        for (auto& h : hooks) h.also_capture = true;
        hooks.push_back(AttentionHook::capture());
    }

    SampleResult res;
    std::vector<TemporalAttentionMap> captured;
    for (std::size_t i = taus.size(); i-- > 1;) {
        const int t = taus[i];
        const int t_prev = taus[i - 1];
        captured.clear();
        Tensor x0hat = model.predict_x0(x, t, schedule.embeddings, hooks,
                                        opts.capture ? &captured : nullptr, opts.temporal_conv);
        for (auto& mcap : captured) res.attention.emplace(std::make_pair(mcap.level, t), mcap.values);

        const double abar_t = ds.alpha_bars[static_cast<std::size_t>(t)];
        const double abar_p = ds.alpha_bars[static_cast<std::size_t>(t_prev)];
        const double sa_t = std::sqrt(abar_t), sn_t = std::sqrt(1.0 - abar_t);
        const double sa_p = std::sqrt(abar_p), sn_p = std::sqrt(1.0 - abar_p);
        for (std::size_t e = 0; e < x.numel(); ++e) {
            const double eps_hat = (x.data()[e] - sa_t * x0hat.data()[e]) / sn_t;
            x.data()[e] = sa_p * x0hat.data()[e] + sn_p * eps_hat;
        }
    }
    captured.clear();
    Tensor x0hat = model.predict_x0(x, taus[0], schedule.embeddings, hooks,
                                    opts.capture ? &captured : nullptr, opts.temporal_conv);
    for (auto& mcap : captured) res.attention.emplace(std::make_pair(mcap.level, taus[0]), mcap.values);
    res.video = ToyLatentVideo(std::move(x0hat));
    return res;
}

std::map<std::pair<int, int>, Matrix> extract_attention_per_t(
    const ToyDenoiser& model, const ToyLatentVideo& video, const Matrix& cond,
    const std::vector<int>& t_set, std::uint64_t seed) {
    if (t_set.empty()) throw std::invalid_argument("extract_attention: empty timestep set");
    const auto& sched = model.schedule();
    const std::size_t fsz = video.frame_size();
    std::map<std::pair<int, int>, Matrix> out;
    std::vector<AttentionHook> hooks = {AttentionHook::capture()};
    for (int t : t_set) {
        if (t < 0 || t >= sched.steps)
            throw std::invalid_argument("extract_attention: timestep out of range");
        // The noise realization is shared across frames so the extracted map
        // reflects inter-frame content structure, not the noise draw: equal
        // frames keep equal keys.
        SeededRng rng = SeededRng(seed).split(static_cast<std::uint64_t>(t));
        std::vector<double> shared(fsz);
        for (double& x : shared) x = rng.next_normal();
        const double abar = sched.alpha_bars[static_cast<std::size_t>(t)];
        const double sa = std::sqrt(abar), sn = std::sqrt(1.0 - abar);
        Tensor noised = video.data;
        for (std::size_t f = 0; f < video.frames(); ++f)
            for (std::size_t e = 0; e < fsz; ++e) {
                double& x = noised.data()[f * fsz + e];
                x = sa * x + sn * shared[e];
            }
        std::vector<TemporalAttentionMap> captured;
        model.predict_x0(noised, t, cond, hooks, &captured);
        for (auto& m : captured) out.emplace(std::make_pair(m.level, t), std::move(m.values));
    }
    return out;
}

std::map<int, TemporalAttentionMap> extract_attention(const ToyDenoiser& model,
                                                      const ToyLatentVideo& video,
                                                      const Matrix& cond,
                                                      const std::vector<int>& t_set,
                                                      std::uint64_t seed) {
    auto per_t = extract_attention_per_t(model, video, cond, t_set, seed);
    std::map<int, TemporalAttentionMap> out;
    std::map<int, int> counts;
    for (auto& [key, values] : per_t) {
        auto it = out.find(key.first);
        if (it == out.end()) {
            out.emplace(key.first, TemporalAttentionMap{key.first, -1, -1, values});
            counts[key.first] = 1;
        } else {
            for (std::size_t i = 0; i < values.numel(); ++i)
                it->second.values.data()[i] += values.data()[i];
            counts[key.first] += 1;
        }
    }
    for (auto& [level, m] : out)
        for (double& v : m.values.values()) v /= static_cast<double>(counts[level]);
    return out;
}

std::vector<int> default_extraction_timesteps(const DiffusionSchedule& schedule) {
    return {schedule.steps / 5, schedule.steps / 2, (4 * schedule.steps) / 5};
}

}  // namespace vstar
