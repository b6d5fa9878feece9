#include "vstar/dataset.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include "vstar/rng.hpp"
#include "vstar/vsp.hpp"

namespace vstar {

namespace {

constexpr double PI = std::numbers::pi;

double param(const std::map<std::string, double>& p, const std::string& key, double dflt) {
    auto it = p.find(key);
    return it == p.end() ? dflt : it->second;
}

double clamp1(double v) { return std::max(-1.0, std::min(1.0, v)); }

// Multi-component sinusoid texture whose phases follow per-frame random
// walks. Neighboring frames share most of their texture state while distant
// frames decorrelate - the temporal statistics of real dynamic footage, which
// is what makes adjacent frames the best mutual predictors.
class TextureField {
public:
    TextureField(SeededRng& rng, double amplitude, double walk_step, std::size_t components = 8)
        : walk_step_(walk_step) {
        comps_.resize(components);
        for (auto& c : comps_) {
            c.kx = 1.0 + static_cast<double>(rng.next_below(3));
            c.ky = 1.0 + static_cast<double>(rng.next_below(3));
            if (rng.next_below(2)) c.kx = -c.kx;
            c.phase = rng.next_uniform() * 2.0 * PI;
            c.amp = amplitude * (0.7 + 0.6 * rng.next_uniform()) /
                    std::sqrt(static_cast<double>(components));
        }
    }

    double value(double xn, double yn) const {  // xn, yn in [0,1)
        double v = 0.0;
        for (const auto& c : comps_) v += c.amp * std::sin(2.0 * PI * (c.kx * xn + c.ky * yn) + c.phase);
        return v;
    }

    void advance(SeededRng& rng) {
        for (auto& c : comps_) c.phase += walk_step_ * rng.next_normal();
    }

private:
    struct Component {
        double kx, ky, phase, amp;
    };
    std::vector<Component> comps_;
    double walk_step_;
};

ToyLatentVideo render(const SyntheticVideoSpec& spec, std::size_t n, std::size_t h, std::size_t w,
                      SeededRng& rng) {
    Tensor data({n, 3, h, w});
    const double nf = static_cast<double>(n - 1);
    const double jitter = param(spec.params, "jitter", 1.0);
    const double tex_amp = param(spec.params, "texture", 0.4);
    TextureField tex(rng, tex_amp, 0.55 * jitter);

    auto tex_at = [&](std::size_t x, std::size_t y) {
        return tex.value(static_cast<double>(x) / static_cast<double>(w),
                         static_cast<double>(y) / static_cast<double>(h));
    };

    if (spec.motif == "color_transition") {
        const double contrast = param(spec.params, "contrast", 0.55);
        for (std::size_t t = 0; t < n; ++t) {
            double u = static_cast<double>(t) / nf;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double tv = tex_at(x, y);
                    data.at4(t, 0, y, x) = clamp1((1.0 - 2.0 * u) * contrast + tv);
                    data.at4(t, 1, y, x) = clamp1(tv - 0.1);
                    data.at4(t, 2, y, x) = clamp1((2.0 * u - 1.0) * contrast + tv);
                }
            tex.advance(rng);
        }
    } else if (spec.motif == "growing_disk") {
        const double r0 = param(spec.params, "r0", 1.0);
        const double r1 = param(spec.params, "r1", 5.0);
        // integer-step center walk, clamped so the disk never clips; the
        // channel-0 sign threshold then counts exactly the disk pixels and
        // that count is strictly monotone in the radius
        const double rmax = std::max(r0, r1);
        const long lo = static_cast<long>(std::ceil(rmax + 0.5));
        const long hi_x = static_cast<long>(std::floor(static_cast<double>(w) - 1.5 - rmax));
        const long hi_y = static_cast<long>(std::floor(static_cast<double>(h) - 1.5 - rmax));
        long cx = static_cast<long>(w) / 2, cy = static_cast<long>(h) / 2;
        for (std::size_t t = 0; t < n; ++t) {
            double r = r0 + (r1 - r0) * static_cast<double>(t) / nf;
            double r2 = r * r;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double dx = static_cast<double>(x) - static_cast<double>(cx);
                    double dy = static_cast<double>(y) - static_cast<double>(cy);
                    bool inside = dx * dx + dy * dy <= r2;
                    double tv = 0.8 * tex_at(x, y);
                    data.at4(t, 0, y, x) = inside ? 0.9 : clamp1(-0.9 + std::min(0.85, std::max(-0.85, tv)));
                    data.at4(t, 1, y, x) = clamp1((inside ? 0.7 : -0.7) + tv);
                    data.at4(t, 2, y, x) = clamp1((inside ? 0.5 : -0.6) + tv);
                }
            if (hi_x > lo && hi_y > lo && jitter > 0.0) {
                cx += static_cast<long>(rng.next_below(3)) - 1;
                cy += static_cast<long>(rng.next_below(3)) - 1;
                cx = std::max(lo, std::min(hi_x, cx));
                cy = std::max(lo, std::min(hi_y, cy));
            }
            tex.advance(rng);
        }
    } else if (spec.motif == "moving_gradient") {
        const double speed = param(spec.params, "speed", 1.0);
        const double cycles = param(spec.params, "cycles", 1.0);
        double phase = rng.next_uniform() * static_cast<double>(w);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double tv = tex_at(x, y);
                    double v = std::sin(2.0 * PI * cycles * (static_cast<double>(x) + phase) /
                                        static_cast<double>(w)) * 0.5;
                    data.at4(t, 0, y, x) = clamp1(v + tv);
                    data.at4(t, 1, y, x) = clamp1(v * 0.6 + 0.1 + tv);
                    data.at4(t, 2, y, x) = clamp1(-v * 0.4 + tv);
                }
            phase += speed + jitter * 0.8 * rng.next_normal();
            tex.advance(rng);
        }
    } else if (spec.motif == "two_phase_scene") {
        const double fa = param(spec.params, "fa", 2.0);
        const double fb = param(spec.params, "fb", 2.0);
        double pa = rng.next_uniform() * 2.0 * PI, pb = rng.next_uniform() * 2.0 * PI;
        for (std::size_t t = 0; t < n; ++t) {
            double u = static_cast<double>(t) / nf;
            double blend = std::max(0.0, std::min(1.0, (u - 0.45) / 0.1));
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double tv = tex_at(x, y);
                    double a = std::sin(2.0 * PI * fa * static_cast<double>(y) / static_cast<double>(h) + pa) * 0.6;
                    double b = std::sin(2.0 * PI * fb * static_cast<double>(x) / static_cast<double>(w) + pb) * 0.6;
                    double v = (1.0 - blend) * a + blend * b;
                    data.at4(t, 0, y, x) = clamp1(v + tv);
                    data.at4(t, 1, y, x) = clamp1(v * 0.8 + 0.05 * (blend * 2.0 - 1.0) + tv);
                    data.at4(t, 2, y, x) = clamp1(v * 0.9 + tv);
                }
            pa += jitter * 0.3 * rng.next_normal();
            pb += jitter * 0.3 * rng.next_normal();
            tex.advance(rng);
        }
    } else {
        throw std::invalid_argument("generate_dataset: unknown motif " + spec.motif);
    }
    return ToyLatentVideo(std::move(data));
}

}  // namespace

std::vector<DatasetItem> generate_dataset(const std::vector<SyntheticVideoSpec>& specs,
                                          std::size_t n_frames, std::uint64_t seed,
                                          std::size_t height, std::size_t width) {
    if (specs.empty()) throw std::invalid_argument("generate_dataset: empty spec list");
    if (n_frames < 2) throw std::invalid_argument("generate_dataset: need n_frames >= 2");
    for (const auto& spec : specs) {
        if (spec.motif == "growing_disk") {
            double r0 = param(spec.params, "r0", 1.0), r1 = param(spec.params, "r1", 5.0);
            if (!(r0 > 0.0) || !(r1 > r0))
                throw std::invalid_argument("generate_dataset: growing_disk needs 0 < r0 < r1");
        }
    }
    std::vector<DatasetItem> out;
    out.reserve(specs.size());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        SeededRng rng = SeededRng(seed).split(i);
        out.push_back(DatasetItem{render(specs[i], n_frames, height, width, rng), specs[i].caption});
    }
    return out;
}

std::vector<SyntheticVideoSpec> default_dataset_specs() {
    std::vector<SyntheticVideoSpec> specs;
    const std::string cap_color = "red fades into blue";
    for (double fx : {1.0, 2.0})
        for (double fy : {1.0, 3.0})
            specs.push_back({"color_transition", {{"fx", fx}, {"fy", fy}}, cap_color});
    const std::string cap_disk = "a bright disk grows larger";
    specs.push_back({"growing_disk", {{"r0", 1.0}, {"r1", 5.0}}, cap_disk});
    specs.push_back({"growing_disk", {{"r0", 1.5}, {"r1", 6.0}}, cap_disk});
    specs.push_back({"growing_disk", {{"r0", 2.0}, {"r1", 6.5}}, cap_disk});
    specs.push_back({"growing_disk", {{"r0", 1.0}, {"r1", 6.5}}, cap_disk});
    const std::string cap_grad = "a smooth gradient drifts sideways";
    for (double speed : {0.5, 1.0, 1.5, 2.0})
        specs.push_back({"moving_gradient", {{"speed", speed}}, cap_grad});
    const std::string cap_phase = "horizontal stripes become vertical stripes";
    specs.push_back({"two_phase_scene", {{"fa", 2.0}, {"fb", 2.0}}, cap_phase});
    specs.push_back({"two_phase_scene", {{"fa", 2.0}, {"fb", 3.0}}, cap_phase});
    specs.push_back({"two_phase_scene", {{"fa", 3.0}, {"fb", 2.0}}, cap_phase});
    specs.push_back({"two_phase_scene", {{"fa", 3.0}, {"fb", 3.0}}, cap_phase});
    return specs;
}

std::vector<std::string> default_vocab() {
    std::set<std::string> words;
    for (const auto& spec : default_dataset_specs())
        for (const auto& tok : tokenize_whitespace(spec.caption)) words.insert(tok);
    for (const char* extra : {"slowly", "then", "fully", "small", "large", "dark",
                              "scene", "the", "grown", "starts", "growing", "tiny",
                              "appears", "turns", "to", "from", "shifts", "moves"})
        words.insert(extra);
    std::vector<std::string> vocab = {"<unk>"};
    vocab.insert(vocab.end(), words.begin(), words.end());
    return vocab;
}

}  // namespace vstar
