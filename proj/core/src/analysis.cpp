#include "vstar/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "vstar/rng.hpp"

namespace vstar {

namespace {

constexpr std::uint64_t PROJECTION_SEED = 0x7652E7A1D9C44B10ULL;
constexpr std::size_t PROJECTION_DIM = 64;

std::vector<std::vector<double>> frame_features(const ToyLatentVideo& video, FeatureMode mode) {
    const std::size_t n = video.frames();
    const std::size_t fsz = video.frame_size();
    std::vector<std::vector<double>> feats(n);
    if (mode == FeatureMode::pixel_cosine) {
        for (std::size_t t = 0; t < n; ++t)
            feats[t].assign(video.frame(t), video.frame(t) + fsz);
        return feats;
    }
    // Fixed seeded projection, regenerated per call; same seed -> same map.
    SeededRng rng(PROJECTION_SEED);
    Matrix proj(PROJECTION_DIM, fsz);
    rng.fill_normal(proj);
    for (std::size_t t = 0; t < n; ++t) {
        feats[t].assign(PROJECTION_DIM, 0.0);
        const double* f = video.frame(t);
        for (std::size_t i = 0; i < PROJECTION_DIM; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < fsz; ++j) s += proj.at(i, j) * f[j];
            feats[t][i] = s;
        }
    }
    return feats;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double band_energy_ratio(const TemporalAttentionMap& a, std::size_t k) {
    const std::size_t n = a.values.rows();
    if (k >= n) throw std::invalid_argument("band_energy_ratio: k out of range");
    double in_band = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double v = a.values.at(i, j);
            total += v;
            std::size_t off = i > j ? i - j : j - i;
            if (off <= k) in_band += v;
        }
    if (total == 0.0) return 0.0;
    return in_band / total;
}

SimilarityMatrix similarity_matrix(const ToyLatentVideo& video, FeatureMode mode) {
    const std::size_t n = video.frames();
    auto feats = frame_features(video, mode);

    std::vector<bool> zero_norm(n, false);
    for (std::size_t t = 0; t < n; ++t) {
        double nn = 0.0;
        for (double x : feats[t]) nn += x * x;
        if (nn == 0.0) {
            zero_norm[t] = true;
            std::fprintf(stderr, "[vstar] warning: similarity_matrix frame %zu has zero norm\n", t);
        }
    }

    SimilarityMatrix sim;
    sim.feature_mode = mode;
    sim.values = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        sim.values.at(i, i) = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = (zero_norm[i] || zero_norm[j]) ? 0.0 : cosine(feats[i], feats[j]);
            sim.values.at(i, j) = v;
            sim.values.at(j, i) = v;
        }
    }
    return sim;
}

std::vector<IntervalHistogram> interval_similarity_histogram(
    const std::vector<ToyLatentVideo>& videos, const std::vector<int>& intervals,
    std::size_t bins, FeatureMode mode) {
    if (videos.empty())
        throw std::invalid_argument("interval_similarity_histogram: empty video list");
    if (bins == 0) throw std::invalid_argument("interval_similarity_histogram: bins must be >= 1");
    std::size_t min_len = videos[0].frames();
    for (const auto& v : videos) min_len = std::min(min_len, v.frames());
    for (int d : intervals)
        if (d <= 0 || static_cast<std::size_t>(d) >= min_len)
            throw std::invalid_argument("interval_similarity_histogram: interval out of range");

    std::vector<IntervalHistogram> out;
    for (int d : intervals) {
        IntervalHistogram h;
        h.interval = d;
        h.counts.assign(bins, 0);
        for (std::size_t b = 0; b < bins; ++b) {
            h.bin_left.push_back(-1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins));
            h.bin_right.push_back(-1.0 + 2.0 * static_cast<double>(b + 1) / static_cast<double>(bins));
        }
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& video : videos) {
            auto sim = similarity_matrix(video, mode);
            for (std::size_t t = 0; t + static_cast<std::size_t>(d) < video.frames(); ++t) {
                double v = sim.values.at(t, t + static_cast<std::size_t>(d));
                sum += v;
                ++count;
                auto b = static_cast<std::size_t>((v + 1.0) / 2.0 * static_cast<double>(bins));
                if (b >= bins) b = bins - 1;  // v == 1 lands in the top bin
                ++h.counts[b];
            }
        }
        h.mean_similarity = count ? sum / static_cast<double>(count) : 0.0;
        out.push_back(std::move(h));
    }
    return out;
}

double dynamics_score(const ToyLatentVideo& video) {
    const std::size_t n = video.frames();
    if (n < 2) throw std::invalid_argument("dynamics_score: need at least 2 frames");
    const std::size_t fsz = video.frame_size();
    double acc = 0.0;
    for (std::size_t t = 0; t + 1 < n; ++t) {
        const double* a = video.frame(t);
        const double* b = video.frame(t + 1);
        double s = 0.0;
        for (std::size_t i = 0; i < fsz; ++i) {
            double d = b[i] - a[i];
            s += d * d;
        }
        acc += std::sqrt(s / static_cast<double>(fsz));
    }
    return acc / static_cast<double>(n - 1);
}

BandProfile band_profile(const TemporalAttentionMap& a) {
    const std::size_t n = a.values.rows();
    BandProfile p;
    p.mass.assign(n, 0.0);
    std::vector<std::size_t> counts(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            std::size_t off = i > j ? i - j : j - i;
            p.mass[off] += a.values.at(i, j);
            ++counts[off];
        }
    for (std::size_t off = 0; off < n; ++off)
        if (counts[off]) p.mass[off] /= static_cast<double>(counts[off]);
    return p;
}

}  // namespace vstar
