#include "vstar/vsp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vstar/rng.hpp"

namespace vstar {

namespace {

std::vector<double> slerp(const std::vector<double>& a, const std::vector<double>& b, double w) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    na = std::sqrt(na);
    nb = std::sqrt(nb);
    std::vector<double> out(a.size());
    double cosang = (na > 0 && nb > 0) ? dot / (na * nb) : 1.0;
    if (cosang > 1.0 - 1e-9 || na == 0.0 || nb == 0.0) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = (1.0 - w) * a[i] + w * b[i];
        return out;
    }
    double ang = std::acos(std::max(-1.0, std::min(1.0, cosang)));
    double s = std::sin(ang);
    double wa = std::sin((1.0 - w) * ang) / s;
    double wb = std::sin(w * ang) / s;
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
    return out;
}

}  // namespace

FrameConditioningSchedule build_schedule(const Matrix& stage_embeddings, std::size_t n_frames,
                                         InterpolationKind kind) {
    const std::size_t k = stage_embeddings.rows();
    const std::size_t d = stage_embeddings.cols();
    if (k == 0 || d == 0) throw std::invalid_argument("build_schedule: empty stage embeddings");
    if (n_frames == 0) throw std::invalid_argument("build_schedule: n_frames must be >= 1");
    if (k > n_frames) throw std::invalid_argument("build_schedule: more stages than frames");

    FrameConditioningSchedule sched;
    sched.embeddings = Matrix(n_frames, d);

    if (k == 1) {
        for (std::size_t t = 0; t < n_frames; ++t)
            for (std::size_t j = 0; j < d; ++j)
                sched.embeddings.at(t, j) = stage_embeddings.at(0, j);
        sched.anchors.emplace_back(0, 0);
        return sched;
    }

    std::vector<std::size_t> anchor(k);
    for (std::size_t s = 0; s < k; ++s) {
        anchor[s] = static_cast<std::size_t>(std::lround(
            static_cast<double>(s) * static_cast<double>(n_frames - 1) / static_cast<double>(k - 1)));
        sched.anchors.emplace_back(static_cast<int>(anchor[s]), static_cast<int>(s));
    }

    for (std::size_t seg = 0; seg + 1 < k; ++seg) {
        const std::size_t a = anchor[seg], b = anchor[seg + 1];
        for (std::size_t t = a; t <= b; ++t) {
            double w = (b == a) ? 0.0 : static_cast<double>(t - a) / static_cast<double>(b - a);
            if (kind == InterpolationKind::spherical) {
                std::vector<double> ea(d), eb(d);
                for (std::size_t j = 0; j < d; ++j) {
                    ea[j] = stage_embeddings.at(seg, j);
                    eb[j] = stage_embeddings.at(seg + 1, j);
                }
                auto row = slerp(ea, eb, w);
                for (std::size_t j = 0; j < d; ++j) sched.embeddings.at(t, j) = row[j];
            } else {
                for (std::size_t j = 0; j < d; ++j)
                    sched.embeddings.at(t, j) = (1.0 - w) * stage_embeddings.at(seg, j) +
                                                w * stage_embeddings.at(seg + 1, j);
            }
        }
    }
    // Anchor frames carry stage embeddings exactly, untouched by rounding.
    for (std::size_t s = 0; s < k; ++s)
        for (std::size_t j = 0; j < d; ++j)
            sched.embeddings.at(anchor[s], j) = stage_embeddings.at(s, j);
    return sched;
}

TextEncoder TextEncoder::seeded(std::vector<std::string> vocab, std::size_t embed_dim,
                                std::size_t out_dim, std::uint64_t seed) {
    if (vocab.empty() || vocab[0] != "<unk>")
        throw std::invalid_argument("TextEncoder: vocab[0] must be <unk>");
    TextEncoder enc;
    enc.vocab = std::move(vocab);
    SeededRng rng(seed);
    enc.token_embeddings = Matrix(enc.vocab.size(), embed_dim);
    rng.fill_normal(enc.token_embeddings);
    enc.proj_weight = Matrix(out_dim, embed_dim);
    SeededRng wrng = rng.split(1);
    wrng.fill_normal(enc.proj_weight);
    double scale = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (double& x : enc.proj_weight.values()) x *= scale;
    enc.proj_bias.assign(out_dim, 0.0);
    return enc;
}

int TextEncoder::token_id(const std::string& token) const {
    for (std::size_t i = 1; i < vocab.size(); ++i)
        if (vocab[i] == token) return static_cast<int>(i);
    return 0;  // UNK
}

std::vector<std::string> tokenize_whitespace(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream iss(text);
    std::string tok;
    while (iss >> tok) {
        std::string clean;
        for (char c : tok)
            if (std::isalnum(static_cast<unsigned char>(c)))
                clean.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        if (!clean.empty()) out.push_back(clean);
    }
    return out;
}

std::vector<double> toy_text_encode(const std::string& prompt, const TextEncoder& encoder) {
    auto tokens = tokenize_whitespace(prompt);
    if (tokens.empty()) throw std::invalid_argument("toy_text_encode: empty prompt");

    const std::size_t e = encoder.token_embeddings.cols();
    std::vector<double> mean(e, 0.0);
    for (const auto& tok : tokens) {
        int id = encoder.token_id(tok);
        for (std::size_t j = 0; j < e; ++j)
            mean[j] += encoder.token_embeddings.at(static_cast<std::size_t>(id), j);
    }
    for (double& x : mean) x /= static_cast<double>(tokens.size());

    const std::size_t d = encoder.out_dim();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        double s = encoder.proj_bias[i];
        for (std::size_t j = 0; j < e; ++j) s += encoder.proj_weight.at(i, j) * mean[j];
        out[i] = s;
    }
    return out;
}

Matrix encode_stages(const Synopsis& synopsis, const TextEncoder& encoder) {
    if (synopsis.stages.empty()) throw std::invalid_argument("encode_stages: empty synopsis");
    Matrix out(synopsis.stages.size(), encoder.out_dim());
    for (std::size_t s = 0; s < synopsis.stages.size(); ++s) {
        auto row = toy_text_encode(synopsis.stages[s], encoder);
        for (std::size_t j = 0; j < row.size(); ++j) out.at(s, j) = row[j];
    }
    return out;
}

}  // namespace vstar
