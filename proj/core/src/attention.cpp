#include "vstar/attention.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vstar/linalg.hpp"

namespace vstar {

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 3 || !q.same_shape(k) || !q.same_shape(v))
        throw std::invalid_argument("temporal_self_attention: q/k/v must share shape (S,N,d)");
}

bool is_row_stochastic(const Matrix& m, double tol = 1e-6) {
    if (m.rows() != m.cols()) return false;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (m.at(i, j) < -tol) return false;
            s += m.at(i, j);
        }
        if (std::abs(s - 1.0) > tol) return false;
    }
    return true;
}

}  // namespace

void apply_positional_encoding(Tensor& q, Tensor& k, const std::vector<int>& frame_indices,
                               PositionalEncodingVariant variant) {
    check_qkv(q, k, k);
    const std::size_t s_dim = q.dim(0), n = q.dim(1), d = q.dim(2);
    if (frame_indices.size() != n)
        throw std::invalid_argument("apply_positional_encoding: frame index count != N");
    for (std::size_t t = 1; t < n; ++t)
        if (frame_indices[t] <= frame_indices[t - 1])
            throw std::invalid_argument("apply_positional_encoding: frame indices must be strictly increasing");

    if (variant == PositionalEncodingVariant::none) return;

    if (variant == PositionalEncodingVariant::absolute_sinusoidal) {
        // pe[pos][2i] = sin(pos / 10000^(2i/d)), pe[pos][2i+1] = cos(...)
        std::vector<double> pe(n * d);
        for (std::size_t t = 0; t < n; ++t) {
            double pos = static_cast<double>(frame_indices[t]);
            for (std::size_t j = 0; j < d; ++j) {
                std::size_t pair = j / 2;
                double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(d));
                pe[t * d + j] = (j % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
            }
        }
        for (std::size_t s = 0; s < s_dim; ++s)
            for (std::size_t t = 0; t < n; ++t)
                for (std::size_t j = 0; j < d; ++j) {
                    q.at3(s, t, j) += pe[t * d + j];
                    k.at3(s, t, j) += pe[t * d + j];
                }
        return;
    }

    // rotary_relative: rotate (2i, 2i+1) pairs by theta_i * pos so that
    // q_i . k_j depends on i - j only.
    if (d % 2 != 0)
        throw std::invalid_argument("apply_positional_encoding: rotary requires even d");
    for (std::size_t s = 0; s < s_dim; ++s)
        for (std::size_t t = 0; t < n; ++t) {
            double pos = static_cast<double>(frame_indices[t]);
            for (std::size_t pair = 0; pair < d / 2; ++pair) {
                double theta = pos * std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(d));
                double c = std::cos(theta), sn = std::sin(theta);
                double q0 = q.at3(s, t, 2 * pair), q1 = q.at3(s, t, 2 * pair + 1);
                q.at3(s, t, 2 * pair) = q0 * c - q1 * sn;
                q.at3(s, t, 2 * pair + 1) = q0 * sn + q1 * c;
                double k0 = k.at3(s, t, 2 * pair), k1 = k.at3(s, t, 2 * pair + 1);
                k.at3(s, t, 2 * pair) = k0 * c - k1 * sn;
                k.at3(s, t, 2 * pair + 1) = k0 * sn + k1 * c;
            }
        }
}

AttentionResult temporal_self_attention(const Tensor& q_in, const Tensor& k_in, const Tensor& v,
                                        const AttentionHook& hook,
                                        PositionalEncodingVariant pe, int n_heads, int level) {
    check_qkv(q_in, k_in, v);
    const std::size_t s_dim = q_in.dim(0), n = q_in.dim(1), d = q_in.dim(2);
    if (n_heads < 1 || d % static_cast<std::size_t>(n_heads) != 0)
        throw std::invalid_argument("temporal_self_attention: d must be divisible by n_heads");
    const std::size_t dh = d / static_cast<std::size_t>(n_heads);

    const bool active = hook.applies_to(level);
    const bool do_reg = active && hook.mode == HookMode::regularize;
    const bool do_rep = active && hook.mode == HookMode::replace;
    const bool do_cap = active && hook.wants_capture();
    if ((do_reg || do_rep) && (!hook.matrix || hook.matrix->n != n))
        throw std::invalid_argument("temporal_self_attention: hook matrix missing or wrong size");
    if (do_rep && !is_row_stochastic(hook.matrix->values))
        throw std::invalid_argument("temporal_self_attention: replace matrix not row-stochastic");

    // PE is applied per head slice, matching the in-model attention layers.
    Tensor q = q_in;
    Tensor k = k_in;
    std::vector<int> frames(n);
    for (std::size_t t = 0; t < n; ++t) frames[t] = static_cast<int>(t);
    if (pe != PositionalEncodingVariant::none) {
        for (int h = 0; h < n_heads; ++h) {
            const std::size_t off = static_cast<std::size_t>(h) * dh;
            Tensor qh({s_dim, n, dh}), kh({s_dim, n, dh});
            for (std::size_t s = 0; s < s_dim; ++s)
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t e = 0; e < dh; ++e) {
                        qh.at3(s, t, e) = q.at3(s, t, off + e);
                        kh.at3(s, t, e) = k.at3(s, t, off + e);
                    }
            apply_positional_encoding(qh, kh, frames, pe);
            for (std::size_t s = 0; s < s_dim; ++s)
                for (std::size_t t = 0; t < n; ++t)
                    for (std::size_t e = 0; e < dh; ++e) {
                        q.at3(s, t, off + e) = qh.at3(s, t, e);
                        k.at3(s, t, off + e) = kh.at3(s, t, e);
                    }
        }
    }

    AttentionResult res;
    res.output = Tensor({s_dim, n, d});
    Matrix cap_sum(n, n);

    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Matrix logits(n, n);
    for (std::size_t s = 0; s < s_dim; ++s) {
        for (int h = 0; h < n_heads; ++h) {
            const std::size_t off = static_cast<std::size_t>(h) * dh;
            Matrix a;
            if (do_rep) {
                a = hook.matrix->values;
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        double dot = 0.0;
                        for (std::size_t e = 0; e < dh; ++e)
                            dot += q.at3(s, i, off + e) * k.at3(s, j, off + e);
                        logits.at(i, j) = dot * scale;
                    }
                a = softmax_rows(do_reg ? regularize_logits(logits, *hook.matrix) : logits);
            }
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    double aij = a.at(i, j);
                    for (std::size_t e = 0; e < dh; ++e)
                        res.output.at3(s, i, off + e) += aij * v.at3(s, j, off + e);
                }
            if (do_cap)
                for (std::size_t i = 0; i < n * n; ++i) cap_sum.data()[i] += a.data()[i];
        }
    }

    if (do_cap) {
        const double denom = static_cast<double>(s_dim) * static_cast<double>(n_heads);
        for (double& x : cap_sum.values()) x /= denom;
        res.captured.push_back(TemporalAttentionMap{level, -1, -1, std::move(cap_sum)});
    }
    return res;
}

}  // namespace vstar
