#include "nn/ops.hpp"

#include <cmath>
#include <stdexcept>

#include "vstar/linalg.hpp"

namespace vstar::nn {

namespace {

constexpr double NORM_EPS = 1e-5;

// y[n,co,s] = sum_ci w[co,ci] * x[n,ci,s]  (1x1 channel projection)
void chan_matmul(Tensor& y, const Tensor& w, const Tensor& x) {
    const std::size_t n = x.dim(0), ci = x.dim(1), s = x.dim(2) * x.dim(3);
    const std::size_t co = w.dim(0);
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t o = 0; o < co; ++o) {
            double* yp = y.data() + (nn * co + o) * s;
            for (std::size_t i = 0; i < ci; ++i) {
                const double wv = w.data()[o * ci + i];
                if (wv == 0.0) continue;
                const double* xp = x.data() + (nn * ci + i) * s;
                for (std::size_t e = 0; e < s; ++e) yp[e] += wv * xp[e];
            }
        }
}

// dx[n,ci,s] += sum_co w[co,ci] * dy[n,co,s]
void chan_matmul_bwd_input(Tensor& dx, const Tensor& w, const Tensor& dy) {
    const std::size_t n = dx.dim(0), ci = dx.dim(1), s = dx.dim(2) * dx.dim(3);
    const std::size_t co = w.dim(0);
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t o = 0; o < co; ++o) {
            const double* dyp = dy.data() + (nn * co + o) * s;
            for (std::size_t i = 0; i < ci; ++i) {
                const double wv = w.data()[o * ci + i];
                if (wv == 0.0) continue;
                double* dxp = dx.data() + (nn * ci + i) * s;
                for (std::size_t e = 0; e < s; ++e) dxp[e] += wv * dyp[e];
            }
        }
}

// dw[co,ci] += sum_{n,s} dy[n,co,s] * x[n,ci,s]
void chan_matmul_bwd_weight(Tensor& dw, const Tensor& dy, const Tensor& x) {
    const std::size_t n = x.dim(0), ci = x.dim(1), s = x.dim(2) * x.dim(3);
    const std::size_t co = dy.dim(1);
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t o = 0; o < co; ++o) {
            const double* dyp = dy.data() + (nn * co + o) * s;
            for (std::size_t i = 0; i < ci; ++i) {
                const double* xp = x.data() + (nn * ci + i) * s;
                double acc = 0.0;
                for (std::size_t e = 0; e < s; ++e) acc += dyp[e] * xp[e];
                dw.data()[o * ci + i] += acc;
            }
        }
}

struct PeTables {
    std::vector<double> sin_t, cos_t;  // (frame, j) tables; empty for pe none
};

PeTables build_pe(PositionalEncodingVariant pe, std::size_t n, std::size_t dh) {
    PeTables t;
    if (pe == PositionalEncodingVariant::none) return t;
    if (pe == PositionalEncodingVariant::rotary_relative && dh % 2 != 0)
        throw std::invalid_argument("temporal attention: rotary requires even head dim");
    const std::size_t count = pe == PositionalEncodingVariant::rotary_relative ? dh / 2 : dh;
    t.sin_t.resize(n * count);
    t.cos_t.resize(n * count);
    for (std::size_t f = 0; f < n; ++f)
        for (std::size_t j = 0; j < count; ++j) {
            std::size_t pair = pe == PositionalEncodingVariant::rotary_relative ? j : j / 2;
            double freq = std::pow(10000.0, -2.0 * static_cast<double>(pair) / static_cast<double>(dh));
            double ang = static_cast<double>(f) * freq;
            t.sin_t[f * count + j] = std::sin(ang);
            t.cos_t[f * count + j] = std::cos(ang);
        }
    return t;
}

}  // namespace

NodePtr conv2d(Tape* tape, const NodePtr& x, const NodePtr& w, const NodePtr& b, int stride,
               int pad) {
    const auto& xv = x->value;
    const auto& wv = w->value;
    const std::size_t n = xv.dim(0), ci = xv.dim(1), h = xv.dim(2), ww = xv.dim(3);
    const std::size_t co = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != ci) throw std::invalid_argument("conv2d: channel mismatch");
    const std::size_t oh = (h + 2 * static_cast<std::size_t>(pad) - k) / static_cast<std::size_t>(stride) + 1;
    const std::size_t ow = (ww + 2 * static_cast<std::size_t>(pad) - k) / static_cast<std::size_t>(stride) + 1;

    Tensor out({n, co, oh, ow});
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t o = 0; o < co; ++o) {
            double* yp = out.data() + (nn * co + o) * oh * ow;
            const double bias = b->value.data()[o];
            for (std::size_t e = 0; e < oh * ow; ++e) yp[e] = bias;
            for (std::size_t i = 0; i < ci; ++i)
                for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const double wgt = wv.data()[((o * ci + i) * k + ky) * k + kx];
                        if (wgt == 0.0) continue;
                        const double* xp = xv.data() + (nn * ci + i) * h * ww;
                        for (std::size_t oy = 0; oy < oh; ++oy) {
                            const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
                            if (iy < 0 || iy >= static_cast<long>(h)) continue;
                            double* yrow = yp + oy * ow;
                            const double* xrow = xp + static_cast<std::size_t>(iy) * ww;
                            for (std::size_t ox = 0; ox < ow; ++ox) {
                                const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
                                if (ix < 0 || ix >= static_cast<long>(ww)) continue;
                                yrow[ox] += wgt * xrow[static_cast<std::size_t>(ix)];
                            }
                        }
                    }
        }

    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, w, b, y, stride, pad, n, ci, h, ww, co, k]() {
            const std::size_t oh = y->grad.dim(2), ow = y->grad.dim(3);
            for (std::size_t nn = 0; nn < n; ++nn)
                for (std::size_t o = 0; o < co; ++o) {
                    const double* gyp = y->grad.data() + (nn * co + o) * oh * ow;
                    double gb = 0.0;
                    for (std::size_t e = 0; e < oh * ow; ++e) gb += gyp[e];
                    b->grad.data()[o] += gb;
                    for (std::size_t i = 0; i < ci; ++i)
                        for (std::size_t ky = 0; ky < k; ++ky)
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const double wgt = w->value.data()[((o * ci + i) * k + ky) * k + kx];
                                double gw = 0.0;
                                const double* xp = x->value.data() + (nn * ci + i) * h * ww;
                                double* gxp = x->grad.data() + (nn * ci + i) * h * ww;
                                for (std::size_t oy = 0; oy < oh; ++oy) {
                                    const long iy = static_cast<long>(oy) * stride - pad + static_cast<long>(ky);
                                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                                    const double* gyrow = gyp + oy * ow;
                                    const double* xrow = xp + static_cast<std::size_t>(iy) * ww;
                                    double* gxrow = gxp + static_cast<std::size_t>(iy) * ww;
                                    for (std::size_t ox = 0; ox < ow; ++ox) {
                                        const long ix = static_cast<long>(ox) * stride - pad + static_cast<long>(kx);
                                        if (ix < 0 || ix >= static_cast<long>(ww)) continue;
                                        gw += gyrow[ox] * xrow[static_cast<std::size_t>(ix)];
                                        gxrow[static_cast<std::size_t>(ix)] += wgt * gyrow[ox];
                                    }
                                }
                                w->grad.data()[((o * ci + i) * k + ky) * k + kx] += gw;
                            }
                }
        });
    return y;
}

NodePtr temporal_conv(Tape* tape, const NodePtr& x, const NodePtr& w) {
    const auto& xv = x->value;
    const std::size_t n = xv.dim(0), c = xv.dim(1), s = xv.dim(2) * xv.dim(3);
    if (w->value.dim(0) != c || w->value.dim(1) != 3)
        throw std::invalid_argument("temporal_conv: weight must be (C,3)");

    Tensor out(xv.shape());
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t ch = 0; ch < c; ++ch) {
            double* yp = out.data() + (nn * c + ch) * s;
            for (int k = 0; k < 3; ++k) {
                const long src = static_cast<long>(nn) + k - 1;
                if (src < 0 || src >= static_cast<long>(n)) continue;
                const double wgt = w->value.data()[ch * 3 + static_cast<std::size_t>(k)];
                const double* xp = xv.data() + (static_cast<std::size_t>(src) * c + ch) * s;
                for (std::size_t e = 0; e < s; ++e) yp[e] += wgt * xp[e];
            }
        }

    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, w, y, n, c, s]() {
            for (std::size_t nn = 0; nn < n; ++nn)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double* gyp = y->grad.data() + (nn * c + ch) * s;
                    for (int k = 0; k < 3; ++k) {
                        const long src = static_cast<long>(nn) + k - 1;
                        if (src < 0 || src >= static_cast<long>(n)) continue;
                        const double wgt = w->value.data()[ch * 3 + static_cast<std::size_t>(k)];
                        const double* xp =
                            x->value.data() + (static_cast<std::size_t>(src) * c + ch) * s;
                        double* gxp = x->grad.data() + (static_cast<std::size_t>(src) * c + ch) * s;
                        double gw = 0.0;
                        for (std::size_t e = 0; e < s; ++e) {
                            gw += gyp[e] * xp[e];
                            gxp[e] += wgt * gyp[e];
                        }
                        w->grad.data()[ch * 3 + static_cast<std::size_t>(k)] += gw;
                    }
                }
        });
    return y;
}

NodePtr frame_norm(Tape* tape, const NodePtr& x, const NodePtr& gamma, const NodePtr& beta) {
    const auto& xv = x->value;
    const std::size_t n = xv.dim(0), c = xv.dim(1), s = xv.dim(2) * xv.dim(3);
    const std::size_t fsz = c * s;

    Tensor out(xv.shape());
    auto xhat = std::make_shared<Tensor>(xv.shape());
    auto inv_std = std::make_shared<std::vector<double>>(n);
    for (std::size_t nn = 0; nn < n; ++nn) {
        const double* xp = xv.data() + nn * fsz;
        double mean = 0.0;
        for (std::size_t e = 0; e < fsz; ++e) mean += xp[e];
        mean /= static_cast<double>(fsz);
        double var = 0.0;
        for (std::size_t e = 0; e < fsz; ++e) {
            double d = xp[e] - mean;
            var += d * d;
        }
        var /= static_cast<double>(fsz);
        const double inv = 1.0 / std::sqrt(var + NORM_EPS);
        (*inv_std)[nn] = inv;
        double* xh = xhat->data() + nn * fsz;
        double* yp = out.data() + nn * fsz;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double g = gamma->value.data()[ch], bt = beta->value.data()[ch];
            for (std::size_t e = 0; e < s; ++e) {
                double vv = (xp[ch * s + e] - mean) * inv;
                xh[ch * s + e] = vv;
                yp[ch * s + e] = g * vv + bt;
            }
        }
    }

    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, gamma, beta, y, xhat, inv_std, n, c, s, fsz]() {
            std::vector<double> dxhat(fsz);
            for (std::size_t nn = 0; nn < n; ++nn) {
                const double* gyp = y->grad.data() + nn * fsz;
                const double* xh = xhat->data() + nn * fsz;
                double m1 = 0.0, m2 = 0.0;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double g = gamma->value.data()[ch];
                    double dg = 0.0, db = 0.0;
                    for (std::size_t e = 0; e < s; ++e) {
                        const double gy = gyp[ch * s + e];
                        dg += gy * xh[ch * s + e];
                        db += gy;
                        const double dxh = gy * g;
                        dxhat[ch * s + e] = dxh;
                        m1 += dxh;
                        m2 += dxh * xh[ch * s + e];
                    }
                    gamma->grad.data()[ch] += dg;
                    beta->grad.data()[ch] += db;
                }
                m1 /= static_cast<double>(fsz);
                m2 /= static_cast<double>(fsz);
                const double inv = (*inv_std)[nn];
                double* gxp = x->grad.data() + nn * fsz;
                for (std::size_t e = 0; e < fsz; ++e)
                    gxp[e] += inv * (dxhat[e] - m1 - xh[e] * m2);
            }
        });
    return y;
}

NodePtr silu(Tape* tape, const NodePtr& x) {
    Tensor out(x->value.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) {
        const double v = x->value.data()[i];
        out.data()[i] = v / (1.0 + std::exp(-v));
    }
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, y]() {
            for (std::size_t i = 0; i < x->value.numel(); ++i) {
                const double v = x->value.data()[i];
                const double sg = 1.0 / (1.0 + std::exp(-v));
                x->grad.data()[i] += y->grad.data()[i] * sg * (1.0 + v * (1.0 - sg));
            }
        });
    return y;
}

NodePtr silu_vec(Tape* tape, const NodePtr& x) { return silu(tape, x); }

NodePtr add(Tape* tape, const NodePtr& a, const NodePtr& b) {
    if (!a->value.same_shape(b->value)) throw std::invalid_argument("add: shape mismatch");
    Tensor out(a->value.shape());
    for (std::size_t i = 0; i < out.numel(); ++i)
        out.data()[i] = a->value.data()[i] + b->value.data()[i];
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([a, b, y]() {
            for (std::size_t i = 0; i < y->grad.numel(); ++i) {
                a->grad.data()[i] += y->grad.data()[i];
                b->grad.data()[i] += y->grad.data()[i];
            }
        });
    return y;
}

NodePtr add_channel_bias(Tape* tape, const NodePtr& x, const NodePtr& bias) {
    const std::size_t n = x->value.dim(0), c = x->value.dim(1),
                      s = x->value.dim(2) * x->value.dim(3);
    if (bias->value.numel() != c) throw std::invalid_argument("add_channel_bias: bias size != C");
    Tensor out(x->value.shape());
    for (std::size_t nn = 0; nn < n; ++nn)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double bval = bias->value.data()[ch];
            const double* xp = x->value.data() + (nn * c + ch) * s;
            double* yp = out.data() + (nn * c + ch) * s;
            for (std::size_t e = 0; e < s; ++e) yp[e] = xp[e] + bval;
        }
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, bias, y, n, c, s]() {
            for (std::size_t nn = 0; nn < n; ++nn)
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const double* gyp = y->grad.data() + (nn * c + ch) * s;
                    double* gxp = x->grad.data() + (nn * c + ch) * s;
                    double gb = 0.0;
                    for (std::size_t e = 0; e < s; ++e) {
                        gxp[e] += gyp[e];
                        gb += gyp[e];
                    }
                    bias->grad.data()[ch] += gb;
                }
        });
    return y;
}

NodePtr concat_channels(Tape* tape, const NodePtr& a, const NodePtr& b) {
    const std::size_t n = a->value.dim(0), ca = a->value.dim(1), cb = b->value.dim(1),
                      h = a->value.dim(2), w = a->value.dim(3);
    if (b->value.dim(0) != n || b->value.dim(2) != h || b->value.dim(3) != w)
        throw std::invalid_argument("concat_channels: shape mismatch");
    const std::size_t s = h * w;
    Tensor out({n, ca + cb, h, w});
    for (std::size_t nn = 0; nn < n; ++nn) {
        std::copy(a->value.data() + nn * ca * s, a->value.data() + (nn + 1) * ca * s,
                  out.data() + nn * (ca + cb) * s);
        std::copy(b->value.data() + nn * cb * s, b->value.data() + (nn + 1) * cb * s,
                  out.data() + nn * (ca + cb) * s + ca * s);
    }
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([a, b, y, n, ca, cb, s]() {
            for (std::size_t nn = 0; nn < n; ++nn) {
                const double* gy = y->grad.data() + nn * (ca + cb) * s;
                double* ga = a->grad.data() + nn * ca * s;
                double* gb = b->grad.data() + nn * cb * s;
                for (std::size_t e = 0; e < ca * s; ++e) ga[e] += gy[e];
                for (std::size_t e = 0; e < cb * s; ++e) gb[e] += gy[ca * s + e];
            }
        });
    return y;
}

NodePtr upsample_nearest2x(Tape* tape, const NodePtr& x) {
    const std::size_t n = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2),
                      w = x->value.dim(3);
    Tensor out({n, c, h * 2, w * 2});
    for (std::size_t nc = 0; nc < n * c; ++nc) {
        const double* xp = x->value.data() + nc * h * w;
        double* yp = out.data() + nc * 4 * h * w;
        for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
                const double v = xp[yy * w + xx];
                yp[(2 * yy) * 2 * w + 2 * xx] = v;
                yp[(2 * yy) * 2 * w + 2 * xx + 1] = v;
                yp[(2 * yy + 1) * 2 * w + 2 * xx] = v;
                yp[(2 * yy + 1) * 2 * w + 2 * xx + 1] = v;
            }
    }
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, y, n, c, h, w]() {
            for (std::size_t nc = 0; nc < n * c; ++nc) {
                double* gx = x->grad.data() + nc * h * w;
                const double* gy = y->grad.data() + nc * 4 * h * w;
                for (std::size_t yy = 0; yy < h; ++yy)
                    for (std::size_t xx = 0; xx < w; ++xx)
                        gx[yy * w + xx] += gy[(2 * yy) * 2 * w + 2 * xx] +
                                           gy[(2 * yy) * 2 * w + 2 * xx + 1] +
                                           gy[(2 * yy + 1) * 2 * w + 2 * xx] +
                                           gy[(2 * yy + 1) * 2 * w + 2 * xx + 1];
            }
        });
    return y;
}

NodePtr linear(Tape* tape, const NodePtr& x, const NodePtr& w, const NodePtr& b) {
    const std::size_t in = x->value.numel(), out_dim = w->value.dim(0);
    if (w->value.dim(1) != in || b->value.numel() != out_dim)
        throw std::invalid_argument("linear: shape mismatch");
    Tensor out({out_dim});
    for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = b->value.data()[o];
        const double* wp = w->value.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += wp[i] * x->value.data()[i];
        out.data()[o] = acc;
    }
    auto y = make_node(std::move(out));
    if (tape)
        tape->push([x, w, b, y, in, out_dim]() {
            for (std::size_t o = 0; o < out_dim; ++o) {
                const double gy = y->grad.data()[o];
                b->grad.data()[o] += gy;
                const double* wp = w->value.data() + o * in;
                double* gwp = w->grad.data() + o * in;
                for (std::size_t i = 0; i < in; ++i) {
                    gwp[i] += gy * x->value.data()[i];
                    x->grad.data()[i] += gy * wp[i];
                }
            }
        });
    return y;
}

NodePtr temporal_attention_block(Tape* tape, const NodePtr& x, const NodePtr& wq,
                                 const NodePtr& wk, const NodePtr& wv, const NodePtr& wo,
                                 int n_heads, PositionalEncodingVariant pe,
                                 const AttentionHook& hook, int level,
                                 std::vector<TemporalAttentionMap>* captured) {
    const auto& xv = x->value;
    const std::size_t n = xv.dim(0), c = xv.dim(1), s = xv.dim(2) * xv.dim(3);
    if (c % static_cast<std::size_t>(n_heads) != 0)
        throw std::invalid_argument("temporal attention: C must be divisible by heads");
    const std::size_t dh = c / static_cast<std::size_t>(n_heads);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const bool active = hook.applies_to(level);
    const bool do_reg = active && hook.mode == HookMode::regularize;
    const bool do_rep = active && hook.mode == HookMode::replace;
    const bool do_cap = active && hook.wants_capture() && captured != nullptr;
    if (tape && (do_reg || do_rep))
        throw std::logic_error("temporal attention: modifying hooks are inference-only");
    if ((do_reg || do_rep) && (!hook.matrix || hook.matrix->n != n))
        throw std::invalid_argument("temporal attention: hook matrix missing or wrong size");

    auto q = std::make_shared<Tensor>(xv.shape());
    auto k = std::make_shared<Tensor>(xv.shape());
    auto v = std::make_shared<Tensor>(xv.shape());
    chan_matmul(*q, wq->value, xv);
    chan_matmul(*k, wk->value, xv);
    chan_matmul(*v, wv->value, xv);

    const auto pet = std::make_shared<PeTables>(build_pe(pe, n, dh));
    if (pe == PositionalEncodingVariant::absolute_sinusoidal) {
        for (std::size_t f = 0; f < n; ++f)
            for (int hh = 0; hh < n_heads; ++hh)
                for (std::size_t j = 0; j < dh; ++j) {
                    const double add_v = (j % 2 == 0) ? pet->sin_t[f * dh + j] : pet->cos_t[f * dh + j];
                    double* qp = q->data() + (f * c + static_cast<std::size_t>(hh) * dh + j) * s;
                    double* kp = k->data() + (f * c + static_cast<std::size_t>(hh) * dh + j) * s;
                    for (std::size_t e = 0; e < s; ++e) {
                        qp[e] += add_v;
                        kp[e] += add_v;
                    }
                }
    } else if (pe == PositionalEncodingVariant::rotary_relative) {
        for (std::size_t f = 0; f < n; ++f)
            for (int hh = 0; hh < n_heads; ++hh)
                for (std::size_t pr = 0; pr < dh / 2; ++pr) {
                    const double cs = pet->cos_t[f * (dh / 2) + pr], sn = pet->sin_t[f * (dh / 2) + pr];
                    for (Tensor* tq : {q.get(), k.get()}) {
                        double* p0 = tq->data() + (f * c + static_cast<std::size_t>(hh) * dh + 2 * pr) * s;
                        double* p1 = p0 + s;
                        for (std::size_t e = 0; e < s; ++e) {
                            const double a0 = p0[e], a1 = p1[e];
                            p0[e] = a0 * cs - a1 * sn;
                            p1[e] = a0 * sn + a1 * cs;
                        }
                    }
                }
    }

    // Attention per (spatial row, head); A cached for the backward pass.
    auto amap = std::make_shared<std::vector<double>>(
        s * static_cast<std::size_t>(n_heads) * n * n);
    Tensor attn_out(xv.shape());
    Matrix cap_sum(n, n);
    Matrix logits(n, n);
    for (std::size_t sp = 0; sp < s; ++sp)
        for (int hh = 0; hh < n_heads; ++hh) {
            const std::size_t off = static_cast<std::size_t>(hh) * dh;
            double* arow =
                amap->data() + (sp * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(hh)) * n * n;
            if (do_rep) {
                std::copy(hook.matrix->values.data(), hook.matrix->values.data() + n * n, arow);
            } else {
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        double dot = 0.0;
                        const double* qp = q->data() + (i * c + off) * s + sp;
                        const double* kp = k->data() + (j * c + off) * s + sp;
                        for (std::size_t e = 0; e < dh; ++e) dot += qp[e * s] * kp[e * s];
                        logits.at(i, j) = dot * scale;
                    }
                Matrix a = softmax_rows(do_reg ? regularize_logits(logits, *hook.matrix) : logits);
                std::copy(a.data(), a.data() + n * n, arow);
            }
            for (std::size_t i = 0; i < n; ++i) {
                double* op = attn_out.data() + (i * c + off) * s + sp;
                for (std::size_t j = 0; j < n; ++j) {
                    const double aij = arow[i * n + j];
                    const double* vp = v->data() + (j * c + off) * s + sp;
                    for (std::size_t e = 0; e < dh; ++e) op[e * s] += aij * vp[e * s];
                }
            }
            if (do_cap)
                for (std::size_t i = 0; i < n * n; ++i) cap_sum.data()[i] += arow[i];
        }

    if (do_cap) {
        const double denom = static_cast<double>(s) * static_cast<double>(n_heads);
        for (double& e : cap_sum.values()) e /= denom;
        captured->push_back(TemporalAttentionMap{level, -1, -1, std::move(cap_sum)});
    }

    auto ao = std::make_shared<Tensor>(std::move(attn_out));
    Tensor out(xv.shape());
    chan_matmul(out, wo->value, *ao);
    auto y = make_node(std::move(out));

    if (tape)
        tape->push([x, wq, wk, wv, wo, y, q, k, v, ao, amap, pet, n, c, s, dh, n_heads, scale,
                    pe]() {
            chan_matmul_bwd_weight(wo->grad, y->grad, *ao);
            Tensor d_ao(x->value.shape());
            chan_matmul_bwd_input(d_ao, wo->value, y->grad);

            Tensor dq(x->value.shape()), dk(x->value.shape()), dv(x->value.shape());
            std::vector<double> da(n * n), dl(n * n);
            for (std::size_t sp = 0; sp < s; ++sp)
                for (int hh = 0; hh < n_heads; ++hh) {
                    const std::size_t off = static_cast<std::size_t>(hh) * dh;
                    const double* arow =
                        amap->data() +
                        (sp * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(hh)) * n * n;
                    // dA and dV
                    for (std::size_t i = 0; i < n; ++i) {
                        const double* gop = d_ao.data() + (i * c + off) * s + sp;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double* vp = v->data() + (j * c + off) * s + sp;
                            double acc = 0.0;
                            for (std::size_t e = 0; e < dh; ++e) acc += gop[e * s] * vp[e * s];
                            da[i * n + j] = acc;
                            double* dvp = dv.data() + (j * c + off) * s + sp;
                            const double aij = arow[i * n + j];
                            for (std::size_t e = 0; e < dh; ++e) dvp[e * s] += aij * gop[e * s];
                        }
                    }
                    // softmax backward
                    for (std::size_t i = 0; i < n; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < n; ++j) dot += da[i * n + j] * arow[i * n + j];
                        for (std::size_t j = 0; j < n; ++j)
                            dl[i * n + j] = arow[i * n + j] * (da[i * n + j] - dot);
                    }
                    // dq, dk
                    for (std::size_t i = 0; i < n; ++i) {
                        double* dqp = dq.data() + (i * c + off) * s + sp;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double g = dl[i * n + j] * scale;
                            if (g == 0.0) continue;
                            const double* kp = k->data() + (j * c + off) * s + sp;
                            double* dkp = dk.data() + (j * c + off) * s + sp;
                            const double* qp = q->data() + (i * c + off) * s + sp;
                            for (std::size_t e = 0; e < dh; ++e) {
                                dqp[e * s] += g * kp[e * s];
                                dkp[e * s] += g * qp[e * s];
                            }
                        }
                    }
                }

            // PE backward: sinusoidal adds constants (pass-through); rotary is a
            // fixed rotation, so gradients rotate by the transpose.
            if (pe == PositionalEncodingVariant::rotary_relative) {
                for (std::size_t f = 0; f < n; ++f)
                    for (int hh = 0; hh < n_heads; ++hh)
                        for (std::size_t pr = 0; pr < dh / 2; ++pr) {
                            const double cs = pet->cos_t[f * (dh / 2) + pr],
                                         sn = pet->sin_t[f * (dh / 2) + pr];
                            for (Tensor* tg : {&dq, &dk}) {
                                double* p0 =
                                    tg->data() +
                                    (f * c + static_cast<std::size_t>(hh) * dh + 2 * pr) * s;
                                double* p1 = p0 + s;
                                for (std::size_t e = 0; e < s; ++e) {
                                    const double g0 = p0[e], g1 = p1[e];
                                    p0[e] = g0 * cs + g1 * sn;
                                    p1[e] = -g0 * sn + g1 * cs;
                                }
                            }
                        }
            }

            chan_matmul_bwd_weight(wq->grad, dq, x->value);
            chan_matmul_bwd_weight(wk->grad, dk, x->value);
            chan_matmul_bwd_weight(wv->grad, dv, x->value);
            chan_matmul_bwd_input(x->grad, wq->value, dq);
            chan_matmul_bwd_input(x->grad, wk->value, dk);
            chan_matmul_bwd_input(x->grad, wv->value, dv);
        });
    return y;
}

NodePtr cross_attention_block(Tape* tape, const NodePtr& x, const Tensor& ctx, const NodePtr& wq,
                              const NodePtr& wk, const NodePtr& wv, const NodePtr& wo) {
    const auto& xv = x->value;
    const std::size_t n = xv.dim(0), c = xv.dim(1), s = xv.dim(2) * xv.dim(3);
    if (ctx.rank() != 3 || ctx.dim(0) != n)
        throw std::invalid_argument("cross attention: ctx must be (N, n_ctx, d_tok)");
    const std::size_t n_ctx = ctx.dim(1), dt = ctx.dim(2);
    if (wk->value.dim(0) != c || wk->value.dim(1) != dt)
        throw std::invalid_argument("cross attention: wk must be (C, d_tok)");
    const double scale = 1.0 / std::sqrt(static_cast<double>(c));

    auto q = std::make_shared<Tensor>(xv.shape());
    chan_matmul(*q, wq->value, xv);

    // K, V: (N, n_ctx, C)
    auto kt = std::make_shared<Tensor>(Tensor({n, n_ctx, c}));
    auto vt = std::make_shared<Tensor>(Tensor({n, n_ctx, c}));
    for (std::size_t f = 0; f < n; ++f)
        for (std::size_t tk = 0; tk < n_ctx; ++tk)
            for (std::size_t o = 0; o < c; ++o) {
                double ks = 0.0, vs = 0.0;
                const double* cp = ctx.data() + (f * n_ctx + tk) * dt;
                const double* wkp = wk->value.data() + o * dt;
                const double* wvp = wv->value.data() + o * dt;
                for (std::size_t e = 0; e < dt; ++e) {
                    ks += wkp[e] * cp[e];
                    vs += wvp[e] * cp[e];
                }
                kt->at3(f, tk, o) = ks;
                vt->at3(f, tk, o) = vs;
            }

    auto amap = std::make_shared<std::vector<double>>(n * s * n_ctx);
    Tensor attn_out(xv.shape());
    std::vector<double> logit(n_ctx);
    for (std::size_t f = 0; f < n; ++f)
        for (std::size_t sp = 0; sp < s; ++sp) {
            double mx = -1e300;
            for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                double dot = 0.0;
                const double* qp = q->data() + f * c * s + sp;
                const double* kp = kt->data() + (f * n_ctx + tk) * c;
                for (std::size_t e = 0; e < c; ++e) dot += qp[e * s] * kp[e];
                logit[tk] = dot * scale;
                mx = std::max(mx, logit[tk]);
            }
            double sum = 0.0;
            double* arow = amap->data() + (f * s + sp) * n_ctx;
            for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                arow[tk] = std::exp(logit[tk] - mx);
                sum += arow[tk];
            }
            for (std::size_t tk = 0; tk < n_ctx; ++tk) arow[tk] /= sum;
            double* op = attn_out.data() + f * c * s + sp;
            for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                const double a = arow[tk];
                const double* vp = vt->data() + (f * n_ctx + tk) * c;
                for (std::size_t e = 0; e < c; ++e) op[e * s] += a * vp[e];
            }
        }

    auto ao = std::make_shared<Tensor>(std::move(attn_out));
    Tensor out(xv.shape());
    chan_matmul(out, wo->value, *ao);
    auto y = make_node(std::move(out));

    if (tape) {
        auto ctx_copy = std::make_shared<Tensor>(ctx);
        tape->push([x, wq, wk, wv, wo, y, q, kt, vt, ao, amap, ctx_copy, n, c, s, n_ctx, scale]() {
            const std::size_t dt = ctx_copy->dim(2);
            chan_matmul_bwd_weight(wo->grad, y->grad, *ao);
            Tensor d_ao(x->value.shape());
            chan_matmul_bwd_input(d_ao, wo->value, y->grad);

            Tensor dq(x->value.shape());
            Tensor dkt({n, n_ctx, c}), dvt({n, n_ctx, c});
            std::vector<double> da(n_ctx), dl(n_ctx);
            for (std::size_t f = 0; f < n; ++f)
                for (std::size_t sp = 0; sp < s; ++sp) {
                    const double* arow = amap->data() + (f * s + sp) * n_ctx;
                    const double* gop = d_ao.data() + f * c * s + sp;
                    double dot = 0.0;
                    for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                        const double* vp = vt->data() + (f * n_ctx + tk) * c;
                        double acc = 0.0;
                        for (std::size_t e = 0; e < c; ++e) acc += gop[e * s] * vp[e];
                        da[tk] = acc;
                        dot += acc * arow[tk];
                        double* dvp = dvt.data() + (f * n_ctx + tk) * c;
                        for (std::size_t e = 0; e < c; ++e) dvp[e] += arow[tk] * gop[e * s];
                    }
                    for (std::size_t tk = 0; tk < n_ctx; ++tk)
                        dl[tk] = arow[tk] * (da[tk] - dot);
                    double* dqp = dq.data() + f * c * s + sp;
                    const double* qp = q->data() + f * c * s + sp;
                    for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                        const double g = dl[tk] * scale;
                        if (g == 0.0) continue;
                        const double* kp = kt->data() + (f * n_ctx + tk) * c;
                        double* dkp = dkt.data() + (f * n_ctx + tk) * c;
                        for (std::size_t e = 0; e < c; ++e) {
                            dqp[e * s] += g * kp[e];
                            dkp[e] += g * qp[e * s];
                        }
                    }
                }

            // dWk, dWv from (N, n_ctx, C) grads against ctx; ctx itself is constant.
            for (std::size_t f = 0; f < n; ++f)
                for (std::size_t tk = 0; tk < n_ctx; ++tk) {
                    const double* cp = ctx_copy->data() + (f * n_ctx + tk) * dt;
                    const double* dkp = dkt.data() + (f * n_ctx + tk) * c;
                    const double* dvp = dvt.data() + (f * n_ctx + tk) * c;
                    for (std::size_t o = 0; o < c; ++o) {
                        double* gwk = wk->grad.data() + o * dt;
                        double* gwv = wv->grad.data() + o * dt;
                        for (std::size_t e = 0; e < dt; ++e) {
                            gwk[e] += dkp[o] * cp[e];
                            gwv[e] += dvp[o] * cp[e];
                        }
                    }
                }

            chan_matmul_bwd_weight(wq->grad, dq, x->value);
            chan_matmul_bwd_input(x->grad, wq->value, dq);
        });
    }
    return y;
}

}  // namespace vstar::nn
