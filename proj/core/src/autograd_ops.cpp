// This source code is licensed under the Apache License, Version 2.0
// found in the LICENSE file in the root directory of this source tree.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpanet/autograd.hpp"

namespace dpanet {

using detail::accumulate;
using detail::make_op;
using detail::Node;

// ---- dense linear algebra ---------------------------------------------------

Variable matmul(const Variable& a, const Variable& b) {
    Tensor out = matmul(a.value(), b.value());
    return make_op(std::move(out), {a, b}, "matmul", [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) accumulate(*n.parents[0], matmul_nt(n.grad, bv));
        if (n.parents[1]->requires_grad) accumulate(*n.parents[1], matmul_tn(av, n.grad));
    });
}

Variable matmul_tn(const Variable& a, const Variable& b) {
    Tensor out = matmul_tn(a.value(), b.value());
    return make_op(std::move(out), {a, b}, "matmul_tn", [](Node& n) {
        const Tensor& av = n.parents[0]->value;
        const Tensor& bv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) accumulate(*n.parents[0], matmul_nt(bv, n.grad));
        if (n.parents[1]->requires_grad) accumulate(*n.parents[1], matmul(av, n.grad));
    });
}

Variable softmax_cols(const Variable& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 2) throw std::invalid_argument("softmax_cols: 2-D input required");
    const int r = xv.dim(0), c = xv.dim(1);
    Tensor out({r, c});
    for (int j = 0; j < c; ++j) {
        double m = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < r; ++i) m = std::max(m, xv.at(i, j));
        double z = 0.0;
        for (int i = 0; i < r; ++i) z += std::exp(xv.at(i, j) - m);
        for (int i = 0; i < r; ++i) out.at(i, j) = std::exp(xv.at(i, j) - m) / z;
    }
    Tensor saved = out;
    return make_op(std::move(out), {x}, "softmax_cols", [saved, r, c](Node& n) {
        Tensor g({r, c});
        for (int j = 0; j < c; ++j) {
            double dot = 0.0;
            for (int i = 0; i < r; ++i) dot += n.grad.at(i, j) * saved.at(i, j);
            for (int i = 0; i < r; ++i) g.at(i, j) = saved.at(i, j) * (n.grad.at(i, j) - dot);
        }
        accumulate(*n.parents[0], g);
    });
}

Variable linear(const Variable& x, const Variable& w, const Variable& b) {
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    if (xv.ndim() != 1 || wv.ndim() != 2 || wv.dim(1) != xv.dim(0))
        throw std::invalid_argument("linear: x {N} and w {M,N} required");
    const int m = wv.dim(0), k = wv.dim(1);
    Tensor out({m});
    for (int i = 0; i < m; ++i) {
        double acc = b.defined() ? b.value()[i] : 0.0;
        const double* row = wv.data() + static_cast<int64_t>(i) * k;
        for (int j = 0; j < k; ++j) acc += row[j] * xv[j];
        out[i] = acc;
    }
    std::vector<Variable> parents = b.defined() ? std::vector<Variable>{x, w, b}
                                                : std::vector<Variable>{x, w};
    const bool has_bias = b.defined();
    return make_op(std::move(out), std::move(parents), "linear", [m, k, has_bias](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        const Tensor& wv = n.parents[1]->value;
        if (n.parents[0]->requires_grad) {
            Tensor gx({k});
            for (int j = 0; j < k; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += n.grad[i] * wv.at(i, j);
                gx[j] = acc;
            }
            accumulate(*n.parents[0], gx);
        }
        if (n.parents[1]->requires_grad) {
            Tensor gw({m, k});
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < k; ++j) gw.at(i, j) = n.grad[i] * xv[j];
            accumulate(*n.parents[1], gw);
        }
        if (has_bias && n.parents[2]->requires_grad) accumulate(*n.parents[2], n.grad);
    });
}

// ---- convolution ------------------------------------------------------------

namespace {

struct ConvDims {
    int cin, h, w, k, stride, pad, oh, ow;
};

ConvDims conv_dims(const Tensor& x, int k, int stride, int pad) {
    if (x.ndim() != 3) throw std::invalid_argument("conv2d: input must be {C,H,W}");
    if (stride < 1 || pad < 0 || k < 1) throw std::invalid_argument("conv2d: bad geometry");
    ConvDims d{x.dim(0), x.dim(1), x.dim(2), k, stride, pad, 0, 0};
    d.oh = (d.h + 2 * pad - k) / stride + 1;
    d.ow = (d.w + 2 * pad - k) / stride + 1;
    if (d.oh < 1 || d.ow < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
    return d;
}

Tensor im2col(const Tensor& x, const ConvDims& d) {
    Tensor cols({d.cin * d.k * d.k, d.oh * d.ow});
    const int64_t ncols = static_cast<int64_t>(d.oh) * d.ow;
    const double* px = x.data();
    double* pc = cols.data();
    parallel_for(d.cin, static_cast<int64_t>(d.cin) * d.k * d.k * ncols, [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
            for (int ky = 0; ky < d.k; ++ky) {
                for (int kx = 0; kx < d.k; ++kx) {
                    double* row = pc + (((ci * d.k) + ky) * d.k + kx) * ncols;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * d.stride - d.pad + ky;
                        for (int ox = 0; ox < d.ow; ++ox) {
                            const int ix = ox * d.stride - d.pad + kx;
                            row[static_cast<int64_t>(oy) * d.ow + ox] =
                                (iy >= 0 && iy < d.h && ix >= 0 && ix < d.w)
                                    ? px[(ci * d.h + iy) * d.w + ix]
                                    : 0.0;
                        }
                    }
                }
            }
        }
    });
    return cols;
}

Tensor col2im(const Tensor& cols, const ConvDims& d) {
    Tensor x({d.cin, d.h, d.w});
    const int64_t ncols = static_cast<int64_t>(d.oh) * d.ow;
    const double* pc = cols.data();
    double* px = x.data();
    // Each channel's scatter is independent, so channel partitioning stays
    // deterministic.
    parallel_for(d.cin, static_cast<int64_t>(d.cin) * d.k * d.k * ncols, [&](int64_t c0, int64_t c1) {
        for (int64_t ci = c0; ci < c1; ++ci) {
            for (int ky = 0; ky < d.k; ++ky) {
                for (int kx = 0; kx < d.k; ++kx) {
                    const double* row = pc + (((ci * d.k) + ky) * d.k + kx) * ncols;
                    for (int oy = 0; oy < d.oh; ++oy) {
                        const int iy = oy * d.stride - d.pad + ky;
                        if (iy < 0 || iy >= d.h) continue;
                        for (int ox = 0; ox < d.ow; ++ox) {
                            const int ix = ox * d.stride - d.pad + kx;
                            if (ix < 0 || ix >= d.w) continue;
                            px[(ci * d.h + iy) * d.w + ix] += row[static_cast<int64_t>(oy) * d.ow + ox];
                        }
                    }
                }
            }
        }
    });
    return x;
}

}  // namespace

Variable conv2d(const Variable& x, const Variable& w, const Variable& b, int stride, int pad) {
    const Tensor& wv = w.value();
    if (wv.ndim() != 4) throw std::invalid_argument("conv2d: weight must be {Cout,Cin,K,K}");
    const int cout = wv.dim(0), k = wv.dim(2);
    if (wv.dim(2) != wv.dim(3)) throw std::invalid_argument("conv2d: square kernels only");
    ConvDims d = conv_dims(x.value(), k, stride, pad);
    if (wv.dim(1) != d.cin)
        throw std::invalid_argument("conv2d: weight expects " + std::to_string(wv.dim(1)) +
                                    " input channels, got " + std::to_string(d.cin));
    if (b.defined() && (b.value().ndim() != 1 || b.value().dim(0) != cout))
        throw std::invalid_argument("conv2d: bias must be {Cout}");

    Tensor cols = im2col(x.value(), d);
    Tensor wmat = wv.reshaped({cout, d.cin * k * k});
    Tensor out_mat = matmul(wmat, cols);
    if (b.defined()) {
        const int64_t ncols = static_cast<int64_t>(d.oh) * d.ow;
        for (int co = 0; co < cout; ++co) {
            const double bias = b.value()[co];
            double* row = out_mat.data() + co * ncols;
            for (int64_t i = 0; i < ncols; ++i) row[i] += bias;
        }
    }
    Tensor out = out_mat.reshaped({cout, d.oh, d.ow});

    std::vector<Variable> parents = b.defined() ? std::vector<Variable>{x, w, b}
                                                : std::vector<Variable>{x, w};
    const bool has_bias = b.defined();
    return make_op(std::move(out), std::move(parents), "conv2d", [d, cout, k, has_bias](Node& n) {
        const Tensor& xv = n.parents[0]->value;
        const Tensor& wv = n.parents[1]->value;
        const int64_t ncols = static_cast<int64_t>(d.oh) * d.ow;
        Tensor gmat = n.grad.reshaped({cout, static_cast<int>(ncols)});
        Tensor wmat = wv.reshaped({cout, d.cin * k * k});
        if (n.parents[1]->requires_grad) {
            Tensor cols = im2col(xv, d);  // recomputed; cheaper than caching
            accumulate(*n.parents[1], matmul_nt(gmat, cols).reshaped(wv.shape()));
        }
        if (has_bias && n.parents[2]->requires_grad) {
            Tensor gb({cout});
            for (int co = 0; co < cout; ++co) {
                const double* row = gmat.data() + co * ncols;
                double acc = 0.0;
                for (int64_t i = 0; i < ncols; ++i) acc += row[i];
                gb[co] = acc;
            }
            accumulate(*n.parents[2], gb);
        }
        if (n.parents[0]->requires_grad) {
            Tensor dcols = matmul_tn(wmat, gmat);
            accumulate(*n.parents[0], col2im(dcols, d));
        }
    });
}

Variable max_pool2d(const Variable& x, int k, int stride, int pad) {
    ConvDims d = conv_dims(x.value(), k, stride, pad);
    const Tensor& xv = x.value();
    Tensor out({d.cin, d.oh, d.ow});
    std::vector<int64_t> argmax(static_cast<size_t>(out.numel()));
    for (int ci = 0; ci < d.cin; ++ci) {
        for (int oy = 0; oy < d.oh; ++oy) {
            for (int ox = 0; ox < d.ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                int64_t best_idx = -1;
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= d.h) continue;
                    for (int kx = 0; kx < k; ++kx) {
                        const int ix = ox * stride - pad + kx;
                        if (ix < 0 || ix >= d.w) continue;
                        const int64_t idx = (static_cast<int64_t>(ci) * d.h + iy) * d.w + ix;
                        if (xv[idx] > best) {
                            best = xv[idx];
                            best_idx = idx;
                        }
                    }
                }
                const int64_t oidx = (static_cast<int64_t>(ci) * d.oh + oy) * d.ow + ox;
                out[oidx] = best;
                argmax[static_cast<size_t>(oidx)] = best_idx;
            }
        }
    }
    return make_op(std::move(out), {x}, "max_pool2d", [argmax](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        for (int64_t i = 0; i < n.grad.numel(); ++i) gx[argmax[static_cast<size_t>(i)]] += n.grad[i];
        accumulate(*n.parents[0], gx);
    });
}

Variable global_avg_pool(const Variable& x) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("global_avg_pool: {C,H,W} input required");
    const int c = xv.dim(0);
    const int64_t hw = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
    const double inv = 1.0 / static_cast<double>(hw);
    Tensor out({c});
    for (int ci = 0; ci < c; ++ci) {
        const double* p = xv.data() + ci * hw;
        double acc = 0.0;
        for (int64_t i = 0; i < hw; ++i) acc += p[i];
        out[ci] = acc * inv;
    }
    return make_op(std::move(out), {x}, "global_avg_pool", [c, hw, inv](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        for (int ci = 0; ci < c; ++ci) {
            const double g = n.grad[ci] * inv;
            double* p = gx.data() + ci * hw;
            for (int64_t i = 0; i < hw; ++i) p[i] = g;
        }
        accumulate(*n.parents[0], gx);
    });
}

Variable channel_norm(const Variable& x, const Variable& gamma, const Variable& beta, double eps) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("channel_norm: {C,H,W} input required");
    const int c = xv.dim(0);
    if (gamma.value().dim(0) != c || beta.value().dim(0) != c)
        throw std::invalid_argument("channel_norm: affine params must be {C}");
    const int64_t hw = static_cast<int64_t>(xv.dim(1)) * xv.dim(2);
    const double inv_n = 1.0 / static_cast<double>(hw);

    std::vector<double> mean(static_cast<size_t>(c)), inv_std(static_cast<size_t>(c));
    Tensor out(xv.shape());
    for (int ci = 0; ci < c; ++ci) {
        const double* p = xv.data() + ci * hw;
        double mu = 0.0;
        for (int64_t i = 0; i < hw; ++i) mu += p[i];
        mu *= inv_n;
        double var = 0.0;
        for (int64_t i = 0; i < hw; ++i) var += (p[i] - mu) * (p[i] - mu);
        var *= inv_n;
        const double is = 1.0 / std::sqrt(var + eps);
        mean[static_cast<size_t>(ci)] = mu;
        inv_std[static_cast<size_t>(ci)] = is;
        const double g = gamma.value()[ci], b = beta.value()[ci];
        double* o = out.data() + ci * hw;
        for (int64_t i = 0; i < hw; ++i) o[i] = g * (p[i] - mu) * is + b;
    }
    return make_op(std::move(out), {x, gamma, beta}, "channel_norm",
                   [c, hw, inv_n, mean, inv_std](Node& n) {
                       const Tensor& xv = n.parents[0]->value;
                       const Tensor& gam = n.parents[1]->value;
                       Tensor gx(xv.shape()), gg({c}), gb({c});
                       for (int ci = 0; ci < c; ++ci) {
                           const double mu = mean[static_cast<size_t>(ci)];
                           const double is = inv_std[static_cast<size_t>(ci)];
                           const double* p = xv.data() + ci * hw;
                           const double* g = n.grad.data() + ci * hw;
                           double sum_g = 0.0, sum_gx = 0.0;
                           for (int64_t i = 0; i < hw; ++i) {
                               const double xh = (p[i] - mu) * is;
                               sum_g += g[i];
                               sum_gx += g[i] * xh;
                           }
                           gb[ci] = sum_g;
                           gg[ci] = sum_gx;
                           const double k = gam[ci] * is;
                           const double mg = sum_g * inv_n, mgx = sum_gx * inv_n;
                           double* o = gx.data() + ci * hw;
                           for (int64_t i = 0; i < hw; ++i) {
                               const double xh = (p[i] - mu) * is;
                               o[i] = k * (g[i] - mg - xh * mgx);
                           }
                       }
                       if (n.parents[0]->requires_grad) accumulate(*n.parents[0], gx);
                       if (n.parents[1]->requires_grad) accumulate(*n.parents[1], gg);
                       if (n.parents[2]->requires_grad) accumulate(*n.parents[2], gb);
                   });
}

// ---- bilinear interpolation --------------------------------------------------

namespace {

struct Tap {
    int lo, hi;
    double w_hi;  // weight of hi; lo gets 1 - w_hi
};

// Half-pixel-center source coordinate with edge clamping.
std::vector<Tap> make_taps(int in_size, int out_size) {
    std::vector<Tap> taps(static_cast<size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int o = 0; o < out_size; ++o) {
        const double src = (o + 0.5) * scale - 0.5;
        double f = std::floor(src);
        double frac = src - f;
        int lo = static_cast<int>(f);
        int hi = lo + 1;
        lo = std::clamp(lo, 0, in_size - 1);
        hi = std::clamp(hi, 0, in_size - 1);
        taps[static_cast<size_t>(o)] = {lo, hi, frac};
    }
    return taps;
}

}  // namespace

Variable upsample_bilinear(const Variable& x, int oh, int ow) {
    const Tensor& xv = x.value();
    if (xv.ndim() != 3) throw std::invalid_argument("upsample_bilinear: {C,H,W} input required");
    if (oh < 1 || ow < 1) throw std::invalid_argument("upsample_bilinear: non-positive target size");
    const int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
    if (oh == h && ow == w) {
        // identity; still a node so gradients pass through
        Tensor out = xv;
        return make_op(std::move(out), {x}, "upsample_id",
                       [](Node& n) { accumulate(*n.parents[0], n.grad); });
    }
    const auto ty = make_taps(h, oh);
    const auto tx = make_taps(w, ow);
    Tensor out({c, oh, ow});
    for (int ci = 0; ci < c; ++ci) {
        const double* p = xv.data() + static_cast<int64_t>(ci) * h * w;
        double* o = out.data() + static_cast<int64_t>(ci) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            const Tap& yt = ty[static_cast<size_t>(oy)];
            for (int ox = 0; ox < ow; ++ox) {
                const Tap& xt = tx[static_cast<size_t>(ox)];
                const double top = (1.0 - xt.w_hi) * p[yt.lo * w + xt.lo] + xt.w_hi * p[yt.lo * w + xt.hi];
                const double bot = (1.0 - xt.w_hi) * p[yt.hi * w + xt.lo] + xt.w_hi * p[yt.hi * w + xt.hi];
                o[static_cast<int64_t>(oy) * ow + ox] = (1.0 - yt.w_hi) * top + yt.w_hi * bot;
            }
        }
    }
    return make_op(std::move(out), {x}, "upsample_bilinear", [c, h, w, oh, ow, ty, tx](Node& n) {
        Tensor gx(n.parents[0]->value.shape());
        for (int ci = 0; ci < c; ++ci) {
            double* gp = gx.data() + static_cast<int64_t>(ci) * h * w;
            const double* g = n.grad.data() + static_cast<int64_t>(ci) * oh * ow;
            for (int oy = 0; oy < oh; ++oy) {
                const Tap& yt = ty[static_cast<size_t>(oy)];
                for (int ox = 0; ox < ow; ++ox) {
                    const Tap& xt = tx[static_cast<size_t>(ox)];
                    const double gv = g[static_cast<int64_t>(oy) * ow + ox];
                    gp[yt.lo * w + xt.lo] += (1.0 - yt.w_hi) * (1.0 - xt.w_hi) * gv;
                    gp[yt.lo * w + xt.hi] += (1.0 - yt.w_hi) * xt.w_hi * gv;
                    gp[yt.hi * w + xt.lo] += yt.w_hi * (1.0 - xt.w_hi) * gv;
                    gp[yt.hi * w + xt.hi] += yt.w_hi * xt.w_hi * gv;
                }
            }
        }
        accumulate(*n.parents[0], gx);
    });
}

}  // namespace dpanet
