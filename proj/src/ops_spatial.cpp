#include <algorithm>
#include <cmath>

#include "forma/ops.hpp"

namespace forma::ops {

Tensor conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b,
              int stride, int padding) {
    if (x.ndim() != 3 || k.ndim() != 4)
        throw DimensionError("conv2d: want input [C,H,W] and kernel [K,C,kh,kw], got " +
                             shape_str(x.shape()) + " and " + shape_str(k.shape()));
    if (k.dim(1) != x.dim(0))
        throw DimensionError("conv2d: kernel channels " + shape_str(k.shape()) +
                             " do not match input " + shape_str(x.shape()));
    if (stride < 1 || padding < 0) throw DomainError("conv2d: bad stride/padding");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::int64_t kc = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != kc))
        throw DimensionError("conv2d: bias " + shape_str(b.shape()) +
                             " does not match kernel count");
    if (kh > h + 2 * padding || kw > w + 2 * padding)
        throw DimensionError("conv2d: kernel " + shape_str(k.shape()) +
                             " larger than padded input " + shape_str(x.shape()));
    const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;

    Tensor out({kc, oh, ow});
    {
        double* op = out.data();
        for (std::int64_t f = 0; f < kc; ++f) {
            const double bias = b.defined() ? b.data()[f] : 0.0;
            for (std::int64_t oy = 0; oy < oh; ++oy)
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    double acc = bias;
                    const std::int64_t y0 = oy * stride - padding;
                    const std::int64_t x0 = ox * stride - padding;
                    for (std::int64_t ci = 0; ci < c; ++ci) {
                        const double* xp = x.data() + ci * h * w;
                        const double* kp = k.data() + ((f * c + ci) * kh) * kw;
                        for (std::int64_t dy = 0; dy < kh; ++dy) {
                            const std::int64_t yy = y0 + dy;
                            if (yy < 0 || yy >= h) continue;
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const std::int64_t xx = x0 + dx;
                                if (xx < 0 || xx >= w) continue;
                                acc += xp[yy * w + xx] * kp[dy * kw + dx];
                            }
                        }
                    }
                    op[(f * oh + oy) * ow + ox] = acc;
                }
        }
    }
    if (track(g, {&x, &k, &b})) {
        out.set_requires_grad(true);
        g.record("conv2d", out,
                 [x, k, b, out, c, h, w, kc, kh, kw, oh, ow, stride, padding]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            double* gk = k.grad();
            double* gb = b.defined() ? b.grad() : nullptr;
            for (std::int64_t f = 0; f < kc; ++f)
                for (std::int64_t oy = 0; oy < oh; ++oy)
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const double d = go[(f * oh + oy) * ow + ox];
                        if (d == 0.0) continue;
                        if (gb) gb[f] += d;
                        const std::int64_t y0 = oy * stride - padding;
                        const std::int64_t x0 = ox * stride - padding;
                        for (std::int64_t ci = 0; ci < c; ++ci) {
                            const double* xp = x.data() + ci * h * w;
                            const double* kp = k.data() + ((f * c + ci) * kh) * kw;
                            double* gxp = gx ? gx + ci * h * w : nullptr;
                            double* gkp = gk ? gk + ((f * c + ci) * kh) * kw : nullptr;
                            for (std::int64_t dy = 0; dy < kh; ++dy) {
                                const std::int64_t yy = y0 + dy;
                                if (yy < 0 || yy >= h) continue;
                                for (std::int64_t dx = 0; dx < kw; ++dx) {
                                    const std::int64_t xx = x0 + dx;
                                    if (xx < 0 || xx >= w) continue;
                                    if (gxp) gxp[yy * w + xx] += d * kp[dy * kw + dx];
                                    if (gkp) gkp[dy * kw + dx] += d * xp[yy * w + xx];
                                }
                            }
                        }
                    }
        });
    }
    return out;
}

Tensor dwconv(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b) {
    if (x.ndim() != 3 || k.ndim() != 3 || k.dim(0) != x.dim(0))
        throw DimensionError("dwconv: want input [C,H,W] and kernel [C,kh,kw], got " +
                             shape_str(x.shape()) + " and " + shape_str(k.shape()));
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    const std::int64_t kh = k.dim(1), kw = k.dim(2);
    if (kh % 2 == 0 || kw % 2 == 0)
        throw DomainError("dwconv: kernel extents must be odd for same padding, got " +
                          shape_str(k.shape()));
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != c))
        throw DimensionError("dwconv: bias does not match channels");
    const std::int64_t py = kh / 2, px = kw / 2;

    Tensor out({c, h, w});
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const double* xp = x.data() + ci * h * w;
        const double* kp = k.data() + ci * kh * kw;
        double* op = out.data() + ci * h * w;
        const double bias = b.defined() ? b.data()[ci] : 0.0;
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xo = 0; xo < w; ++xo) {
                double acc = bias;
                for (std::int64_t dy = 0; dy < kh; ++dy) {
                    const std::int64_t yy = y + dy - py;
                    if (yy < 0 || yy >= h) continue;
                    for (std::int64_t dx = 0; dx < kw; ++dx) {
                        const std::int64_t xx = xo + dx - px;
                        if (xx < 0 || xx >= w) continue;
                        acc += xp[yy * w + xx] * kp[dy * kw + dx];
                    }
                }
                op[y * w + xo] = acc;
            }
    }
    if (track(g, {&x, &k, &b})) {
        out.set_requires_grad(true);
        g.record("dwconv", out, [x, k, b, out, c, h, w, kh, kw, py, px]() mutable {
            const double* go = out.grad();
            for (std::int64_t ci = 0; ci < c; ++ci) {
                const double* xp = x.data() + ci * h * w;
                const double* kp = k.data() + ci * kh * kw;
                const double* gop = go + ci * h * w;
                double* gxp = x.grad() ? x.grad() + ci * h * w : nullptr;
                double* gkp = k.grad() ? k.grad() + ci * kh * kw : nullptr;
                double* gb = b.defined() ? b.grad() : nullptr;
                for (std::int64_t y = 0; y < h; ++y)
                    for (std::int64_t xo = 0; xo < w; ++xo) {
                        const double d = gop[y * w + xo];
                        if (d == 0.0) continue;
                        if (gb) gb[ci] += d;
                        for (std::int64_t dy = 0; dy < kh; ++dy) {
                            const std::int64_t yy = y + dy - py;
                            if (yy < 0 || yy >= h) continue;
                            for (std::int64_t dx = 0; dx < kw; ++dx) {
                                const std::int64_t xx = xo + dx - px;
                                if (xx < 0 || xx >= w) continue;
                                if (gxp) gxp[yy * w + xx] += d * kp[dy * kw + dx];
                                if (gkp) gkp[dy * kw + dx] += d * xp[yy * w + xx];
                            }
                        }
                    }
            }
        });
    }
    return out;
}

Tensor bilinear_resize(Graph& g, const Tensor& x, std::int64_t oh, std::int64_t ow) {
    if (x.ndim() != 3)
        throw DimensionError("bilinear_resize: want [C,H,W], got " + shape_str(x.shape()));
    if (oh < 1 || ow < 1) throw DomainError("bilinear_resize: output extent must be positive");
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);

    struct Sample {
        std::int64_t i0, i1;
        double w0, w1;
    };
    auto axis = [](std::int64_t in, std::int64_t out) {
        std::vector<Sample> s(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::int64_t o = 0; o < out; ++o) {
            double pos = (static_cast<double>(o) + 0.5) * scale - 0.5;
            pos = std::clamp(pos, 0.0, static_cast<double>(in - 1));
            const std::int64_t i0 = static_cast<std::int64_t>(std::floor(pos));
            const std::int64_t i1 = std::min(i0 + 1, in - 1);
            const double f = pos - static_cast<double>(i0);
            s[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
        }
        return s;
    };
    const auto ys = axis(h, oh), xs = axis(w, ow);

    Tensor out({c, oh, ow});
    for (std::int64_t ci = 0; ci < c; ++ci) {
        const double* xp = x.data() + ci * h * w;
        double* op = out.data() + ci * oh * ow;
        for (std::int64_t oy = 0; oy < oh; ++oy) {
            const auto& sy = ys[static_cast<std::size_t>(oy)];
            for (std::int64_t ox = 0; ox < ow; ++ox) {
                const auto& sx = xs[static_cast<std::size_t>(ox)];
                op[oy * ow + ox] = sy.w0 * (sx.w0 * xp[sy.i0 * w + sx.i0] +
                                            sx.w1 * xp[sy.i0 * w + sx.i1]) +
                                   sy.w1 * (sx.w0 * xp[sy.i1 * w + sx.i0] +
                                            sx.w1 * xp[sy.i1 * w + sx.i1]);
            }
        }
    }
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("bilinear_resize", out, [x, out, c, h, w, oh, ow, ys, xs]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t ci = 0; ci < c; ++ci) {
                double* gxp = gx + ci * h * w;
                const double* gop = go + ci * oh * ow;
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    const auto& sy = ys[static_cast<std::size_t>(oy)];
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const auto& sx = xs[static_cast<std::size_t>(ox)];
                        const double d = gop[oy * ow + ox];
                        gxp[sy.i0 * w + sx.i0] += d * sy.w0 * sx.w0;
                        gxp[sy.i0 * w + sx.i1] += d * sy.w0 * sx.w1;
                        gxp[sy.i1 * w + sx.i0] += d * sy.w1 * sx.w0;
                        gxp[sy.i1 * w + sx.i1] += d * sy.w1 * sx.w1;
                    }
                }
            }
        });
    }
    return out;
}

namespace {

// Shared by shuffle and its inverse: position map for [H,W,C] -> [H*r,W*r,C/r^2].
inline std::int64_t shuffle_src(std::int64_t oy, std::int64_t ox, std::int64_t oc,
                                std::int64_t w, std::int64_t cin, int r) {
    const std::int64_t h0 = oy / r, a = oy % r;
    const std::int64_t w0 = ox / r, bq = ox % r;
    return (h0 * w + w0) * cin + oc * r * r + a * r + bq;
}

}  // namespace

Tensor pixel_shuffle(Graph& g, const Tensor& x, int r) {
    if (x.ndim() != 3)
        throw DimensionError("pixel_shuffle: want [H,W,C], got " + shape_str(x.shape()));
    if (r < 1) throw DomainError("pixel_shuffle: scale must be >= 1");
    const std::int64_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
    if (cin % (static_cast<std::int64_t>(r) * r) != 0)
        throw DimensionError("pixel_shuffle: channels " + std::to_string(cin) +
                             " not divisible by r^2 with r=" + std::to_string(r));
    const std::int64_t cout = cin / (static_cast<std::int64_t>(r) * r);
    Tensor out({h * r, w * r, cout});
    double* op = out.data();
    const double* xp = x.data();
    for (std::int64_t oy = 0; oy < h * r; ++oy)
        for (std::int64_t ox = 0; ox < w * r; ++ox)
            for (std::int64_t ocn = 0; ocn < cout; ++ocn)
                *op++ = xp[shuffle_src(oy, ox, ocn, w, cin, r)];
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("pixel_shuffle", out, [x, out, h, w, cin, cout, r]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t oy = 0; oy < h * r; ++oy)
                for (std::int64_t ox = 0; ox < w * r; ++ox)
                    for (std::int64_t ocn = 0; ocn < cout; ++ocn)
                        gx[shuffle_src(oy, ox, ocn, w, cin, r)] += *go++;
        });
    }
    return out;
}

Tensor pixel_unshuffle(Graph& g, const Tensor& x, int r) {
    if (x.ndim() != 3)
        throw DimensionError("pixel_unshuffle: want [H,W,C], got " + shape_str(x.shape()));
    if (r < 1) throw DomainError("pixel_unshuffle: scale must be >= 1");
    const std::int64_t h = x.dim(0), w = x.dim(1), cin = x.dim(2);
    if (h % r != 0 || w % r != 0)
        throw DimensionError("pixel_unshuffle: spatial extents " + shape_str(x.shape()) +
                             " not divisible by r=" + std::to_string(r));
    const std::int64_t oh = h / r, ow = w / r;
    const std::int64_t cout = cin * r * r;
    Tensor out({oh, ow, cout});
    const double* xp = x.data();
    double* op = out.data();
    // out is the shuffle-input layout: invert the index law.
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xo = 0; xo < w; ++xo)
            for (std::int64_t ci = 0; ci < cin; ++ci)
                op[shuffle_src(y, xo, ci, ow, cout, r)] = xp[(y * w + xo) * cin + ci];
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("pixel_unshuffle", out, [x, out, h, w, cin, cout, ow, r]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t xo = 0; xo < w; ++xo)
                    for (std::int64_t ci = 0; ci < cin; ++ci)
                        gx[(y * w + xo) * cin + ci] += go[shuffle_src(y, xo, ci, ow, cout, r)];
        });
    }
    return out;
}

Tensor chw_to_hwc(Graph& g, const Tensor& x) {
    if (x.ndim() != 3)
        throw DimensionError("chw_to_hwc: want [C,H,W], got " + shape_str(x.shape()));
    const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({h, w, c});
    for (std::int64_t ci = 0; ci < c; ++ci)
        for (std::int64_t y = 0; y < h; ++y)
            for (std::int64_t xo = 0; xo < w; ++xo)
                out.data()[(y * w + xo) * c + ci] = x.data()[(ci * h + y) * w + xo];
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("chw_to_hwc", out, [x, out, c, h, w]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t ci = 0; ci < c; ++ci)
                for (std::int64_t y = 0; y < h; ++y)
                    for (std::int64_t xo = 0; xo < w; ++xo)
                        gx[(ci * h + y) * w + xo] += go[(y * w + xo) * c + ci];
        });
    }
    return out;
}

Tensor hwc_to_chw(Graph& g, const Tensor& x) {
    if (x.ndim() != 3)
        throw DimensionError("hwc_to_chw: want [H,W,C], got " + shape_str(x.shape()));
    const std::int64_t h = x.dim(0), w = x.dim(1), c = x.dim(2);
    Tensor out({c, h, w});
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t xo = 0; xo < w; ++xo)
            for (std::int64_t ci = 0; ci < c; ++ci)
                out.data()[(ci * h + y) * w + xo] = x.data()[(y * w + xo) * c + ci];
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("hwc_to_chw", out, [x, out, c, h, w]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t y = 0; y < h; ++y)
                for (std::int64_t xo = 0; xo < w; ++xo)
                    for (std::int64_t ci = 0; ci < c; ++ci)
                        gx[(y * w + xo) * c + ci] += go[(ci * h + y) * w + xo];
        });
    }
    return out;
}

Tensor concat_last(Graph& g, const std::vector<Tensor>& xs) {
    if (xs.empty()) throw DimensionError("concat_last: no inputs");
    const std::int64_t h = xs[0].dim(0), w = xs[0].dim(1);
    std::int64_t ctot = 0;
    for (const auto& t : xs) {
        if (t.ndim() != 3 || t.dim(0) != h || t.dim(1) != w)
            throw DimensionError("concat_last: spatial mismatch, " + shape_str(t.shape()) +
                                 " vs " + shape_str(xs[0].shape()));
        ctot += t.dim(2);
    }
    Tensor out({h, w, ctot});
    {
        double* op = out.data();
        for (std::int64_t p = 0; p < h * w; ++p)
            for (const auto& t : xs) {
                const std::int64_t c = t.dim(2);
                const double* tp = t.data() + p * c;
                for (std::int64_t j = 0; j < c; ++j) *op++ = tp[j];
            }
    }
    bool any = false;
    for (const auto& t : xs)
        if (t.requires_grad()) any = true;
    if (g.recording() && any) {
        out.set_requires_grad(true);
        g.record("concat_last", out, [xs, out, h, w, ctot]() mutable {
            const double* go = out.grad();
            for (std::int64_t p = 0; p < h * w; ++p) {
                const double* grow = go + p * ctot;
                std::int64_t off = 0;
                for (auto& t : xs) {
                    const std::int64_t c = t.dim(2);
                    if (double* gt = t.grad()) {
                        double* gtp = gt + p * c;
                        for (std::int64_t j = 0; j < c; ++j) gtp[j] += grow[off + j];
                    }
                    off += c;
                }
            }
        });
    }
    return out;
}

Tensor concat_first(Graph& g, const std::vector<Tensor>& xs) {
    if (xs.empty()) throw DimensionError("concat_first: no inputs");
    Shape tail(xs[0].shape().begin() + 1, xs[0].shape().end());
    std::int64_t ctot = 0;
    for (const auto& t : xs) {
        Shape tt(t.shape().begin() + 1, t.shape().end());
        if (t.ndim() != xs[0].ndim() || tt != tail)
            throw DimensionError("concat_first: trailing extents mismatch, " +
                                 shape_str(t.shape()) + " vs " + shape_str(xs[0].shape()));
        ctot += t.dim(0);
    }
    Shape os = xs[0].shape();
    os[0] = ctot;
    Tensor out(os);
    {
        double* op = out.data();
        for (const auto& t : xs) {
            const double* tp = t.data();
            std::copy(tp, tp + t.size(), op);
            op += t.size();
        }
    }
    bool any = false;
    for (const auto& t : xs)
        if (t.requires_grad()) any = true;
    if (g.recording() && any) {
        out.set_requires_grad(true);
        g.record("concat_first", out, [xs, out]() mutable {
            const double* go = out.grad();
            for (auto& t : xs) {
                if (double* gt = t.grad())
                    for (std::int64_t i = 0; i < t.size(); ++i) gt[i] += go[i];
                go += t.size();
            }
        });
    }
    return out;
}

}  // namespace forma::ops
