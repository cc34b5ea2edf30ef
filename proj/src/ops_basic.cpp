#include <cmath>

#include "forma/ops.hpp"

namespace forma::ops {

namespace {

void need_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

double sigmoid_stable(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

Tensor add(Graph& g, const Tensor& a, const Tensor& b) {
    need_same_shape("add", a, b);
    Tensor out(a.shape());
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    if (track(g, {&a, &b})) {
        out.set_requires_grad(true);
        g.record("add", out, [a, b, out]() mutable {
            const double* go = out.grad();
            if (double* ga = a.grad())
                for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += go[i];
            if (double* gb = b.grad())
                for (std::int64_t i = 0; i < b.size(); ++i) gb[i] += go[i];
        });
    }
    return out;
}

Tensor sub(Graph& g, const Tensor& a, const Tensor& b) {
    need_same_shape("sub", a, b);
    Tensor out(a.shape());
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    if (track(g, {&a, &b})) {
        out.set_requires_grad(true);
        g.record("sub", out, [a, b, out]() mutable {
            const double* go = out.grad();
            if (double* ga = a.grad())
                for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += go[i];
            if (double* gb = b.grad())
                for (std::int64_t i = 0; i < b.size(); ++i) gb[i] -= go[i];
        });
    }
    return out;
}

Tensor mul(Graph& g, const Tensor& a, const Tensor& b) {
    need_same_shape("mul", a, b);
    Tensor out(a.shape());
    const std::int64_t n = a.size();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    if (track(g, {&a, &b})) {
        out.set_requires_grad(true);
        g.record("mul", out, [a, b, out]() mutable {
            const double* go = out.grad();
            if (double* ga = a.grad())
                for (std::int64_t i = 0; i < a.size(); ++i) ga[i] += go[i] * b.data()[i];
            if (double* gb = b.grad())
                for (std::int64_t i = 0; i < b.size(); ++i) gb[i] += go[i] * a.data()[i];
        });
    }
    return out;
}

Tensor scale(Graph& g, const Tensor& x, double a) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] * a;
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("scale", out, [x, out, a]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += go[i] * a;
        });
    }
    return out;
}

Tensor add_scalar(Graph& g, const Tensor& x, double a) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) out.data()[i] = x.data()[i] + a;
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("add_scalar", out, [x, out]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += go[i];
        });
    }
    return out;
}

Tensor silu(Graph& g, const Tensor& x) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double s = sigmoid_stable(x.data()[i]);
        out.data()[i] = x.data()[i] * s;
    }
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("silu", out, [x, out]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) {
                const double s = sigmoid_stable(x.data()[i]);
                gx[i] += go[i] * s * (1.0 + x.data()[i] * (1.0 - s));
            }
        });
    }
    return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i)
        out.data()[i] = sigmoid_stable(x.data()[i]);
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("sigmoid", out, [x, out]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) {
                const double s = out.data()[i];
                gx[i] += go[i] * s * (1.0 - s);
            }
        });
    }
    return out;
}

Tensor softplus(Graph& g, const Tensor& x) {
    Tensor out(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        // max(x,0) + log1p(exp(-|x|)) avoids overflow for large |x|.
        const double v = x.data()[i];
        out.data()[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    }
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("softplus", out, [x, out]() mutable {
            const double* go = out.grad();
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i)
                gx[i] += go[i] * sigmoid_stable(x.data()[i]);
        });
    }
    return out;
}

Tensor sum_all(Graph& g, const Tensor& x) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc);
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("sum_all", out, [x, out]() mutable {
            const double go = out.grad()[0];
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += go;
        });
    }
    return out;
}

Tensor mean_all(Graph& g, const Tensor& x) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::scalar(acc * inv);
    if (track(g, {&x})) {
        out.set_requires_grad(true);
        g.record("mean_all", out, [x, out, inv]() mutable {
            const double go = out.grad()[0] * inv;
            double* gx = x.grad();
            for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += go;
        });
    }
    return out;
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.ndim() != 2)
        throw DimensionError("linear: weight must be 2-d, got " + shape_str(w.shape()));
    if (x.ndim() < 1 || x.shape().back() != w.dim(0))
        throw DimensionError("linear: input " + shape_str(x.shape()) +
                             " does not match weight " + shape_str(w.shape()));
    const std::int64_t in = w.dim(0), out_c = w.dim(1);
    if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_c))
        throw DimensionError("linear: bias " + shape_str(b.shape()) +
                             " does not match weight " + shape_str(w.shape()));
    const std::int64_t rows = x.size() / in;

    Shape os = x.shape();
    os.back() = out_c;
    Tensor out(os);
    {
        const double* xp = x.data();
        const double* wp = w.data();
        double* op = out.data();
        for (std::int64_t r = 0; r < rows; ++r) {
            double* orow = op + r * out_c;
            if (b.defined())
                for (std::int64_t j = 0; j < out_c; ++j) orow[j] = b.data()[j];
            const double* xrow = xp + r * in;
            for (std::int64_t i = 0; i < in; ++i) {
                const double xv = xrow[i];
                const double* wrow = wp + i * out_c;
                for (std::int64_t j = 0; j < out_c; ++j) orow[j] += xv * wrow[j];
            }
        }
    }
    if (track(g, {&x, &w, &b})) {
        out.set_requires_grad(true);
        g.record("linear", out, [x, w, b, out, rows, in, out_c]() mutable {
            const double* go = out.grad();
            if (double* gx = x.grad()) {
                const double* wp = w.data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* grow = go + r * out_c;
                    double* gxrow = gx + r * in;
                    for (std::int64_t i = 0; i < in; ++i) {
                        const double* wrow = wp + i * out_c;
                        double acc = 0.0;
                        for (std::int64_t j = 0; j < out_c; ++j) acc += grow[j] * wrow[j];
                        gxrow[i] += acc;
                    }
                }
            }
            if (double* gw = w.grad()) {
                const double* xp = x.data();
                for (std::int64_t r = 0; r < rows; ++r) {
                    const double* grow = go + r * out_c;
                    const double* xrow = xp + r * in;
                    for (std::int64_t i = 0; i < in; ++i) {
                        const double xv = xrow[i];
                        if (xv == 0.0) continue;
                        double* gwrow = gw + i * out_c;
                        for (std::int64_t j = 0; j < out_c; ++j) gwrow[j] += xv * grow[j];
                    }
                }
            }
            if (b.defined())
                if (double* gb = b.grad())
                    for (std::int64_t r = 0; r < rows; ++r) {
                        const double* grow = go + r * out_c;
                        for (std::int64_t j = 0; j < out_c; ++j) gb[j] += grow[j];
                    }
        });
    }
    return out;
}

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps) {
    const std::int64_t c = x.shape().back();
    if (gamma.ndim() != 1 || gamma.dim(0) != c || beta.ndim() != 1 || beta.dim(0) != c)
        throw DimensionError("layer_norm: scale/shift " + shape_str(gamma.shape()) +
                             "/" + shape_str(beta.shape()) +
                             " do not match channels of " + shape_str(x.shape()));
    const std::int64_t rows = x.size() / c;
    Tensor out(x.shape());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> mean(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data() + r * c;
        double m = 0.0;
        for (std::int64_t j = 0; j < c; ++j) m += xr[j];
        m /= static_cast<double>(c);
        double var = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
            const double d = xr[j] - m;
            var += d * d;
        }
        var /= static_cast<double>(c);
        const double inv = 1.0 / std::sqrt(var + eps);
        mean[static_cast<std::size_t>(r)] = m;
        inv_std[static_cast<std::size_t>(r)] = inv;
        double* orow = out.data() + r * c;
        for (std::int64_t j = 0; j < c; ++j)
            orow[j] = (xr[j] - m) * inv * gamma.data()[j] + beta.data()[j];
    }
    if (track(g, {&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        g.record("layer_norm", out,
                 [x, gamma, beta, out, rows, c, mean, inv_std]() mutable {
            const double* go = out.grad();
            for (std::int64_t r = 0; r < rows; ++r) {
                const double* xr = x.data() + r * c;
                const double* grow = go + r * c;
                const double m = mean[static_cast<std::size_t>(r)];
                const double inv = inv_std[static_cast<std::size_t>(r)];
                double dot = 0.0, sum = 0.0;
                for (std::int64_t j = 0; j < c; ++j) {
                    const double xh = (xr[j] - m) * inv;
                    const double gg = grow[j] * gamma.data()[j];
                    sum += gg;
                    dot += gg * xh;
                }
                sum /= static_cast<double>(c);
                dot /= static_cast<double>(c);
                if (double* gx = x.grad()) {
                    double* gxr = gx + r * c;
                    for (std::int64_t j = 0; j < c; ++j) {
                        const double xh = (xr[j] - m) * inv;
                        const double gg = grow[j] * gamma.data()[j];
                        gxr[j] += (gg - sum - xh * dot) * inv;
                    }
                }
                if (double* gs = gamma.grad())
                    for (std::int64_t j = 0; j < c; ++j)
                        gs[j] += grow[j] * (xr[j] - m) * inv;
                if (double* gb = beta.grad())
                    for (std::int64_t j = 0; j < c; ++j) gb[j] += grow[j];
            }
        });
    }
    return out;
}

Tensor softmax2_prob(Graph& g, const Tensor& logits) {
    if (logits.ndim() < 1 || logits.shape().back() != 2)
        throw DimensionError("softmax2_prob: last axis must be 2, got " +
                             shape_str(logits.shape()));
    Shape os(logits.shape().begin(), logits.shape().end() - 1);
    if (os.empty()) os = {1};
    Tensor out(os);
    const std::int64_t n = out.size();
    for (std::int64_t i = 0; i < n; ++i)
        out.data()[i] = sigmoid_stable(logits.data()[2 * i + 1] - logits.data()[2 * i]);
    if (track(g, {&logits})) {
        out.set_requires_grad(true);
        g.record("softmax2_prob", out, [logits, out, n]() mutable {
            const double* go = out.grad();
            double* gl = logits.grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const double p = out.data()[i];
                const double d = go[i] * p * (1.0 - p);
                gl[2 * i + 1] += d;
                gl[2 * i] -= d;
            }
        });
    }
    return out;
}

}  // namespace forma::ops
