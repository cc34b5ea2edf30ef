#include "forma/layers.hpp"

namespace forma {

namespace {

Tensor trunc_normal_tensor(std::mt19937_64& rng, Shape s) {
    Tensor t(std::move(s));
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = trunc_normal(rng, 0.02);
    t.set_requires_grad(true);
    return t;
}

}  // namespace

LinearLayer LinearLayer::init(std::mt19937_64& rng, std::int64_t in, std::int64_t out,
                              bool bias) {
    LinearLayer l;
    l.w = trunc_normal_tensor(rng, {in, out});
    if (bias) l.b = Tensor({out}, 0.0, true);
    return l;
}

void LinearLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".w", w});
    if (b.defined()) out.push_back({prefix + ".b", b});
}

LayerNormLayer LayerNormLayer::init(std::int64_t c) {
    LayerNormLayer l;
    l.gamma = Tensor({c}, 1.0, true);
    l.beta = Tensor({c}, 0.0, true);
    return l;
}

void LayerNormLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

Conv2dLayer Conv2dLayer::init(std::mt19937_64& rng, std::int64_t in, std::int64_t out,
                              int ksize, int stride, int padding, bool bias) {
    Conv2dLayer l;
    l.k = trunc_normal_tensor(rng, {out, in, ksize, ksize});
    if (bias) l.b = Tensor({out}, 0.0, true);
    l.stride = stride;
    l.padding = padding;
    return l;
}

void Conv2dLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".k", k});
    if (b.defined()) out.push_back({prefix + ".b", b});
}

DwConvLayer DwConvLayer::init(std::mt19937_64& rng, std::int64_t c, int ksize) {
    DwConvLayer l;
    l.k = trunc_normal_tensor(rng, {c, ksize, ksize});
    l.b = Tensor({c}, 0.0, true);
    return l;
}

void DwConvLayer::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".k", k});
    out.push_back({prefix + ".b", b});
}

}  // namespace forma
