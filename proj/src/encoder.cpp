#include "forma/encoder.hpp"

namespace forma {

VssBlock VssBlock::init(std::mt19937_64& rng, std::int64_t c, std::int64_t n,
                        std::int64_t dt_rank) {
    VssBlock b;
    const std::int64_t d = 2 * c;
    b.ln_in = LayerNormLayer::init(c);
    b.proj_in = LinearLayer::init(rng, c, d);
    b.proj_gate = LinearLayer::init(rng, c, d);
    b.dw = DwConvLayer::init(rng, d, 3);
    for (auto& s : b.ssm) s = ss2d::make_ssm_params(rng, d, n, dt_rank);
    b.ln_ssm = LayerNormLayer::init(d);
    b.proj_out = LinearLayer::init(rng, d, c);
    return b;
}

Tensor VssBlock::forward(Graph& g, const Tensor& x, std::int64_t chunk) const {
    Tensor n1 = ln_in.forward(g, x);
    Tensor gate = proj_gate.forward(g, n1);
    Tensor t = proj_in.forward(g, n1);
    t = ops::hwc_to_chw(g, t);
    t = dw.forward(g, t);
    t = ops::chw_to_hwc(g, t);
    t = ops::silu(g, t);
    t = ss2d::ss2d_forward(g, t, ssm, chunk);
    t = ln_ssm.forward(g, t);
    t = ops::mul(g, t, ops::silu(g, gate));
    return ops::add(g, x, proj_out.forward(g, t));
}

void VssBlock::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    ln_in.collect(prefix + ".ln_in", out);
    proj_in.collect(prefix + ".proj_in", out);
    proj_gate.collect(prefix + ".proj_gate", out);
    dw.collect(prefix + ".dw", out);
    for (int k = 0; k < 4; ++k) {
        const auto& s = ssm[static_cast<std::size_t>(k)];
        const std::string p = prefix + ".ssm" + std::to_string(k);
        out.push_back({p + ".w_dt_lo", s.w_dt_lo});
        out.push_back({p + ".w_dt_hi", s.w_dt_hi});
        out.push_back({p + ".b_dt", s.b_dt});
        out.push_back({p + ".w_b", s.w_b});
        out.push_back({p + ".w_c", s.w_c});
        out.push_back({p + ".a_log", s.a_log});
        out.push_back({p + ".d_skip", s.d_skip});
    }
    ln_ssm.collect(prefix + ".ln_ssm", out);
    proj_out.collect(prefix + ".proj_out", out);
}

Downsample Downsample::init(std::mt19937_64& rng, std::int64_t c) {
    Downsample d;
    d.reduce = LinearLayer::init(rng, 4 * c, 2 * c);
    d.ln = LayerNormLayer::init(2 * c);
    return d;
}

Tensor Downsample::forward(Graph& g, const Tensor& x) const {
    Tensor t = ops::pixel_unshuffle(g, x, 2);
    t = reduce.forward(g, t);
    return ln.forward(g, t);
}

void Downsample::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    reduce.collect(prefix + ".reduce", out);
    ln.collect(prefix + ".ln", out);
}

PatchEmbed PatchEmbed::init(std::mt19937_64& rng, std::int64_t c) {
    PatchEmbed p;
    p.conv = Conv2dLayer::init(rng, 3, c, 4, 4, 0);
    p.ln = LayerNormLayer::init(c);
    return p;
}

Tensor PatchEmbed::forward(Graph& g, const Tensor& image) const {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw DimensionError("patch embed: want an RGB image [3,H,W], got " +
                             shape_str(image.shape()));
    if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0)
        throw DimensionError("patch embed: extents must be multiples of 4, got " +
                             shape_str(image.shape()));
    Tensor t = conv.forward(g, image);
    t = ops::chw_to_hwc(g, t);
    return ln.forward(g, t);
}

void PatchEmbed::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    conv.collect(prefix + ".conv", out);
    ln.collect(prefix + ".ln", out);
}

VssEncoder VssEncoder::init(std::mt19937_64& rng, const ModelConfig& cfg) {
    VssEncoder e;
    e.stem = PatchEmbed::init(rng, cfg.embed_dim);
    for (int i = 0; i < 4; ++i) {
        const std::int64_t c = cfg.stage_channels(i);
        auto& blocks = e.stages[static_cast<std::size_t>(i)];
        blocks.reserve(static_cast<std::size_t>(cfg.depths[static_cast<std::size_t>(i)]));
        for (std::int64_t k = 0; k < cfg.depths[static_cast<std::size_t>(i)]; ++k)
            blocks.push_back(VssBlock::init(rng, c, cfg.state_dim, cfg.dt_rank(i)));
        if (i < 3) e.downs[static_cast<std::size_t>(i)] = Downsample::init(rng, c);
    }
    return e;
}

FeaturePyramid VssEncoder::run_stages(Graph& g, const Tensor& tokens,
                                      std::int64_t chunk) const {
    FeaturePyramid out;
    Tensor t = tokens;
    for (int i = 0; i < 4; ++i) {
        for (const auto& b : stages[static_cast<std::size_t>(i)])
            t = b.forward(g, t, chunk);
        out.f[static_cast<std::size_t>(i)] = t;
        if (i < 3) t = downs[static_cast<std::size_t>(i)].forward(g, t);
    }
    return out;
}

void VssEncoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    stem.collect(prefix + ".stem", out);
    for (int i = 0; i < 4; ++i) {
        const auto& blocks = stages[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < blocks.size(); ++k)
            blocks[k].collect(prefix + ".stage" + std::to_string(i) + ".block" +
                              std::to_string(k), out);
        if (i < 3)
            downs[static_cast<std::size_t>(i)].collect(
                prefix + ".down" + std::to_string(i), out);
    }
}

}  // namespace forma
