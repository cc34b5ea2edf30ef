#include "forma/decoder.hpp"

namespace forma {

ShuffleDecoder ShuffleDecoder::init(std::mt19937_64& rng, const ModelConfig& cfg) {
    ShuffleDecoder d;
    d.use_shuffle = cfg.variant != Variant::no_shuffle;
    d.takes_noise = noise_in_decoder(cfg.variant);
    const std::int64_t c = cfg.embed_dim;
    for (int i = 0; i < 4; ++i) {
        const std::int64_t r = ratios[static_cast<std::size_t>(i)];
        const std::int64_t out = d.use_shuffle ? c * r * r : c;
        LinearLayer& e = d.expand[static_cast<std::size_t>(i)] =
            LinearLayer::init(rng, cfg.stage_channels(i), out);
        if (d.use_shuffle && r > 1) {
            // Start all r*r subpixel phases of each output channel identical,
            // so the shuffle begins as a smooth nearest-neighbor upsample
            // instead of checkerboard noise.
            const std::int64_t in = cfg.stage_channels(i);
            for (std::int64_t row = 0; row < in; ++row)
                for (std::int64_t oc = 0; oc < c; ++oc)
                    for (std::int64_t p = 1; p < r * r; ++p)
                        e.w.at(row, oc * r * r + p) = e.w.at(row, oc * r * r);
        }
    }
    const std::int64_t fused_in = 4 * c + (d.takes_noise ? cfg.fmod_channels : 0);
    d.fuse = LinearLayer::init(rng, fused_in, c);
    d.head = LinearLayer::init(rng, c, 2);
    return d;
}

Tensor ShuffleDecoder::forward(Graph& g, const FeaturePyramid& pyr,
                               const Tensor& fmod) const {
    if (takes_noise != fmod.defined())
        throw DimensionError(takes_noise ? "decoder wants noise tokens but got none"
                                     : "decoder was built without a noise input");
    const std::int64_t h = pyr.f[0].dim(0), w = pyr.f[0].dim(1);
    std::vector<Tensor> levels;
    levels.reserve(5);
    for (int i = 0; i < 4; ++i) {
        Tensor e = expand[static_cast<std::size_t>(i)].forward(
            g, pyr.f[static_cast<std::size_t>(i)]);
        if (use_shuffle) {
            e = ops::pixel_shuffle(g, e, ratios[static_cast<std::size_t>(i)]);
        } else if (e.dim(0) != h || e.dim(1) != w) {
            e = ops::chw_to_hwc(g, ops::bilinear_resize(g, ops::hwc_to_chw(g, e), h, w));
        }
        if (e.dim(0) != h || e.dim(1) != w)
            throw DimensionError("decoder: level " + std::to_string(i) + " landed at " +
                                 shape_str(e.shape()) + ", expected " +
                                 std::to_string(h) + "x" + std::to_string(w));
        levels.push_back(e);
    }
    if (takes_noise) {
        if (fmod.ndim() != 3 || fmod.dim(0) != h || fmod.dim(1) != w)
            throw DimensionError("decoder: noise tokens " + shape_str(fmod.shape()) +
                                 " do not sit on the stride-4 grid " +
                                 std::to_string(h) + "x" + std::to_string(w));
        levels.push_back(fmod);
    }
    Tensor fused = fuse.forward(g, ops::concat_last(g, levels));
    return head.forward(g, fused);
}

void ShuffleDecoder::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    for (int i = 0; i < 4; ++i)
        expand[static_cast<std::size_t>(i)].collect(prefix + ".expand" + std::to_string(i),
                                                    out);
    fuse.collect(prefix + ".fuse", out);
    head.collect(prefix + ".head", out);
}

Tensor logits_to_prob(Graph& g, const Tensor& logits, std::int64_t h, std::int64_t w) {
    if (logits.ndim() != 3 || logits.dim(2) != 2)
        throw DimensionError("logits_to_prob: want [h,w,2], got " + shape_str(logits.shape()));
    Tensor t = ops::hwc_to_chw(g, logits);
    t = ops::bilinear_resize(g, t, h, w);
    t = ops::chw_to_hwc(g, t);
    return ops::softmax2_prob(g, t);
}

Tensor predict_mask(const Tensor& prob, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0))
        throw DomainError("predict_mask: threshold " + std::to_string(tau) +
                          " outside [0,1]");
    Tensor out(prob.shape());
    for (std::int64_t i = 0; i < prob.size(); ++i)
        out.data()[i] = prob.data()[i] >= tau ? 1.0 : 0.0;
    return out;
}

}  // namespace forma
