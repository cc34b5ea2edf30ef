#include "forma/noise.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "forma/ops.hpp"

namespace forma {

Tensor srm_kernel_bank() {
    // 5x5 grids, already divided by their normalizers (4, 12, 2).
    static const double order2[25] = {
        0,  0,    0,    0,    0,
        0, -0.25, 0.5,  -0.25, 0,
        0,  0.5,  -1.0,  0.5,  0,
        0, -0.25, 0.5,  -0.25, 0,
        0,  0,    0,    0,    0,
    };
    static const double kv[25] = {
        -1.0 / 12,  2.0 / 12, -2.0 / 12,  2.0 / 12, -1.0 / 12,
         2.0 / 12, -6.0 / 12,  8.0 / 12, -6.0 / 12,  2.0 / 12,
        -2.0 / 12,  8.0 / 12, -12.0 / 12, 8.0 / 12, -2.0 / 12,
         2.0 / 12, -6.0 / 12,  8.0 / 12, -6.0 / 12,  2.0 / 12,
        -1.0 / 12,  2.0 / 12, -2.0 / 12,  2.0 / 12, -1.0 / 12,
    };
    static const double order1[25] = {
        0, 0,   0,    0,   0,
        0, 0,   0,    0,   0,
        0, 0.5, -1.0, 0.5, 0,
        0, 0,   0,    0,   0,
        0, 0,   0,    0,   0,
    };
    const double* banks[3] = {order2, kv, order1};
    Tensor k({9, 3, 5, 5});
    for (int f = 0; f < 3; ++f)
        for (int c = 0; c < 3; ++c) {
            // Filter f on channel c only; other input channels stay zero.
            double* dst = k.data() + ((static_cast<std::int64_t>(f) * 3 + c) * 3 + c) * 25;
            std::memcpy(dst, banks[f], sizeof(double) * 25);
        }
    return k;
}

void bayar_project(Tensor& k, std::mt19937_64* rng) {
    if (k.ndim() != 3 || k.dim(1) != 5 || k.dim(2) != 5)
        throw DimensionError("bayar_project: want [K,5,5], got " + shape_str(k.shape()));
    std::mt19937_64 fallback(0x6261796172ULL);  // deterministic escape hatch
    if (!rng) rng = &fallback;
    std::uniform_real_distribution<double> u01(0.05, 1.0);
    for (std::int64_t f = 0; f < k.dim(0); ++f) {
        double* w = k.data() + f * 25;
        for (;;) {
            double s = 0.0;
            for (int i = 0; i < 25; ++i)
                if (i != 12) s += w[i];
            if (std::abs(s) > 1e-12) {
                for (int i = 0; i < 25; ++i)
                    if (i != 12) w[i] /= s;
                w[12] = -1.0;
                break;
            }
            for (int i = 0; i < 25; ++i)
                if (i != 12) w[i] = u01(*rng);
        }
    }
}

NoiseExtractor NoiseExtractor::init(std::mt19937_64& rng, const ModelConfig& cfg) {
    NoiseExtractor n;
    n.srm = srm_kernel_bank();  // stays grad-free: constants by design
    n.bayar = Tensor({3, 5, 5});
    {
        std::uniform_real_distribution<double> u01(0.05, 1.0);
        for (std::int64_t i = 0; i < n.bayar.size(); ++i) n.bayar.data()[i] = u01(rng);
        bayar_project(n.bayar, &rng);
        n.bayar.set_requires_grad(true);
    }
    const std::int64_t cr = cfg.resid_channels, cm = cfg.fmod_channels;
    n.resid1 = Conv2dLayer::init(rng, 3, cr, 3, 1, 1);
    n.resid2 = Conv2dLayer::init(rng, cr, cr, 3, 1, 1);
    n.resid3 = Conv2dLayer::init(rng, cr, cr, 3, 1, 1);
    n.fuse1 = Conv2dLayer::init(rng, 9 + 3 + cr, cm, 3, 2, 1);
    n.fuse2 = Conv2dLayer::init(rng, cm, cm, 3, 2, 1);
    n.ln = LayerNormLayer::init(cm);
    return n;
}

Tensor NoiseExtractor::srm_apply(Graph& g, const Tensor& image) const {
    return ops::conv2d(g, image, srm, Tensor(), 1, 2);
}

Tensor NoiseExtractor::bayar_apply(Graph& g, const Tensor& image) const {
    return ops::dwconv(g, image, bayar, Tensor());
}

Tensor NoiseExtractor::residual_apply(Graph& g, const Tensor& image) const {
    Tensor t = ops::silu(g, resid1.forward(g, image));
    t = ops::silu(g, resid2.forward(g, t));
    return resid3.forward(g, t);
}

Tensor NoiseExtractor::forward(Graph& g, const Tensor& image) const {
    if (image.ndim() != 3 || image.dim(0) != 3)
        throw DimensionError("noise extractor: want an RGB image [3,H,W], got " +
                             shape_str(image.shape()));
    if (image.dim(1) % 4 != 0 || image.dim(2) % 4 != 0)
        throw DimensionError("noise extractor: extents must be multiples of 4, got " +
                             shape_str(image.shape()));
    Tensor cat = ops::concat_first(
        g, {srm_apply(g, image), bayar_apply(g, image), residual_apply(g, image)});
    Tensor t = ops::silu(g, fuse1.forward(g, cat));
    t = ops::silu(g, fuse2.forward(g, t));
    t = ops::chw_to_hwc(g, t);
    return ln.forward(g, t);
}

void NoiseExtractor::collect(const std::string& prefix, std::vector<NamedParam>& out) const {
    out.push_back({prefix + ".bayar", bayar});
    resid1.collect(prefix + ".resid1", out);
    resid2.collect(prefix + ".resid2", out);
    resid3.collect(prefix + ".resid3", out);
    fuse1.collect(prefix + ".fuse1", out);
    fuse2.collect(prefix + ".fuse2", out);
    ln.collect(prefix + ".ln", out);
}

void save_noise_map(const std::string& path, const Tensor& chw) {
    if (chw.ndim() != 3)
        throw DimensionError("save_noise_map: want [C,H,W], got " + shape_str(chw.shape()));
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write noise map '" + path + "'");
    f.write("NMAP", 4);
    const std::uint32_t dims[3] = {static_cast<std::uint32_t>(chw.dim(0)),
                                   static_cast<std::uint32_t>(chw.dim(1)),
                                   static_cast<std::uint32_t>(chw.dim(2))};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    std::vector<float> buf(static_cast<std::size_t>(chw.size()));
    for (std::int64_t i = 0; i < chw.size(); ++i)
        buf[static_cast<std::size_t>(i)] = static_cast<float>(chw.data()[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw IoError("short write on noise map '" + path + "'");
}

Tensor load_noise_map(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open noise map '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "NMAP", 4) != 0)
        throw IoError("'" + path + "' is not a noise map (bad magic)");
    std::uint32_t dims[3];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!f) throw IoError("truncated noise map header in '" + path + "'");
    if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0)
        throw IoError("noise map '" + path + "' declares an empty extent");
    const std::int64_t n = static_cast<std::int64_t>(dims[0]) * dims[1] * dims[2];
    std::vector<float> buf(static_cast<std::size_t>(n));
    f.read(reinterpret_cast<char*>(buf.data()),
           static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw IoError("truncated noise map payload in '" + path + "'");
    Tensor t({static_cast<std::int64_t>(dims[0]), static_cast<std::int64_t>(dims[1]),
              static_cast<std::int64_t>(dims[2])});
    for (std::int64_t i = 0; i < n; ++i)
        t.data()[i] = static_cast<double>(buf[static_cast<std::size_t>(i)]);
    return t;
}

}  // namespace forma
