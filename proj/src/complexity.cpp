#include "forma/complexity.hpp"

#include <iomanip>
#include <sstream>

namespace forma {

namespace {

void add(ComplexityReport& r, const std::string& name, std::int64_t params,
         std::int64_t macs) {
    r.layers.push_back({name, params, macs});
    r.total_params += params;
    r.total_macs += macs;
}

}  // namespace

ComplexityReport complexity_report(const ModelConfig& cfg, std::int64_t h, std::int64_t w,
                                   double flops_per_mac) {
    if (h % 32 != 0 || w % 32 != 0)
        throw DomainError("complexity: extents must be multiples of 32, got " +
                          std::to_string(h) + "x" + std::to_string(w));
    if (!(flops_per_mac > 0.0)) throw DomainError("complexity: flops_per_mac must be positive");
    ComplexityReport r;
    r.flops_per_mac = flops_per_mac;
    r.input_h = h;
    r.input_w = w;

    const std::int64_t c0 = cfg.embed_dim;
    const std::int64_t l1 = (h / 4) * (w / 4);

    add(r, "encoder.stem.conv", c0 * 3 * 16 + c0, l1 * c0 * 3 * 16);
    add(r, "encoder.stem.ln", 2 * c0, 0);

    for (int i = 0; i < 4; ++i) {
        const std::int64_t c = cfg.stage_channels(i);
        const std::int64_t d = cfg.inner_dim(i);
        const std::int64_t rk = cfg.dt_rank(i);
        const std::int64_t n = cfg.state_dim;
        const std::int64_t l = (h >> (2 + i)) * (w >> (2 + i));
        for (std::int64_t bidx = 0; bidx < cfg.depths[static_cast<std::size_t>(i)]; ++bidx) {
            const std::string p =
                "encoder.stage" + std::to_string(i) + ".block" + std::to_string(bidx);
            add(r, p + ".ln_in", 2 * c, 0);
            add(r, p + ".proj_in", c * d + d, l * c * d);
            add(r, p + ".proj_gate", c * d + d, l * c * d);
            add(r, p + ".dw", d * 9 + d, l * d * 9);
            for (int k = 0; k < 4; ++k) {
                const std::string q = p + ".ssm" + std::to_string(k);
                add(r, q + ".dt_proj", d * rk + rk * d + d, l * d * rk * 2);
                add(r, q + ".bc_proj", 2 * d * n, l * d * n * 2);
                add(r, q + ".state", d * n + d, 0);  // a_log and d_skip
                add(r, q + ".scan", 0, l * d * (6 * n + 1));
            }
            add(r, p + ".ln_ssm", 2 * d, 0);
            add(r, p + ".proj_out", d * c + c, l * d * c);
        }
        if (i < 3) {
            const std::int64_t lo = (h >> (3 + i)) * (w >> (3 + i));
            add(r, "encoder.down" + std::to_string(i) + ".reduce",
                4 * c * 2 * c + 2 * c, lo * 4 * c * 2 * c);
            add(r, "encoder.down" + std::to_string(i) + ".ln", 4 * c, 0);
        }
    }

    if (has_noise_branch(cfg.variant)) {
        const std::int64_t cr = cfg.resid_channels, cm = cfg.fmod_channels;
        const std::int64_t px = h * w;
        add(r, "noise.srm", 0, px * 9 * 25);  // frozen filters still cost work
        add(r, "noise.bayar", 3 * 25, px * 3 * 25);
        add(r, "noise.resid1", cr * 3 * 9 + cr, px * cr * 3 * 9);
        add(r, "noise.resid2", cr * cr * 9 + cr, px * cr * cr * 9);
        add(r, "noise.resid3", cr * cr * 9 + cr, px * cr * cr * 9);
        add(r, "noise.fuse1", cm * (12 + cr) * 9 + cm, (px / 4) * cm * (12 + cr) * 9);
        add(r, "noise.fuse2", cm * cm * 9 + cm, (px / 16) * cm * cm * 9);
        add(r, "noise.ln", 2 * cm, 0);
    }
    if (cfg.variant == Variant::noise_into_encoder)
        add(r, "stem_noise_mix", (c0 + cfg.fmod_channels) * c0 + c0,
            l1 * (c0 + cfg.fmod_channels) * c0);

    const bool shuffle = cfg.variant != Variant::no_shuffle;
    static constexpr int ratios[4] = {1, 2, 4, 8};
    for (int i = 0; i < 4; ++i) {
        const std::int64_t ci = cfg.stage_channels(i);
        const std::int64_t li = (h >> (2 + i)) * (w >> (2 + i));
        const std::int64_t out = shuffle ? c0 * ratios[i] * ratios[i] : c0;
        add(r, "decoder.expand" + std::to_string(i), ci * out + out, li * ci * out);
    }
    const std::int64_t fuse_in = 4 * c0 + (noise_in_decoder(cfg.variant) ? cfg.fmod_channels : 0);
    add(r, "decoder.fuse", fuse_in * c0 + c0, l1 * fuse_in * c0);
    add(r, "decoder.head", c0 * 2 + 2, l1 * c0 * 2);

    return r;
}

std::int64_t param_count(const ModelConfig& cfg) {
    return complexity_report(cfg, 32, 32).total_params;
}

std::string ComplexityReport::to_table() const {
    std::ostringstream os;
    os << std::left << std::setw(36) << "layer" << std::right << std::setw(14) << "params"
       << std::setw(18) << "macs" << '\n';
    os << std::string(68, '-') << '\n';
    for (const auto& l : layers)
        os << std::left << std::setw(36) << l.name << std::right << std::setw(14) << l.params
           << std::setw(18) << l.macs << '\n';
    os << std::string(68, '-') << '\n';
    os << std::left << std::setw(36) << "total" << std::right << std::setw(14) << total_params
       << std::setw(18) << total_macs << '\n';
    os << "input " << input_h << "x" << input_w << ", params " << std::fixed
       << std::setprecision(2) << static_cast<double>(total_params) / 1e6 << "M, flops "
       << total_flops() / 1e9 << "G (at " << flops_per_mac << " flops/mac)\n";
    return os.str();
}

nlohmann::json ComplexityReport::to_json() const {
    nlohmann::json layers_j = nlohmann::json::array();
    for (const auto& l : layers)
        layers_j.push_back({{"name", l.name}, {"params", l.params}, {"macs", l.macs}});
    return {{"input", {{"h", input_h}, {"w", input_w}}},
            {"flops_per_mac", flops_per_mac},
            {"total_params", total_params},
            {"total_macs", total_macs},
            {"total_flops", total_flops()},
            {"layers", layers_j}};
}

}  // namespace forma
