#pragma once

#include <array>
#include <vector>

#include "forma/layers.hpp"
#include "forma/model_config.hpp"
#include "forma/ss2d.hpp"

namespace forma {

// Residual token mixer: the normalized input runs through a gated SS2D
// branch and is added back, so a freshly built block with zero-weight
// output projection is an identity map.
struct VssBlock {
    LayerNormLayer ln_in;
    LinearLayer proj_in;    // C -> D
    LinearLayer proj_gate;  // C -> D
    DwConvLayer dw;         // 3x3 over D
    std::array<ss2d::SsmParams, 4> ssm;
    LayerNormLayer ln_ssm;  // over D
    LinearLayer proj_out;   // D -> C

    static VssBlock init(std::mt19937_64& rng, std::int64_t c, std::int64_t n,
                         std::int64_t dt_rank);
    Tensor forward(Graph& g, const Tensor& x, std::int64_t chunk) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Halves the grid, doubles the channels: 2x2 patch fold + linear + norm.
struct Downsample {
    LinearLayer reduce;  // 4C -> 2C
    LayerNormLayer ln;   // over 2C

    static Downsample init(std::mt19937_64& rng, std::int64_t c);
    Tensor forward(Graph& g, const Tensor& x) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// 4x4 stride-4 convolution + norm; image [3,H,W] -> tokens [H/4,W/4,C].
struct PatchEmbed {
    Conv2dLayer conv;
    LayerNormLayer ln;

    static PatchEmbed init(std::mt19937_64& rng, std::int64_t c);
    Tensor forward(Graph& g, const Tensor& image) const;
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct FeaturePyramid {
    std::array<Tensor, 4> f;  // strides 4, 8, 16, 32, channels C..8C
};

struct VssEncoder {
    PatchEmbed stem;
    std::array<std::vector<VssBlock>, 4> stages;
    std::array<Downsample, 3> downs;

    static VssEncoder init(std::mt19937_64& rng, const ModelConfig& cfg);

    Tensor embed(Graph& g, const Tensor& image) const { return stem.forward(g, image); }
    // tokens is the stem output (possibly with extra features mixed in).
    FeaturePyramid run_stages(Graph& g, const Tensor& tokens, std::int64_t chunk) const;
    FeaturePyramid forward(Graph& g, const Tensor& image, std::int64_t chunk) const {
        return run_stages(g, embed(g, image), chunk);
    }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

}  // namespace forma
