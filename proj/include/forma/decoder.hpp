#pragma once

#include <array>

#include "forma/encoder.hpp"
#include "forma/layers.hpp"
#include "forma/model_config.hpp"

namespace forma {

// Lightweight all-MLP head. Each pyramid level is widened to C*r^2
// channels and pixel-shuffled back onto the stride-4 grid (r = 1,2,4,8),
// the level maps and the noise tokens are concatenated, fused to C and
// projected to two logits per token. The no_shuffle ablation projects
// each level straight to C and upsamples bilinearly instead.
struct ShuffleDecoder {
    std::array<LinearLayer, 4> expand;
    LinearLayer fuse;  // n_levels*C (+ C_mod) -> C
    LinearLayer head;  // C -> 2
    bool use_shuffle = true;
    bool takes_noise = true;
    static constexpr std::array<int, 4> ratios{1, 2, 4, 8};

    static ShuffleDecoder init(std::mt19937_64& rng, const ModelConfig& cfg);

    // fmod must be defined iff the decoder was built to take it.
    // Returns stride-4 logits [H/4, W/4, 2].
    Tensor forward(Graph& g, const FeaturePyramid& pyr, const Tensor& fmod) const;

    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Upsample stride-4 logits to [H,W] and squash to the tampered-class
// probability.
Tensor logits_to_prob(Graph& g, const Tensor& logits, std::int64_t h, std::int64_t w);

// prob >= tau counts as tampered. Returns a 0/1 map.
Tensor predict_mask(const Tensor& prob, double tau);

}  // namespace forma
