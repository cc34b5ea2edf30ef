#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "forma/common.hpp"

namespace forma {

enum class Variant {
    full,
    no_noise,            // decoder fuses encoder features only
    no_shuffle,          // channel projection + bilinear instead of pixel shuffle
    noise_into_encoder,  // noise features joined at the stem instead of the decoder
    no_dice,             // loss ablation, architecture identical to full
    no_focal,            // loss ablation, architecture identical to full
};

Variant variant_from_string(const std::string& s);
std::string variant_name(Variant v);

// True when the decoder consumes the noise branch output.
inline bool noise_in_decoder(Variant v) {
    return v != Variant::no_noise && v != Variant::noise_into_encoder;
}
inline bool has_noise_branch(Variant v) { return v != Variant::no_noise; }

struct ModelConfig {
    std::string scale = "toy";
    std::int64_t embed_dim = 16;                  // stage-1 channels
    std::array<std::int64_t, 4> depths{1, 1, 2, 1};
    std::int64_t state_dim = 4;                   // SSM state size N
    std::int64_t expand = 2;                      // inner dim = expand * channels
    std::int64_t resid_channels = 8;              // learnable noise stream width
    std::int64_t fmod_channels = 16;              // fused noise feature width
    std::int64_t input_size = 64;                 // nominal square input
    Variant variant = Variant::full;

    std::int64_t stage_channels(int i) const { return embed_dim << i; }
    std::int64_t inner_dim(int i) const { return expand * stage_channels(i); }
    // Factored delta-projection rank, a third of the block width.
    std::int64_t dt_rank(int i) const {
        return std::max<std::int64_t>(1, stage_channels(i) / 3);
    }

    static ModelConfig toy_scale();
    static ModelConfig paper_scale();
    static ModelConfig from_scale(const std::string& scale);
};

}  // namespace forma
