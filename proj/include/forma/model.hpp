#pragma once

#include <optional>
#include <string>

#include "forma/decoder.hpp"
#include "forma/encoder.hpp"
#include "forma/noise.hpp"

#include <nlohmann/json.hpp>

namespace forma {

// Full localization network: VSS encoder pyramid, noise side branch and
// shuffle decoder, wired according to the configured variant.
struct FormaNet {
    ModelConfig cfg;
    VssEncoder encoder;
    NoiseExtractor noise;        // unused storage for the no_noise variant
    LinearLayer stem_noise_mix;  // only for noise_into_encoder: C+C_mod -> C
    ShuffleDecoder decoder;

    static FormaNet init(std::uint64_t seed, const ModelConfig& cfg);

    struct Output {
        Tensor logits;  // [H/4, W/4, 2]
        Tensor prob;    // [H, W]
    };
    // noise_override, when defined, stands in for the computed noise
    // tokens; it is a [C_mod, H/4, W/4] map as read by load_noise_map.
    Output forward(Graph& g, const Tensor& image,
                   const Tensor& noise_override = Tensor(),
                   std::int64_t chunk = 512) const;

    std::vector<NamedParam> parameters() const;

    // Re-applies in-place constraints after an optimizer step.
    void project_constraints(std::mt19937_64& rng);
};

// Checkpoint container: a JSON header plus named double tensors.
struct Checkpoint {
    nlohmann::json meta;
    std::vector<NamedParam> tensors;
};
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const nlohmann::json& j);

// Convenience wrappers used by the CLI and trainer.
void save_model(const std::string& path, const FormaNet& net, nlohmann::json extra_meta,
                const std::vector<NamedParam>& extra_tensors = {});
FormaNet load_model(const std::string& path, Checkpoint* raw = nullptr);

}  // namespace forma
