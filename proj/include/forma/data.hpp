#pragma once

#include <string>
#include <vector>

#include "forma/tensor.hpp"

namespace forma {

enum class TamperKind { authentic, splice, copy_move };

struct Sample {
    Tensor image;  // [3,H,W] in [0,1]
    Tensor mask;   // [H,W] 0/1, nonempty exactly when kind != authentic
    TamperKind kind = TamperKind::authentic;
};

// Deterministic synthetic forgeries. Spliced regions come from a donor
// with different colors and noticeably different sensor grain; copy-move
// regions are rotated and resampled, which smooths their grain. Tampered
// masks cover between 1% and 30% of the image and at least 16 pixels.
Sample synth_tamper(std::uint64_t seed, std::int64_t h, std::int64_t w);
Sample synth_tamper(std::uint64_t seed, std::int64_t h, std::int64_t w, TamperKind kind);

struct AugmentConfig {
    double p_flip = 0.5;   // horizontal and vertical, drawn independently
    double p_blur = 0.3;
    double p_jpeg = 0.3;
    double p_noise = 0.3;
};
// Geometric changes touch image and mask together; photometric ones only
// the image.
Sample augment(const Sample& s, std::uint64_t seed, const AugmentConfig& cfg = {});

enum class PerturbKind { jpeg, blur, noise, resize };

struct Perturbation {
    PerturbKind kind = PerturbKind::jpeg;
    // jpeg: quality 30..100; blur: sigma 0..5; noise: sigma 0..0.1;
    // resize: scale factor 0.25..2 (down and back up).
    double strength = 100.0;
};

Tensor perturb(const Tensor& image, const Perturbation& p, std::uint64_t seed = 0);

PerturbKind perturb_kind_from_string(const std::string& s);
std::string perturb_kind_name(PerturbKind k);

struct ManifestEntry {
    std::string image;
    std::string mask;
    std::string dataset = "default";
};

// One JSON object per line: {"image": ..., "mask": ..., "dataset": ...}.
std::vector<ManifestEntry> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

// Renders count synthetic samples into dir (PNG images and masks) and
// writes dir/manifest.jsonl; returns the manifest path.
std::string write_synth_dataset(const std::string& dir, std::int64_t count,
                                std::uint64_t seed, std::int64_t h, std::int64_t w);

}  // namespace forma
