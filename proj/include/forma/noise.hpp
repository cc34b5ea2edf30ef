#pragma once

#include <random>
#include <string>
#include <vector>

#include "forma/layers.hpp"
#include "forma/model_config.hpp"

namespace forma {

// Three classic SRM residual filters (second order, KV, first order
// horizontal), each normalized and applied to each RGB channel, giving
// nine fixed residual planes. Returned as a frozen [9,3,5,5] conv kernel.
Tensor srm_kernel_bank();

// Re-imposes the constrained-kernel invariant on a [K,5,5] stack:
// center tap -1, remaining taps summing to 1. Run after every optimizer
// step. A zero off-center sum is escaped by re-randomizing that kernel.
void bayar_project(Tensor& k, std::mt19937_64* rng = nullptr);

// Forensic side branch. Fixed SRM filters, a constrained Bayar stack and
// a small learned residual tower are fused and brought down to the
// stride-4 token grid.
struct NoiseExtractor {
    Tensor srm;              // [9,3,5,5], frozen
    Tensor bayar;            // [K,5,5], constrained depthwise
    Conv2dLayer resid1;      // 3   -> C_r
    Conv2dLayer resid2;      // C_r -> C_r
    Conv2dLayer resid3;      // C_r -> C_r
    Conv2dLayer fuse1;       // 9+K+C_r -> C_mod, stride 2
    Conv2dLayer fuse2;       // C_mod -> C_mod, stride 2
    LayerNormLayer ln;       // over C_mod

    static NoiseExtractor init(std::mt19937_64& rng, const ModelConfig& cfg);

    Tensor srm_apply(Graph& g, const Tensor& image) const;       // [9,H,W]
    Tensor bayar_apply(Graph& g, const Tensor& image) const;     // [K,H,W]
    Tensor residual_apply(Graph& g, const Tensor& image) const;  // [C_r,H,W]

    // image [3,H,W] -> tokens [H/4, W/4, C_mod].
    Tensor forward(Graph& g, const Tensor& image) const;

    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

// Raw noise-map file: "NMAP" magic, u32 C/H/W, then C*H*W float32
// little-endian values in row-major [C,H,W] order.
void save_noise_map(const std::string& path, const Tensor& chw);
Tensor load_noise_map(const std::string& path);

}  // namespace forma
