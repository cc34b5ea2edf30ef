#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forma/model_config.hpp"

namespace forma {

// Analytic cost model. MACs follow the usual profiler convention: only
// multiply-accumulate work of linears, convolutions and the selective
// scan is counted (norms, activations and interpolation are ignored).
// Each scan state update costs six MACs (discretization, state update,
// readout) plus one skip multiply per channel step. One MAC is reported
// as `flops_per_mac` floating point operations; the default of 1 matches
// common profiler output, 2 counts multiplies and adds separately.
struct LayerCost {
    std::string name;
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

struct ComplexityReport {
    std::vector<LayerCost> layers;
    std::int64_t total_params = 0;
    std::int64_t total_macs = 0;
    double flops_per_mac = 1.0;
    std::int64_t input_h = 0, input_w = 0;

    double total_flops() const {
        return static_cast<double>(total_macs) * flops_per_mac;
    }
    std::string to_table() const;
    nlohmann::json to_json() const;
};

// Learnable scalar count; the frozen SRM bank is not learnable and is
// excluded, the constrained Bayar stack is learnable and included.
std::int64_t param_count(const ModelConfig& cfg);

ComplexityReport complexity_report(const ModelConfig& cfg, std::int64_t h, std::int64_t w,
                                   double flops_per_mac = 1.0);

}  // namespace forma
