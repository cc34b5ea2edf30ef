#pragma once

#include "forma/model_config.hpp"
#include "forma/tensor.hpp"

namespace forma {

struct LossConfig {
    bool use_dice = true;
    bool use_focal = true;
    double dice_eps = 1.0;
    double focal_gamma = 2.0;
    double focal_alpha = 0.5;

    static LossConfig for_variant(Variant v) {
        LossConfig c;
        if (v == Variant::no_dice) c.use_dice = false;
        if (v == Variant::no_focal) c.use_focal = false;
        return c;
    }
};

// Soft overlap loss: 1 - (2*sum(p*g)+eps) / (sum(p)+sum(g)+eps).
// target must be a 0/1 map of the same shape as prob.
Tensor dice_loss(Graph& g, const Tensor& prob, const Tensor& target, double eps = 1.0);

// Mean of -alpha_t * (1-p_t)^gamma * log(p_t) over pixels.
Tensor focal_loss(Graph& g, const Tensor& prob, const Tensor& target,
                  double gamma = 2.0, double alpha = 0.5);

Tensor combined_loss(Graph& g, const Tensor& prob, const Tensor& target,
                     const LossConfig& cfg);

}  // namespace forma
