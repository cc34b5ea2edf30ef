#pragma once

#include <vector>

#include "forma/tensor.hpp"

// Differentiable primitives. Every op takes the tape first, validates
// shapes, computes the forward value, and (when recording and some input
// requires grad) appends a backward closure. Layout conventions:
// images and conv features are [C,H,W], token maps are [H,W,C].
namespace forma::ops {

Tensor add(Graph& g, const Tensor& a, const Tensor& b);
Tensor sub(Graph& g, const Tensor& a, const Tensor& b);
Tensor mul(Graph& g, const Tensor& a, const Tensor& b);
Tensor scale(Graph& g, const Tensor& x, double a);
Tensor add_scalar(Graph& g, const Tensor& x, double a);

Tensor silu(Graph& g, const Tensor& x);
Tensor sigmoid(Graph& g, const Tensor& x);
Tensor softplus(Graph& g, const Tensor& x);

Tensor sum_all(Graph& g, const Tensor& x);   // -> [1]
Tensor mean_all(Graph& g, const Tensor& x);  // -> [1]

// x [..., in], w [in, out], b [out] or undefined for no bias.
Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b);

// Normalizes over the last axis. gamma/beta [C].
Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps = 1e-6);

// x [C,H,W], k [K,C,kh,kw], b [K] or undefined. Zero padding.
Tensor conv2d(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b,
              int stride, int padding);

// Depthwise, stride 1, same padding. x [C,H,W], k [C,kh,kw] with odd
// extents, b [C] or undefined.
Tensor dwconv(Graph& g, const Tensor& x, const Tensor& k, const Tensor& b);

// Half-pixel sampling (align_corners=false), edges clamped. x [C,H,W].
Tensor bilinear_resize(Graph& g, const Tensor& x, std::int64_t oh, std::int64_t ow);

// x [H,W,C], C divisible by r^2: out[h*r+a, w*r+b, c] = in[h, w, c*r*r + a*r + b].
Tensor pixel_shuffle(Graph& g, const Tensor& x, int r);
// Exact inverse of pixel_shuffle with the same r.
Tensor pixel_unshuffle(Graph& g, const Tensor& x, int r);

Tensor chw_to_hwc(Graph& g, const Tensor& x);
Tensor hwc_to_chw(Graph& g, const Tensor& x);

// Concatenate [H,W,C_i] maps along the channel axis.
Tensor concat_last(Graph& g, const std::vector<Tensor>& xs);

// Concatenate [C_i,H,W] maps along the channel axis.
Tensor concat_first(Graph& g, const std::vector<Tensor>& xs);

// logits [...,2] -> tampered-class probability [...], sigmoid(z1 - z0).
Tensor softmax2_prob(Graph& g, const Tensor& logits);

}  // namespace forma::ops
