#pragma once

#include <random>
#include <string>
#include <vector>

#include "forma/ops.hpp"
#include "forma/optim.hpp"
#include "forma/tensor.hpp"

namespace forma {

// Thin parameter bundles over the ops layer. Weights start from a
// truncated normal (std 0.02), biases at zero, norm scales at one.

struct LinearLayer {
    Tensor w;  // [in, out]
    Tensor b;  // [out], undefined when the layer has no bias

    static LinearLayer init(std::mt19937_64& rng, std::int64_t in, std::int64_t out,
                            bool bias = true);
    Tensor forward(Graph& g, const Tensor& x) const { return ops::linear(g, x, w, b); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct LayerNormLayer {
    Tensor gamma, beta;
    double eps = 1e-6;

    static LayerNormLayer init(std::int64_t c);
    Tensor forward(Graph& g, const Tensor& x) const {
        return ops::layer_norm(g, x, gamma, beta, eps);
    }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct Conv2dLayer {
    Tensor k;  // [K, C, kh, kw]
    Tensor b;  // [K] or undefined
    int stride = 1;
    int padding = 0;

    static Conv2dLayer init(std::mt19937_64& rng, std::int64_t in, std::int64_t out,
                            int ksize, int stride, int padding, bool bias = true);
    Tensor forward(Graph& g, const Tensor& x) const {
        return ops::conv2d(g, x, k, b, stride, padding);
    }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

struct DwConvLayer {
    Tensor k;  // [C, kh, kw]
    Tensor b;  // [C]

    static DwConvLayer init(std::mt19937_64& rng, std::int64_t c, int ksize);
    Tensor forward(Graph& g, const Tensor& x) const { return ops::dwconv(g, x, k, b); }
    void collect(const std::string& prefix, std::vector<NamedParam>& out) const;
};

}  // namespace forma
