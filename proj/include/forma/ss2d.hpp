#pragma once

#include <array>
#include <random>
#include <utility>

#include "forma/ops.hpp"
#include "forma/tensor.hpp"

namespace forma::ss2d {

enum class ScanDirection { row_fwd = 0, row_bwd = 1, col_fwd = 2, col_bwd = 3 };

// One directional unfold of a token map, with enough origin information
// to scatter it back.
struct ScanSequence {
    Tensor values;  // [L, D]
    ScanDirection dir = ScanDirection::row_fwd;
    std::int64_t h = 0, w = 0;
};

// Per-direction state-space parameters. The delta projection is factored
// through rank r to keep its cost at 2*D*r instead of D*D.
struct SsmParams {
    Tensor w_dt_lo;  // [D, r]
    Tensor w_dt_hi;  // [r, D]
    Tensor b_dt;     // [D]
    Tensor w_b;      // [D, N]
    Tensor w_c;      // [D, N]
    Tensor a_log;    // [D, N], A = -exp(a_log)
    Tensor d_skip;   // [D]

    std::int64_t d() const { return a_log.dim(0); }
    std::int64_t n() const { return a_log.dim(1); }
    std::int64_t dt_rank() const { return w_dt_lo.dim(1); }
};

SsmParams make_ssm_params(std::mt19937_64& rng, std::int64_t d, std::int64_t n,
                          std::int64_t dt_rank);

// Sequence position -> row-major token index for a direction.
std::vector<std::int64_t> scan_index(ScanDirection dir, std::int64_t h, std::int64_t w);

std::array<ScanSequence, 4> cross_scan(Graph& g, const Tensor& fmap /* [H,W,D] */);

// Scatters the four sequences back to their origin positions and sums.
Tensor cross_merge(Graph& g, const std::array<ScanSequence, 4>& seqs);

struct Projections {
    Tensor delta;  // [L, D], strictly positive
    Tensor b;      // [L, N]
    Tensor c;      // [L, N]
};
Projections input_projections(Graph& g, const Tensor& seq, const SsmParams& p);

// Zero-order-hold step sizes: abar = exp(delta*A), bbar = delta*B, both
// [L,D,N]. Plain helper for tests; the scan op fuses this internally.
std::pair<Tensor, Tensor> discretize(const Tensor& delta, const Tensor& a,
                                     const Tensor& b);

// Fused scan over one sequence. u/delta [L,D], b/c [L,N], a_log [D,N],
// d_skip [D]. chunk picks the block length; results are bit-identical
// for every chunk size.
Tensor s6_scan(Graph& g, const Tensor& u, const Tensor& delta, const Tensor& b,
               const Tensor& c, const Tensor& a_log, const Tensor& d_skip,
               std::int64_t chunk);

inline Tensor s6_scan_naive(Graph& g, const Tensor& u, const Tensor& delta,
                            const Tensor& b, const Tensor& c, const Tensor& a_log,
                            const Tensor& d_skip) {
    return s6_scan(g, u, delta, b, c, a_log, d_skip, u.dim(0));
}

// Four-direction scan-and-merge over a token map.
Tensor ss2d_forward(Graph& g, const Tensor& fmap,
                    const std::array<SsmParams, 4>& params,
                    std::int64_t chunk = 512);

}  // namespace forma::ss2d
