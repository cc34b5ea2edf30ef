#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Raw selective-scan recurrence, shared by the autodiff op (double) and
// the timing benchmark (float). For every step t and channel d:
//   h[t,n] = exp(delta[t,d] * a[d,n]) * h[t-1,n] + delta[t,d] * b[t,n] * u[t,d]
//   y[t,d] = sum_n c[t,n] * h[t,n] + skip[d] * u[t,d]
// The sequence is processed in chunks along t with the channel loop
// outside the step loop inside each chunk. Per (d,n) the recurrence
// order never changes, so any chunk size gives bit-identical results;
// chunk == L is the single-pass path.
namespace forma::scan {

template <typename T>
void selective_scan(const T* u, const T* delta, const T* b, const T* c,
                    const T* a, const T* skip, T* y,
                    std::int64_t L, std::int64_t D, std::int64_t N,
                    std::int64_t chunk,
                    T* h_out = nullptr, T* abar_out = nullptr) {
    std::vector<T> carry(static_cast<std::size_t>(D * N), T(0));
    for (std::int64_t c0 = 0; c0 < L; c0 += chunk) {
        const std::int64_t c1 = std::min(c0 + chunk, L);
        for (std::int64_t d = 0; d < D; ++d) {
            T* h = carry.data() + d * N;
            const T sk = skip[d];
            const T* arow = a + d * N;
            for (std::int64_t t = c0; t < c1; ++t) {
                const T dt = delta[t * D + d];
                const T ut = u[t * D + d];
                const T* brow = b + t * N;
                const T* crow = c + t * N;
                T acc = T(0);
                for (std::int64_t n = 0; n < N; ++n) {
                    const T ab = std::exp(dt * arow[n]);
                    const T hn = ab * h[n] + dt * brow[n] * ut;
                    h[n] = hn;
                    acc += crow[n] * hn;
                    if (abar_out) abar_out[(t * D + d) * N + n] = ab;
                    if (h_out) h_out[(t * D + d) * N + n] = hn;
                }
                y[t * D + d] = acc + sk * ut;
            }
        }
    }
}

}  // namespace forma::scan
