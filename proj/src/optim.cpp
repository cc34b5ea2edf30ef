#include "forma/optim.hpp"

#include <cmath>

namespace forma {

AdamW::AdamW(const std::vector<NamedParam>& params, double wd) : weight_decay(wd) {
    slots_.reserve(params.size());
    for (const auto& p : params) {
        Slot s;
        s.m.assign(static_cast<std::size_t>(p.t.size()), 0.0);
        s.v.assign(static_cast<std::size_t>(p.t.size()), 0.0);
        slots_.push_back(std::move(s));
    }
}

void AdamW::step(std::vector<NamedParam>& params, double lr) {
    if (params.size() != slots_.size())
        throw UsageError("optimizer was built for a different parameter list");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i].t;
        double* g = p.grad();
        if (!g) throw UsageError("parameter '" + params[i].name + "' has no gradient buffer");
        Slot& s = slots_[i];
        double* pd = p.data();
        const std::int64_t n = p.size();
        for (std::int64_t j = 0; j < n; ++j) {
            if (!std::isfinite(g[j]))
                throw NumericError("non-finite gradient in parameter '" + params[i].name + "'");
            s.m[static_cast<std::size_t>(j)] =
                beta1 * s.m[static_cast<std::size_t>(j)] + (1.0 - beta1) * g[j];
            s.v[static_cast<std::size_t>(j)] =
                beta2 * s.v[static_cast<std::size_t>(j)] + (1.0 - beta2) * g[j] * g[j];
            const double mh = s.m[static_cast<std::size_t>(j)] / bc1;
            const double vh = s.v[static_cast<std::size_t>(j)] / bc2;
            pd[j] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * pd[j]);
        }
        p.zero_grad();
    }
}

}  // namespace forma
