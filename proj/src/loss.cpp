#include "forma/loss.hpp"

#include <cmath>

#include "forma/ops.hpp"

namespace forma {

namespace {

void check_pair(const char* op, const Tensor& prob, const Tensor& target) {
    if (prob.shape() != target.shape())
        throw DimensionError(std::string(op) + ": prediction " + shape_str(prob.shape()) +
                             " vs target " + shape_str(target.shape()));
    for (std::int64_t i = 0; i < target.size(); ++i) {
        const double v = target.data()[i];
        if (v != 0.0 && v != 1.0)
            throw DomainError(std::string(op) + ": target must be 0/1, found " +
                              std::to_string(v));
    }
    for (std::int64_t i = 0; i < prob.size(); ++i) {
        const double v = prob.data()[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError(std::string(op) + ": probability " + std::to_string(v) +
                              " outside [0,1]");
    }
}

}  // namespace

Tensor dice_loss(Graph& g, const Tensor& prob, const Tensor& target, double eps) {
    check_pair("dice_loss", prob, target);
    if (!(eps > 0.0)) throw DomainError("dice_loss: smoothing must be positive");
    double sp = 0.0, sg = 0.0, spg = 0.0;
    for (std::int64_t i = 0; i < prob.size(); ++i) {
        sp += prob.data()[i];
        sg += target.data()[i];
        spg += prob.data()[i] * target.data()[i];
    }
    const double num = 2.0 * spg + eps;
    const double den = sp + sg + eps;
    Tensor out = Tensor::scalar(1.0 - num / den);
    if (track(g, {&prob})) {
        out.set_requires_grad(true);
        g.record("dice_loss", out, [prob, target, out, num, den]() mutable {
            const double go = out.grad()[0];
            double* gp = prob.grad();
            // d/dp_i [1 - num/den] = (num - 2*g_i*den) / den^2
            const double den2 = den * den;
            for (std::int64_t i = 0; i < prob.size(); ++i)
                gp[i] += go * (num - 2.0 * target.data()[i] * den) / den2;
        });
    }
    return out;
}

Tensor focal_loss(Graph& g, const Tensor& prob, const Tensor& target,
                  double gamma, double alpha) {
    check_pair("focal_loss", prob, target);
    if (!(gamma >= 0.0)) throw DomainError("focal_loss: gamma must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("focal_loss: alpha must be in (0,1)");
    const double clip = 1e-7;  // keeps log(p_t) and 1/p_t finite at saturation
    const std::int64_t n = prob.size();
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        const bool pos = target.data()[i] != 0.0;
        const double pt = std::max(pos ? prob.data()[i] : 1.0 - prob.data()[i], clip);
        const double at = pos ? alpha : 1.0 - alpha;
        acc += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
    }
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    if (track(g, {&prob})) {
        out.set_requires_grad(true);
        g.record("focal_loss", out, [prob, target, out, gamma, alpha, clip, n]() mutable {
            const double go = out.grad()[0] / static_cast<double>(n);
            double* gp = prob.grad();
            for (std::int64_t i = 0; i < n; ++i) {
                const bool pos = target.data()[i] != 0.0;
                const double raw = pos ? prob.data()[i] : 1.0 - prob.data()[i];
                if (raw < clip) continue;  // clipped region is flat
                const double pt = raw;
                const double at = pos ? alpha : 1.0 - alpha;
                const double om = 1.0 - pt;
                // The focusing term vanishes smoothly as p_t -> 1.
                const double focus =
                    (gamma > 0.0 && om > 0.0)
                        ? gamma * std::pow(om, gamma - 1.0) * std::log(pt)
                        : 0.0;
                const double dpt = at * (focus - std::pow(om, gamma) / pt);
                gp[i] += go * (pos ? dpt : -dpt);
            }
        });
    }
    return out;
}

Tensor combined_loss(Graph& g, const Tensor& prob, const Tensor& target,
                     const LossConfig& cfg) {
    if (!cfg.use_dice && !cfg.use_focal)
        throw UsageError("combined_loss: at least one term must stay enabled");
    Tensor total;
    if (cfg.use_dice) total = dice_loss(g, prob, target, cfg.dice_eps);
    if (cfg.use_focal) {
        Tensor f = focal_loss(g, prob, target, cfg.focal_gamma, cfg.focal_alpha);
        total = total.defined() ? ops::add(g, total, f) : f;
    }
    return total;
}

}  // namespace forma
