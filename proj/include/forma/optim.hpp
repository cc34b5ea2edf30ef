#pragma once

#include <string>
#include <vector>

#include "forma/tensor.hpp"

namespace forma {

struct NamedParam {
    std::string name;
    Tensor t;
};

// Drops the learning rate by `factor` once a higher-is-better metric has
// failed to improve for `patience` consecutive steps. Never goes below
// `floor`.
struct PlateauSchedule {
    double lr = 1e-4;
    double factor = 0.1;
    int patience = 3;
    double floor = 1e-8;

    double best = 0.0;
    int bad = 0;
    bool seen = false;

    void step(double metric) {
        if (!seen || metric > best) {
            best = metric;
            bad = 0;
            seen = true;
            return;
        }
        if (++bad >= patience) {
            lr = std::max(lr * factor, floor);
            bad = 0;
        }
    }
};

// AdamW with decoupled weight decay. Moment buffers are kept per
// parameter, matched by position in the parameter list.
class AdamW {
  public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    explicit AdamW(const std::vector<NamedParam>& params, double weight_decay = 0.0);

    // Applies one update from the accumulated gradients, then zeroes them.
    // Throws NumericError if any gradient is non-finite.
    void step(std::vector<NamedParam>& params, double lr);

    std::int64_t step_count() const { return t_; }

    struct Slot {
        std::vector<double> m, v;
    };
    std::vector<Slot>& slots() { return slots_; }
    void set_step_count(std::int64_t t) { t_ = t; }

  private:
    std::vector<Slot> slots_;
    std::int64_t t_ = 0;
};

}  // namespace forma
