#pragma once

#include <functional>
#include <string>
#include <vector>

#include "forma/data.hpp"
#include "forma/loss.hpp"
#include "forma/model.hpp"
#include "forma/optim.hpp"

namespace forma {

struct TrainOptions {
    std::int64_t steps = 500;
    std::int64_t batch = 16;
    // > 0: train on a fixed pool of this many samples; 0: stream fresh
    // samples every step.
    std::int64_t pool_size = 16;
    std::int64_t image_size = 64;
    double lr = 1e-4;
    std::int64_t warmup_steps = 0;  // linear ramp from lr/10 to lr
    double stop_at_f1 = 0.0;        // > 0: stop once the window F1 reaches this
    double weight_decay = 0.0;
    double plateau_factor = 0.1;
    int plateau_patience = 3;
    std::int64_t plateau_every = 25;  // steps per schedule check
    bool augment_data = false;
    double tau = 0.5;
    std::uint64_t seed = 0;
    std::int64_t chunk = 512;
    std::string checkpoint_out;  // written when non-empty
    std::string curve_out;       // step,loss,lr,f1 csv when non-empty
    std::string resume;          // checkpoint to continue from
};

struct StepLog {
    std::int64_t step = 0;
    double loss = 0.0;
    double lr = 0.0;
    double f1 = 0.0;
};

struct TrainResult {
    std::vector<StepLog> curve;
    double final_loss = 0.0;
    double final_f1 = 0.0;  // over the training pool (or last batch when streaming)
    std::int64_t steps_done = 0;
};

// Deterministic single-threaded training loop. Per-image gradients are
// accumulated so a step sees the exact batch-mean loss; the per-step
// sample and augmentation randomness is derived from (seed, step), which
// makes resumed runs land on the same trajectory.
TrainResult train(FormaNet& net, const TrainOptions& opt, const LossConfig& loss_cfg,
                  const std::function<void(const StepLog&)>& on_step = {});

// Mean F1 of the model over a set of samples, no gradients involved.
double mean_f1(const FormaNet& net, const std::vector<Sample>& samples, double tau,
               std::int64_t chunk = 512);

// Fixed sample pool used for training and validation sets.
std::vector<Sample> make_pool(std::uint64_t seed, std::int64_t count, std::int64_t size);

}  // namespace forma
