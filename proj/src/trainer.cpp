#include "forma/trainer.hpp"

#include <cmath>
#include <fstream>

#include "forma/decoder.hpp"
#include "forma/metrics.hpp"

namespace forma {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9e3779b97f4a7c15ULL + (b << 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

}  // namespace

std::vector<Sample> make_pool(std::uint64_t seed, std::int64_t count, std::int64_t size) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i)
        out.push_back(synth_tamper(mix(seed, static_cast<std::uint64_t>(i)), size, size));
    return out;
}

double mean_f1(const FormaNet& net, const std::vector<Sample>& samples, double tau,
               std::int64_t chunk) {
    if (samples.empty()) throw DomainError("mean_f1: no samples");
    double acc = 0.0;
    for (const auto& s : samples) {
        Graph g;
        g.set_recording(false);
        const auto out = net.forward(g, s.image, Tensor(), chunk);
        acc += f1_iou(predict_mask(out.prob, tau), s.mask).f1;
    }
    return acc / static_cast<double>(samples.size());
}

TrainResult train(FormaNet& net, const TrainOptions& opt, const LossConfig& loss_cfg,
                  const std::function<void(const StepLog&)>& on_step) {
    if (opt.batch < 1 || opt.steps < 1) throw UsageError("train: steps and batch must be >= 1");
    if (opt.pool_size < 0) throw UsageError("train: pool size cannot be negative");

    std::vector<Sample> pool;
    if (opt.pool_size > 0) pool = make_pool(opt.seed, opt.pool_size, opt.image_size);

    auto params = net.parameters();
    AdamW adam(params, opt.weight_decay);
    PlateauSchedule sched;
    sched.lr = opt.lr;
    sched.factor = opt.plateau_factor;
    sched.patience = opt.plateau_patience;

    std::int64_t start_step = 0;
    if (!opt.resume.empty()) {
        Checkpoint ck;
        FormaNet loaded = load_model(opt.resume, &ck);
        if (config_to_json(loaded.cfg) != config_to_json(net.cfg))
            throw UsageError("resume checkpoint was trained with a different config");
        const auto lp = loaded.parameters();
        for (std::size_t i = 0; i < params.size(); ++i) params[i].t.copy_from(lp[i].t);
        const auto& tr = ck.meta.at("trainer");
        start_step = tr.at("step").get<std::int64_t>();
        adam.set_step_count(tr.at("adam_step").get<std::int64_t>());
        sched.lr = tr.at("lr").get<double>();
        sched.best = tr.at("plateau_best").get<double>();
        sched.bad = tr.at("plateau_bad").get<int>();
        sched.seen = tr.at("plateau_seen").get<bool>();
        for (std::size_t i = 0; i < params.size(); ++i) {
            bool found_m = false, found_v = false;
            for (const auto& t : ck.tensors) {
                if (t.name == "adam.m." + params[i].name) {
                    adam.slots()[i].m.assign(t.t.data(), t.t.data() + t.t.size());
                    found_m = true;
                }
                if (t.name == "adam.v." + params[i].name) {
                    adam.slots()[i].v.assign(t.t.data(), t.t.data() + t.t.size());
                    found_v = true;
                }
            }
            if (!found_m || !found_v)
                throw IoError("resume checkpoint is missing optimizer state for '" +
                              params[i].name + "'");
        }
    }

    TrainResult result;
    double window_f1 = 0.0;
    std::int64_t window_n = 0;

    for (std::int64_t step = start_step; step < opt.steps; ++step) {
        double batch_loss = 0.0;
        double batch_f1 = 0.0;
        for (std::int64_t b = 0; b < opt.batch; ++b) {
            Sample sample;
            if (opt.pool_size > 0) {
                const std::size_t idx = static_cast<std::size_t>(
                    (step * opt.batch + b) % static_cast<std::int64_t>(pool.size()));
                sample = pool[idx];
            } else {
                sample = synth_tamper(mix(opt.seed, mix(static_cast<std::uint64_t>(step),
                                                        static_cast<std::uint64_t>(b))),
                                      opt.image_size, opt.image_size);
            }
            if (opt.augment_data)
                sample = augment(sample, mix(mix(opt.seed, 0xa06Full),
                                             mix(static_cast<std::uint64_t>(step),
                                                 static_cast<std::uint64_t>(b))));

            Graph g;
            FormaNet::Output out;
            Tensor loss;
            try {
                out = net.forward(g, sample.image, Tensor(), opt.chunk);
                loss = combined_loss(g, out.prob, sample.mask, loss_cfg);
                // 1/batch here makes the accumulated gradient the batch mean.
                loss = ops::scale(g, loss, 1.0 / static_cast<double>(opt.batch));
                g.backward(loss);
            } catch (const NumericError& e) {
                throw NumericError("step " + std::to_string(step) + ", batch slot " +
                                   std::to_string(b) + ": " + e.what());
            }
            batch_loss += loss.item();
            batch_f1 += f1_iou(predict_mask(out.prob, opt.tau), sample.mask).f1;
        }
        batch_f1 /= static_cast<double>(opt.batch);
        if (!std::isfinite(batch_loss))
            throw NumericError("step " + std::to_string(step) + ": non-finite batch loss");

        double step_lr = sched.lr;
        if (opt.warmup_steps > 0 && step < opt.warmup_steps) {
            const double frac =
                static_cast<double>(step + 1) / static_cast<double>(opt.warmup_steps);
            step_lr = sched.lr * (0.1 + 0.9 * frac);
        }
        adam.step(params, step_lr);
        std::mt19937_64 proj_rng(mix(opt.seed, mix(0x70726f6aULL,
                                                   static_cast<std::uint64_t>(step))));
        net.project_constraints(proj_rng);

        window_f1 += batch_f1;
        ++window_n;
        if ((step + 1) % opt.plateau_every == 0) {
            sched.step(window_f1 / static_cast<double>(window_n));
            window_f1 = 0.0;
            window_n = 0;
        }

        StepLog log{step, batch_loss, step_lr, batch_f1};
        result.curve.push_back(log);
        if (on_step) on_step(log);

        if (opt.stop_at_f1 > 0.0 && batch_f1 >= opt.stop_at_f1) break;
    }

    result.steps_done = static_cast<std::int64_t>(result.curve.size());
    result.final_loss = result.curve.empty() ? 0.0 : result.curve.back().loss;
    if (opt.pool_size > 0) result.final_f1 = mean_f1(net, pool, opt.tau, opt.chunk);
    else if (!result.curve.empty()) result.final_f1 = result.curve.back().f1;

    if (!opt.curve_out.empty()) {
        std::ofstream f(opt.curve_out);
        if (!f) throw IoError("cannot write loss curve '" + opt.curve_out + "'");
        f << "step,loss,lr,f1\n";
        for (const auto& s : result.curve)
            f << s.step << ',' << s.loss << ',' << s.lr << ',' << s.f1 << '\n';
    }
    if (!opt.checkpoint_out.empty()) {
        std::vector<NamedParam> extras;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& slot = adam.slots()[i];
            Tensor m = Tensor::from_data(params[i].t.shape(),
                                         std::vector<double>(slot.m.begin(), slot.m.end()));
            Tensor v = Tensor::from_data(params[i].t.shape(),
                                         std::vector<double>(slot.v.begin(), slot.v.end()));
            extras.push_back({"adam.m." + params[i].name, m});
            extras.push_back({"adam.v." + params[i].name, v});
        }
        nlohmann::json meta;
        meta["trainer"] = {{"step", opt.steps},
                           {"adam_step", adam.step_count()},
                           {"lr", sched.lr},
                           {"plateau_best", sched.best},
                           {"plateau_bad", sched.bad},
                           {"plateau_seen", sched.seen},
                           {"seed", opt.seed},
                           {"final_f1", result.final_f1}};
        save_model(opt.checkpoint_out, net, meta, extras);
    }
    return result;
}

}  // namespace forma
