#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "forma/complexity.hpp"
#include "forma/image_io.hpp"
#include "forma/metrics.hpp"
#include "forma/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string scale = "toy";
    std::string variant = "full";
    double tau = 0.5;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out;
};

// JSON config supplies defaults; explicit flags win.
json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream f(path);
    if (!f) throw forma::IoError("cannot open config '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw forma::IoError("config '" + path + "': " + e.what());
    }
}

template <typename T>
void cfg_default(const json& cfg, const char* key, CLI::Option* opt, T& slot) {
    if (opt->count() == 0 && cfg.contains(key)) slot = cfg.at(key).get<T>();
}

forma::ModelConfig resolve_model_config(const CommonOpts& c) {
    forma::ModelConfig mc = forma::ModelConfig::from_scale(c.scale);
    mc.variant = forma::variant_from_string(c.variant);
    return mc;
}

struct EvalItem {
    std::string id;
    forma::Tensor image;
    forma::Tensor mask;
};

std::vector<EvalItem> load_eval_items(const std::string& data, std::uint64_t seed,
                                      std::int64_t synth_size) {
    std::vector<EvalItem> items;
    if (data.rfind("synth:", 0) == 0) {
        const long long n = std::stoll(data.substr(6));
        if (n < 1) throw forma::UsageError("--data synth:N needs N >= 1");
        for (long long i = 0; i < n; ++i) {
            forma::Sample s =
                forma::synth_tamper(seed + static_cast<std::uint64_t>(i) * 7919u,
                                    synth_size, synth_size);
            items.push_back({"synth/" + std::to_string(i), s.image, s.mask});
        }
        return items;
    }
    for (const auto& e : forma::load_manifest(data))
        items.push_back({e.image, forma::load_image(e.image), forma::load_mask(e.mask)});
    return items;
}

// Images are independent, so eval parallelism is a straight index split.
template <typename Fn>
void parallel_over(std::int64_t n, int threads, Fn&& fn) {
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (threads == 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t]() {
            try {
                for (;;) {
                    const std::int64_t i = next.fetch_add(1);
                    if (i >= n) break;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<forma::ImageResult> score_items(const forma::FormaNet& net,
                                            const std::vector<EvalItem>& items,
                                            double tau, int threads) {
    std::vector<forma::ImageResult> results(items.size());
    parallel_over(static_cast<std::int64_t>(items.size()), threads, [&](std::int64_t i) {
        forma::Graph g;
        g.set_recording(false);
        const auto& it = items[static_cast<std::size_t>(i)];
        const auto out = net.forward(g, it.image);
        const forma::Tensor mask = forma::predict_mask(out.prob, tau);
        results[static_cast<std::size_t>(i)] = {it.id, forma::f1_iou(mask, it.mask)};
    });
    return results;
}

int cmd_train(const CommonOpts& c, const json& cfg, forma::TrainOptions opt, CLI::App* sub) {
    forma::ModelConfig mc = resolve_model_config(c);
    opt.seed = c.seed;
    opt.tau = c.tau;
    cfg_default(cfg, "steps", sub->get_option("--steps"), opt.steps);
    cfg_default(cfg, "batch", sub->get_option("--batch"), opt.batch);
    cfg_default(cfg, "pool", sub->get_option("--pool"), opt.pool_size);
    cfg_default(cfg, "size", sub->get_option("--size"), opt.image_size);
    cfg_default(cfg, "lr", sub->get_option("--lr"), opt.lr);
    cfg_default(cfg, "weight_decay", sub->get_option("--weight-decay"), opt.weight_decay);

    if (opt.image_size % 32 != 0)
        throw forma::UsageError("--size must be a multiple of 32");
    const std::string outdir = c.out.empty() ? "train_out" : c.out;
    fs::create_directories(outdir);
    opt.checkpoint_out = (fs::path(outdir) / "checkpoint.fmck").string();
    opt.curve_out = (fs::path(outdir) / "curve.csv").string();

    forma::FormaNet net = forma::FormaNet::init(c.seed, mc);
    const forma::LossConfig loss_cfg = forma::LossConfig::for_variant(mc.variant);
    std::cerr << "training " << forma::variant_name(mc.variant) << " @" << mc.scale
              << ": " << opt.steps << " steps, batch " << opt.batch << ", pool "
              << opt.pool_size << ", lr " << opt.lr << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    forma::TrainResult res =
        forma::train(net, opt, loss_cfg, [&](const forma::StepLog& s) {
            if ((s.step + 1) % 25 == 0 || s.step == 0)
                std::cerr << "step " << s.step + 1 << "/" << opt.steps << " loss "
                          << s.loss << " f1 " << s.f1 << " lr " << s.lr << "\n";
        });
    const double secs = std::chrono::duration<double>(
        std::chrono::steady_clock::now() - t0).count();
    json summary{{"steps", res.steps_done},
                 {"final_loss", res.final_loss},
                 {"final_f1", res.final_f1},
                 {"seconds", secs},
                 {"checkpoint", opt.checkpoint_out},
                 {"curve", opt.curve_out}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_infer(const CommonOpts& c, const std::string& checkpoint, const std::string& image,
              const std::string& noise_map) {
    forma::FormaNet net = forma::load_model(checkpoint);
    forma::Tensor img = forma::load_image(image);
    forma::Tensor nm;
    if (!noise_map.empty()) nm = forma::load_noise_map(noise_map);
    forma::Graph g;
    g.set_recording(false);
    const auto out = net.forward(g, img, nm);
    const forma::Tensor mask = forma::predict_mask(out.prob, c.tau);

    const std::string outdir = c.out.empty() ? "." : c.out;
    fs::create_directories(outdir);
    const std::string stem = fs::path(image).stem().string();
    const std::string prob_path = (fs::path(outdir) / (stem + "_prob.pgm")).string();
    const std::string mask_path = (fs::path(outdir) / (stem + "_mask.png")).string();
    forma::save_prob_map(prob_path, out.prob);
    forma::save_mask(mask_path, mask);

    double frac = 0.0;
    for (std::int64_t i = 0; i < mask.size(); ++i) frac += mask.data()[i];
    frac /= static_cast<double>(mask.size());
    json summary{{"image", image},
                 {"prob_map", prob_path},
                 {"mask", mask_path},
                 {"tau", c.tau},
                 {"tampered_fraction", frac}};
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& c, const std::string& checkpoint, const std::string& data,
             std::int64_t synth_size) {
    forma::FormaNet net = forma::load_model(checkpoint);
    const auto items = load_eval_items(data, c.seed, synth_size);
    const auto results = score_items(net, items, c.tau, c.threads);
    const forma::DatasetScore score = forma::summarize(
        data.rfind("synth:", 0) == 0 ? "synth" : data, results);
    std::cout << forma::format_score_table({score});
    if (!c.out.empty()) {
        fs::create_directories(c.out);
        forma::write_results_jsonl((fs::path(c.out) / "per_image.jsonl").string(), results);
        std::ofstream f((fs::path(c.out) / "summary.json").string());
        f << json{{"dataset", score.name},
                  {"images", score.images},
                  {"f1", score.mean_f1},
                  {"iou", score.mean_iou},
                  {"tau", c.tau}}
                 .dump(2)
          << "\n";
    }
    return 0;
}

int cmd_complexity(const CommonOpts& c, std::int64_t size, double flops_per_mac) {
    forma::ModelConfig mc = resolve_model_config(c);
    const auto rep = forma::complexity_report(mc, size, size, flops_per_mac);
    std::cout << rep.to_table();
    if (!c.out.empty()) {
        std::ofstream f(c.out);
        if (!f) throw forma::IoError("cannot write '" + c.out + "'");
        f << rep.to_json().dump(2) << "\n";
    }
    return 0;
}

int cmd_robustness(const CommonOpts& c, const std::string& checkpoint,
                   const std::string& data, const std::string& kind,
                   std::int64_t synth_size) {
    forma::FormaNet net = forma::load_model(checkpoint);
    const auto items = load_eval_items(data, c.seed, synth_size);

    struct Sweep {
        forma::PerturbKind kind;
        std::vector<double> strengths;
    };
    std::vector<Sweep> sweeps;
    const auto want = [&kind](const char* k) { return kind == "all" || kind == k; };
    if (want("jpeg"))
        sweeps.push_back({forma::PerturbKind::jpeg, {100, 90, 75, 60, 45, 30}});
    if (want("blur"))
        sweeps.push_back({forma::PerturbKind::blur, {0, 0.5, 1, 2, 3.5, 5}});
    if (want("noise"))
        sweeps.push_back({forma::PerturbKind::noise, {0, 0.01, 0.025, 0.05, 0.075, 0.1}});
    if (want("resize"))
        sweeps.push_back({forma::PerturbKind::resize, {0.25, 0.5, 0.75, 1.0, 1.5, 2.0}});
    if (sweeps.empty())
        throw forma::UsageError("unknown perturbation '" + kind +
                                "' (jpeg, blur, noise, resize, all)");

    std::ostringstream csv;
    csv << "kind,strength,f1,iou\n";
    for (const auto& sw : sweeps)
        for (const double s : sw.strengths) {
            std::vector<forma::ImageResult> results(items.size());
            parallel_over(static_cast<std::int64_t>(items.size()), c.threads,
                          [&](std::int64_t i) {
                const auto& it = items[static_cast<std::size_t>(i)];
                const forma::Tensor pert = forma::perturb(
                    it.image, {sw.kind, s}, c.seed ^ static_cast<std::uint64_t>(i * 31 + 7));
                forma::Graph g;
                g.set_recording(false);
                const auto out = net.forward(g, pert);
                results[static_cast<std::size_t>(i)] = {
                    it.id, forma::f1_iou(forma::predict_mask(out.prob, c.tau), it.mask)};
            });
            const auto score = forma::summarize("x", results);
            csv << forma::perturb_kind_name(sw.kind) << ',' << s << ',' << score.mean_f1
                << ',' << score.mean_iou << "\n";
            std::cerr << forma::perturb_kind_name(sw.kind) << " " << s << ": f1 "
                      << score.mean_f1 << "\n";
        }
    std::cout << csv.str();
    if (!c.out.empty()) {
        fs::create_directories(fs::path(c.out).parent_path().empty()
                                   ? "."
                                   : fs::path(c.out).parent_path().string());
        std::ofstream f(c.out);
        if (!f) throw forma::IoError("cannot write '" + c.out + "'");
        f << csv.str();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"forma: image tampering localization with a selective-scan encoder"};
    app.require_subcommand(1);

    CommonOpts c;
    forma::TrainOptions topt;
    std::string checkpoint, data = "synth:16", image, noise_map, kind = "all";
    std::int64_t cplx_size = 512, synth_size = 64;
    double flops_per_mac = 1.0;

    const auto add_common = [&](CLI::App* sub, bool model_opts) {
        sub->add_option("--config", c.config_path, "JSON file with option defaults");
        if (model_opts) {
            sub->add_option("--scale", c.scale, "model scale: toy or paper");
            sub->add_option("--variant", c.variant,
                            "full, no_noise, no_shuffle, noise_into_encoder, no_dice, "
                            "no_focal");
        }
        sub->add_option("--tau", c.tau, "decision threshold")->check(CLI::Range(0.0, 1.0));
        sub->add_option("--seed", c.seed, "RNG seed");
        sub->add_option("--threads", c.threads, "worker threads for evaluation")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", c.out, "output file or directory");
    };

    CLI::App* train = app.add_subcommand("train", "train on synthetic data");
    add_common(train, true);
    train->add_option("--steps", topt.steps)->check(CLI::PositiveNumber);
    train->add_option("--batch", topt.batch)->check(CLI::PositiveNumber);
    train->add_option("--pool", topt.pool_size,
                      "fixed training pool size; 0 streams fresh samples");
    train->add_option("--size", topt.image_size, "square image size");
    train->add_option("--lr", topt.lr);
    train->add_option("--warmup", topt.warmup_steps, "linear lr ramp length in steps");
    train->add_option("--stop-at-f1", topt.stop_at_f1,
                      "stop early once the batch F1 reaches this value");
    train->add_option("--weight-decay", topt.weight_decay);
    train->add_flag("--augment", topt.augment_data, "apply training augmentations");
    train->add_option("--resume", topt.resume, "checkpoint to continue from");

    CLI::App* infer = app.add_subcommand("infer", "localize tampering in one image");
    add_common(infer, false);
    infer->add_option("--checkpoint", checkpoint)->required();
    infer->add_option("--image", image)->required();
    infer->add_option("--noise-map", noise_map, "inject a precomputed noise map (NMAP)");

    CLI::App* eval = app.add_subcommand("eval", "score a checkpoint over a dataset");
    add_common(eval, false);
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--data", data, "manifest path or synth:N");
    eval->add_option("--synth-size", synth_size, "square size for synth:N data");

    CLI::App* cplx = app.add_subcommand("complexity", "parameter and flop breakdown");
    add_common(cplx, true);
    cplx->add_option("--size", cplx_size, "square input size");
    cplx->add_option("--flops-per-mac", flops_per_mac,
                     "flops charged per multiply-accumulate");

    CLI::App* robust = app.add_subcommand("robustness", "score under perturbation sweeps");
    add_common(robust, false);
    robust->add_option("--checkpoint", checkpoint)->required();
    robust->add_option("--data", data, "manifest path or synth:N");
    robust->add_option("--kind", kind, "jpeg, blur, noise, resize or all");
    robust->add_option("--synth-size", synth_size, "square size for synth:N data");

    try {
        app.parse(argc, argv);
        const json cfg = load_config(c.config_path);
        for (const char* key : {"scale", "variant", "tau", "seed", "threads", "out"}) {
            CLI::App* sub = app.get_subcommands().front();
            if (!sub->get_option_no_throw(std::string("--") + key)) continue;
            CLI::Option* o = sub->get_option(std::string("--") + key);
            if (o->count() > 0 || !cfg.contains(key)) continue;
            if (std::string(key) == "scale") c.scale = cfg.at(key).get<std::string>();
            else if (std::string(key) == "variant") c.variant = cfg.at(key).get<std::string>();
            else if (std::string(key) == "tau") c.tau = cfg.at(key).get<double>();
            else if (std::string(key) == "seed") c.seed = cfg.at(key).get<std::uint64_t>();
            else if (std::string(key) == "threads") c.threads = cfg.at(key).get<int>();
            else c.out = cfg.at(key).get<std::string>();
        }

        if (train->parsed()) return cmd_train(c, cfg, topt, train);
        if (infer->parsed()) return cmd_infer(c, checkpoint, image, noise_map);
        if (eval->parsed()) return cmd_eval(c, checkpoint, data, synth_size);
        if (cplx->parsed()) return cmd_complexity(c, cplx_size, flops_per_mac);
        if (robust->parsed()) return cmd_robustness(c, checkpoint, data, kind, synth_size);
        throw forma::UsageError("no subcommand given");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const forma::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const forma::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const forma::IoError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const forma::DimensionError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const forma::DomainError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
