#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "forma/data.hpp"
#include "forma/image_io.hpp"

// End-to-end checks of the installed binary. The test runner gets the
// binary location through FORMA_CLI_PATH.

namespace {

namespace fs = std::filesystem;

std::string cli() {
    const char* p = std::getenv("FORMA_CLI_PATH");
    REQUIRE_MESSAGE(p != nullptr, "FORMA_CLI_PATH must point at the forma binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

const std::string kWork = "/tmp/forma_cli_test";

}  // namespace

TEST_CASE("cli: help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("complexity --help") == 0);
    CHECK(run("") == 1);                         // missing subcommand
    CHECK(run("frobnicate") == 1);               // unknown subcommand
    CHECK(run("train --no-such-flag") == 1);     // unknown option
    CHECK(run("eval --checkpoint x.fmck --tau 1.5") == 1);  // tau out of range
}

TEST_CASE("cli: complexity prints a table and writes json") {
    fs::create_directories(kWork);
    const std::string out = kWork + "/complexity.json";
    CHECK(run("complexity --scale paper --size 512 --out " + out) == 0);
    std::ifstream f(out);
    REQUIRE(f.good());
    std::string body((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("total_params") != std::string::npos);
}

TEST_CASE("cli: data errors exit with 2") {
    CHECK(run("eval --checkpoint /tmp/forma_cli_missing.fmck --data synth:2") == 2);
    CHECK(run("infer --checkpoint /tmp/forma_cli_missing.fmck --image x.png") == 2);
}

TEST_CASE("cli: train, eval, infer and robustness round trip") {
    fs::create_directories(kWork);
    const std::string train_out = kWork + "/train";
    CHECK(run("train --scale toy --steps 2 --batch 2 --pool 2 --size 64 --seed 3 --out " +
              train_out) == 0);
    const std::string ckpt = train_out + "/checkpoint.fmck";
    CHECK(fs::exists(ckpt));
    CHECK(fs::exists(train_out + "/curve.csv"));

    // Resume continues from the stored step counter.
    CHECK(run("train --scale toy --steps 3 --batch 2 --pool 2 --size 64 --seed 3 "
              "--resume " + ckpt + " --out " + train_out + "_resumed") == 0);

    const std::string eval_out = kWork + "/eval";
    CHECK(run("eval --checkpoint " + ckpt + " --data synth:2 --threads 2 --out " +
              eval_out) == 0);
    CHECK(fs::exists(eval_out + "/per_image.jsonl"));
    CHECK(fs::exists(eval_out + "/summary.json"));

    // Render one sample to disk and run single-image inference on it.
    const forma::Sample s = forma::synth_tamper(5, 64, 64);
    const std::string img = kWork + "/sample.png";
    forma::save_image(img, s.image);
    const std::string infer_out = kWork + "/infer";
    CHECK(run("infer --checkpoint " + ckpt + " --image " + img + " --out " + infer_out) ==
          0);
    CHECK(fs::exists(infer_out + "/sample_prob.pgm"));
    CHECK(fs::exists(infer_out + "/sample_mask.png"));
    const forma::Tensor prob = forma::load_prob_map(infer_out + "/sample_prob.pgm");
    CHECK(prob.shape() == forma::Shape{64, 64});

    const std::string csv = kWork + "/robust.csv";
    CHECK(run("robustness --checkpoint " + ckpt +
              " --data synth:2 --kind jpeg --out " + csv) == 0);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    CHECK(header == "kind,strength,f1,iou");
    int lines = 0;
    for (std::string line; std::getline(f, line);)
        if (!line.empty()) ++lines;
    CHECK(lines == 6);  // six jpeg qualities

    fs::remove_all(kWork);
}

TEST_CASE("cli: config file supplies defaults, flags still win") {
    fs::create_directories(kWork);
    const std::string cfg = kWork + "/run.json";
    {
        std::ofstream f(cfg);
        f << R"({"scale": "paper", "out": ")" << kWork << R"(/cfg.json"})";
    }
    CHECK(run("complexity --config " + cfg) == 0);
    CHECK(fs::exists(kWork + "/cfg.json"));  // out came from the config

    // An explicit flag overrides the config value.
    CHECK(run("complexity --config " + cfg + " --out " + kWork + "/flag.json") == 0);
    CHECK(fs::exists(kWork + "/flag.json"));
    CHECK(run("complexity --config /tmp/forma_cli_absent.json") == 2);
    fs::remove_all(kWork);
}
