#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "forma/data.hpp"
#include "forma/image_io.hpp"

using namespace forma;

namespace {
double mask_area(const Tensor& mask) {
    double a = 0.0;
    for (std::int64_t i = 0; i < mask.size(); ++i) a += mask.data()[i];
    return a;
}
}  // namespace

TEST_CASE("synthetic samples: valid ranges, mask area budget over many seeds") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        const Sample s = synth_tamper(seed, 64, 64);
        REQUIRE(s.image.shape() == Shape{3, 64, 64});
        REQUIRE(s.mask.shape() == Shape{64, 64});
        for (std::int64_t i = 0; i < s.image.size(); ++i) {
            CHECK(s.image.data()[i] >= 0.0);
            CHECK(s.image.data()[i] <= 1.0);
        }
        const double area = mask_area(s.mask);
        if (s.kind == TamperKind::authentic) {
            CHECK(area == 0.0);
        } else {
            CHECK(area >= 16.0);
            CHECK(area >= 0.01 * 64 * 64 * 0.999);
            CHECK(area <= 0.30 * 64 * 64 * 1.001);
        }
    }
}

TEST_CASE("synthetic generation is deterministic in the seed") {
    const Sample a = synth_tamper(1234, 64, 64);
    const Sample b = synth_tamper(1234, 64, 64);
    const Sample c = synth_tamper(1235, 64, 64);
    for (std::int64_t i = 0; i < a.image.size(); ++i)
        CHECK(a.image.data()[i] == b.image.data()[i]);
    double diff = 0.0;
    for (std::int64_t i = 0; i < a.image.size(); ++i)
        diff += std::fabs(a.image.data()[i] - c.image.data()[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("forced tamper kinds are honored") {
    const Sample auth = synth_tamper(5, 64, 64, TamperKind::authentic);
    CHECK(auth.kind == TamperKind::authentic);
    CHECK(mask_area(auth.mask) == 0.0);
    const Sample sp = synth_tamper(5, 64, 64, TamperKind::splice);
    CHECK(sp.kind == TamperKind::splice);
    CHECK(mask_area(sp.mask) > 0.0);
    const Sample cm = synth_tamper(5, 64, 64, TamperKind::copy_move);
    CHECK(cm.kind == TamperKind::copy_move);
    CHECK(mask_area(cm.mask) > 0.0);
}

TEST_CASE("spliced regions carry heavier grain than their surroundings") {
    // The forensic cue the noise branch feeds on: local residual energy
    // inside the tampered region should exceed the authentic background,
    // averaged over several seeds.
    double in_energy = 0.0, out_energy = 0.0;
    std::int64_t in_n = 0, out_n = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Sample s = synth_tamper(seed * 11 + 3, 64, 64, TamperKind::splice);
        // High-pass residual per pixel (green channel horizontal diff).
        for (std::int64_t y = 0; y < 64; ++y)
            for (std::int64_t x = 1; x < 64; ++x) {
                const double r = std::fabs(s.image.at(1, y, x) - s.image.at(1, y, x - 1));
                if (s.mask.at(y, x) > 0.5 && s.mask.at(y, x - 1) > 0.5) {
                    in_energy += r;
                    ++in_n;
                } else if (s.mask.at(y, x) < 0.5 && s.mask.at(y, x - 1) < 0.5) {
                    out_energy += r;
                    ++out_n;
                }
            }
    }
    CHECK(in_energy / static_cast<double>(in_n) >
          out_energy / static_cast<double>(out_n));
}

TEST_CASE("augment: flips move image and mask together") {
    const Sample s = synth_tamper(17, 64, 64, TamperKind::splice);
    AugmentConfig cfg;
    cfg.p_flip = 1.0;  // force both flips
    cfg.p_blur = cfg.p_jpeg = cfg.p_noise = 0.0;
    const Sample a = augment(s, 99, cfg);
    REQUIRE(a.image.shape() == s.image.shape());
    CHECK(mask_area(a.mask) == mask_area(s.mask));
    // Double flip: corners swap.
    CHECK(a.image.at(0, 0, 0) == s.image.at(0, 63, 63));
    CHECK(a.mask.at(0, 0) == s.mask.at(63, 63));
}

TEST_CASE("augment photometric ops keep the mask untouched") {
    const Sample s = synth_tamper(19, 64, 64, TamperKind::copy_move);
    AugmentConfig cfg;
    cfg.p_flip = 0.0;
    cfg.p_blur = cfg.p_jpeg = cfg.p_noise = 1.0;
    const Sample a = augment(s, 7, cfg);
    for (std::int64_t i = 0; i < s.mask.size(); ++i)
        CHECK(a.mask.data()[i] == s.mask.data()[i]);
    double diff = 0.0;
    for (std::int64_t i = 0; i < s.image.size(); ++i)
        diff += std::fabs(a.image.data()[i] - s.image.data()[i]);
    CHECK(diff > 0.0);
}

TEST_CASE("jpeg-like perturbation at q=100 is a near identity") {
    const Sample s = synth_tamper(23, 64, 64);
    const Tensor out = perturb(s.image, {PerturbKind::jpeg, 100.0});
    double worst = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i)
        worst = std::max(worst, std::fabs(out.data()[i] - s.image.data()[i]));
    CHECK(worst < 2.0 / 255.0);
}

TEST_CASE("jpeg-like perturbation degrades monotonically-ish with quality") {
    const Sample s = synth_tamper(29, 64, 64);
    const auto err = [&](double q) {
        const Tensor out = perturb(s.image, {PerturbKind::jpeg, q});
        double e = 0.0;
        for (std::int64_t i = 0; i < out.size(); ++i)
            e += std::fabs(out.data()[i] - s.image.data()[i]);
        return e / static_cast<double>(out.size());
    };
    CHECK(err(30) > err(75));
    CHECK(err(75) > err(100));
}

TEST_CASE("blur, noise and resize perturbations behave and validate") {
    const Sample s = synth_tamper(31, 64, 64);
    // sigma 0 is identity.
    const Tensor b0 = perturb(s.image, {PerturbKind::blur, 0.0});
    for (std::int64_t i = 0; i < b0.size(); ++i)
        CHECK(b0.data()[i] == doctest::Approx(s.image.data()[i]));
    // blur shrinks total variation.
    const auto tv = [](const Tensor& img) {
        double t = 0.0;
        for (std::int64_t c = 0; c < 3; ++c)
            for (std::int64_t y = 0; y < 64; ++y)
                for (std::int64_t x = 1; x < 64; ++x)
                    t += std::fabs(img.at(c, y, x) - img.at(c, y, x - 1));
        return t;
    };
    CHECK(tv(perturb(s.image, {PerturbKind::blur, 2.0})) < tv(s.image));

    // noise: deterministic in seed, zero sigma is identity.
    const Tensor n1 = perturb(s.image, {PerturbKind::noise, 0.05}, 42);
    const Tensor n2 = perturb(s.image, {PerturbKind::noise, 0.05}, 42);
    for (std::int64_t i = 0; i < n1.size(); ++i) CHECK(n1.data()[i] == n2.data()[i]);

    // resize at scale 1 is identity; 0.5 loses detail.
    const Tensor r1 = perturb(s.image, {PerturbKind::resize, 1.0});
    for (std::int64_t i = 0; i < r1.size(); ++i)
        CHECK(r1.data()[i] == doctest::Approx(s.image.data()[i]));
    CHECK(tv(perturb(s.image, {PerturbKind::resize, 0.5})) < tv(s.image));

    // out-of-range strengths are rejected.
    CHECK_THROWS_AS(perturb(s.image, {PerturbKind::jpeg, 10.0}), DomainError);
    CHECK_THROWS_AS(perturb(s.image, {PerturbKind::blur, 9.0}), DomainError);
    CHECK_THROWS_AS(perturb(s.image, {PerturbKind::noise, 0.5}), DomainError);
    CHECK_THROWS_AS(perturb(s.image, {PerturbKind::resize, 0.1}), DomainError);
}

TEST_CASE("perturb kind names round-trip") {
    for (const char* n : {"jpeg", "blur", "noise", "resize"})
        CHECK(perturb_kind_name(perturb_kind_from_string(n)) == n);
    CHECK_THROWS_AS(perturb_kind_from_string("sharpen"), UsageError);
}

TEST_CASE("manifest round-trip with relative path resolution") {
    namespace fs = std::filesystem;
    const fs::path dir = "/tmp/forma_test_manifest";
    fs::create_directories(dir);
    std::vector<ManifestEntry> entries{{"img/a.png", "msk/a.png", "setA"},
                                       {"img/b.png", "msk/b.png", "setB"}};
    save_manifest((dir / "m.jsonl").string(), entries);
    const auto back = load_manifest((dir / "m.jsonl").string());
    REQUIRE(back.size() == 2);
    // Paths resolve relative to the manifest's directory.
    CHECK(back[0].image == (dir / "img/a.png").string());
    CHECK(back[1].mask == (dir / "msk/b.png").string());
    CHECK(back[1].dataset == "setB");
    fs::remove_all(dir);
}

TEST_CASE("manifest loader reports the offending line") {
    const std::string path = "/tmp/forma_test_manifest_bad.jsonl";
    {
        std::ofstream f(path);
        f << R"({"image": "a.png", "mask": "b.png"})" << "\n";
        f << "this is not json\n";
    }
    try {
        load_manifest(path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(load_manifest("/tmp/forma_nope.jsonl"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("write_synth_dataset produces loadable files and a manifest") {
    namespace fs = std::filesystem;
    const std::string dir = "/tmp/forma_test_synthset";
    const std::string manifest = write_synth_dataset(dir, 3, 77, 64, 64);
    const auto entries = load_manifest(manifest);
    REQUIRE(entries.size() == 3);
    for (const auto& e : entries) {
        const Tensor img = load_image(e.image);
        const Tensor mask = load_mask(e.mask);
        CHECK(img.shape() == Shape{3, 64, 64});
        CHECK(mask.shape() == Shape{64, 64});
        CHECK(e.dataset == "synth");
    }
    fs::remove_all(dir);
}
